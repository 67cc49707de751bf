//! Discretized closed sets: a root cube plus the set of occupied
//! generation-(root+K) descendants.
//!
//! Occupied leaves are stored as *relative* indices against the root, so the
//! same pattern can be re-rooted (a parabolic dilation plus translation)
//! without touching the index data. A "meets" index over every intermediate
//! generation makes ancestor queries and child enumeration cheap.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ParabolicCube;

/// Relative index of a cube below the root: one entry per spatial axis in
/// `0..m^l`, then the time entry in `0..m^{2l}`, where `l` is the depth below
/// the root.
pub type RelIndex = Vec<u64>;

/// A closed set discretized as occupied depth-K descendants of a root cube.
#[derive(Debug, Clone)]
pub struct GridSet {
    root: ParabolicCube,
    depth: u32,
    occupied: BTreeSet<RelIndex>,
    /// For each level 0..=K, the relative indices of cubes meeting the set,
    /// mapped to their meeting children one level down.
    children: Vec<HashMap<RelIndex, Vec<RelIndex>>>,
}

impl GridSet {
    pub fn new(root: ParabolicCube, depth: u32, occupied: BTreeSet<RelIndex>) -> Result<Self> {
        let n = root.dim();
        let m = root.base() as u64;
        let spatial_cap = m.pow(depth);
        let time_cap = m.pow(2 * depth);
        for idx in &occupied {
            if idx.len() != n + 1 {
                return Err(Error::invalid("occupied", "index arity mismatch"));
            }
            if idx[..n].iter().any(|&v| v >= spatial_cap) || idx[n] >= time_cap {
                return Err(Error::invalid(
                    "occupied",
                    "leaf index outside the root cube",
                ));
            }
        }
        let children = build_levels(&occupied, n, m, depth);
        Ok(GridSet {
            root,
            depth,
            occupied,
            children,
        })
    }

    pub fn generate(root: ParabolicCube, depth: u32, spec: &GridSpec) -> Result<Self> {
        let n = root.dim();
        let m = root.base() as u64;
        let spatial_cap = m.pow(depth);
        let time_cap = m.pow(2 * depth);
        let mut occ = BTreeSet::new();
        match spec {
            GridSpec::Empty => {}
            GridSpec::Full => {
                let mut axes: Vec<Vec<u64>> = (0..n).map(|_| (0..spatial_cap).collect()).collect();
                axes.push((0..time_cap).collect());
                product_into(&axes, &mut occ);
            }
            GridSpec::BottomSlab => {
                let mut axes: Vec<Vec<u64>> = (0..n).map(|_| (0..spatial_cap).collect()).collect();
                axes.push(vec![0]);
                product_into(&axes, &mut occ);
            }
            GridSpec::Slab { axis, index } => {
                if *axis > n {
                    return Err(Error::invalid("axis", "slab axis out of range"));
                }
                let cap = if *axis == n { time_cap } else { spatial_cap };
                if *index >= cap {
                    return Err(Error::invalid("index", "slab index out of range"));
                }
                let mut axes: Vec<Vec<u64>> = Vec::with_capacity(n + 1);
                for a in 0..=n {
                    if a == *axis {
                        axes.push(vec![*index]);
                    } else {
                        let c = if a == n { time_cap } else { spatial_cap };
                        axes.push((0..c).collect());
                    }
                }
                product_into(&axes, &mut occ);
            }
            GridSpec::Product { axes } => {
                if axes.len() != n + 1 {
                    return Err(Error::invalid("axes", "need n+1 axis index lists"));
                }
                for (a, list) in axes.iter().enumerate() {
                    let cap = if a == n { time_cap } else { spatial_cap };
                    if list.iter().any(|&v| v >= cap) {
                        return Err(Error::invalid("axes", "index out of range"));
                    }
                }
                product_into(axes, &mut occ);
            }
            GridSpec::Percolation { p, seed } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid("p", "need p in [0,1]"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut axes: Vec<Vec<u64>> = (0..n).map(|_| (0..spatial_cap).collect()).collect();
                axes.push((0..time_cap).collect());
                let mut all = BTreeSet::new();
                product_into(&axes, &mut all);
                for idx in all {
                    if rng.random::<f64>() < *p {
                        occ.insert(idx);
                    }
                }
            }
            GridSpec::Leaves { indices } => {
                for idx in indices {
                    occ.insert(idx.clone());
                }
            }
        }
        GridSet::new(root, depth, occ)
    }

    pub fn root(&self) -> &ParabolicCube {
        &self.root
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn base(&self) -> u32 {
        self.root.base()
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn leaf_generation(&self) -> i32 {
        self.root.generation() + self.depth as i32
    }

    pub fn occupied(&self) -> impl Iterator<Item = &RelIndex> {
        self.occupied.iter()
    }

    /// Generation of the absolute cube for a relative level.
    pub fn generation_at(&self, level: u32) -> i32 {
        self.root.generation() + level as i32
    }

    /// Absolute cube for a relative index at `level`.
    pub fn cube_at(&self, level: u32, rel: &RelIndex) -> ParabolicCube {
        let n = self.dim();
        let m = self.base() as i64;
        let spatial = m.pow(level);
        let time = m.pow(2 * level);
        let mut j = Vec::with_capacity(n + 1);
        for i in 0..n {
            j.push(self.root.index()[i] * spatial + rel[i] as i64);
        }
        j.push(self.root.index()[n] * time + rel[n] as i64);
        ParabolicCube::new(self.base(), self.root.generation() + level as i32, j)
            .expect("valid cube")
    }

    /// Relative index of an absolute cube, if it sits in the root's tree at a
    /// level within 0..=K.
    pub fn rel_of_cube(&self, cube: &ParabolicCube) -> Option<(u32, RelIndex)> {
        if cube.base() != self.base() || cube.dim() != self.dim() {
            return None;
        }
        let level = cube.generation() - self.root.generation();
        if level < 0 || level as u32 > self.depth {
            return None;
        }
        let level = level as u32;
        if !self.root.contains_cube(cube) {
            return None;
        }
        let n = self.dim();
        let m = self.base() as i64;
        let spatial = m.pow(level);
        let time = m.pow(2 * level);
        let mut rel = Vec::with_capacity(n + 1);
        for i in 0..n {
            rel.push((cube.index()[i] - self.root.index()[i] * spatial) as u64);
        }
        rel.push((cube.index()[n] - self.root.index()[n] * time) as u64);
        Some((level, rel))
    }

    /// Whether the cube at (level, rel) meets the set, i.e. has an occupied
    /// descendant.
    pub fn meets(&self, level: u32, rel: &RelIndex) -> bool {
        self.children[level as usize].contains_key(rel)
    }

    /// Whether an absolute cube meets the set.
    pub fn cube_meets(&self, cube: &ParabolicCube) -> bool {
        match self.rel_of_cube(cube) {
            Some((level, rel)) => self.meets(level, &rel),
            None => {
                // A strict ancestor of the root meets E iff the root does.
                cube.contains_cube(&self.root) && !self.is_empty()
            }
        }
    }

    /// Meeting children (one level down) of a meeting cube.
    pub fn meeting_children(&self, level: u32, rel: &RelIndex) -> &[RelIndex] {
        self.children[level as usize]
            .get(rel)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Occupied leaves below the cube at (level, rel).
    pub fn leaves_below(&self, level: u32, rel: &RelIndex) -> Vec<RelIndex> {
        let mut out = Vec::new();
        let mut stack = vec![(level, rel.clone())];
        while let Some((l, r)) = stack.pop() {
            if l == self.depth {
                if self.occupied.contains(&r) {
                    out.push(r);
                }
                continue;
            }
            for c in self.meeting_children(l, &r) {
                stack.push((l + 1, c.clone()));
            }
        }
        out
    }

    /// Does the leaf containing the given point exist and is it occupied?
    /// The point is mapped through the half-open cube convention.
    pub fn point_in_set(&self, x: &[f64], t: f64) -> bool {
        let n = self.dim();
        if x.len() != n {
            return false;
        }
        let m = self.base() as f64;
        let level = self.depth;
        let spatial = m.powi(level as i32);
        let time = m.powi(2 * level as i32);
        let side = self.root.side();
        let (corner, t0) = self.root.lower_corner();
        let mut rel = Vec::with_capacity(n + 1);
        for i in 0..n {
            let u = (x[i] - corner[i]) / side * spatial;
            if u < 0.0 || u >= spatial {
                return false;
            }
            rel.push(u as u64);
        }
        let v = (t - t0) / self.root.time_extent() * time;
        if v < 0.0 || v >= time {
            return false;
        }
        rel.push(v as u64);
        self.occupied.contains(&rel)
    }

    /// Restriction of the set to the subtree of a meeting cube, re-rooted at
    /// that cube.
    pub fn restrict(&self, level: u32, rel: &RelIndex) -> Result<GridSet> {
        let n = self.dim();
        let m = self.base() as u64;
        let sub_depth = self.depth - level;
        let spatial = m.pow(sub_depth);
        let time = m.pow(2 * sub_depth);
        let mut occ = BTreeSet::new();
        for leaf in self.leaves_below(level, rel) {
            let mut sub = Vec::with_capacity(n + 1);
            for i in 0..n {
                sub.push(leaf[i] - rel[i] * spatial);
            }
            sub.push(leaf[n] - rel[n] * time);
            occ.insert(sub);
        }
        GridSet::new(self.cube_at(level, rel), sub_depth, occ)
    }

    /// The same set one generation finer: every occupied leaf is replaced by
    /// all of its children.
    pub fn refine(&self) -> Result<GridSet> {
        let n = self.dim();
        let m = self.base() as u64;
        let mut occ = BTreeSet::new();
        for leaf in &self.occupied {
            let mut digits = vec![0u64; n + 1];
            loop {
                let mut child = Vec::with_capacity(n + 1);
                for i in 0..n {
                    child.push(leaf[i] * m + digits[i]);
                }
                child.push(leaf[n] * m * m + digits[n]);
                occ.insert(child);
                let mut axis = n + 1;
                let mut done = false;
                loop {
                    if axis == 0 {
                        done = true;
                        break;
                    }
                    axis -= 1;
                    let cap = if axis == n { m * m } else { m };
                    digits[axis] += 1;
                    if digits[axis] < cap {
                        break;
                    }
                    digits[axis] = 0;
                }
                if done {
                    break;
                }
            }
        }
        GridSet::new(self.root.clone(), self.depth + 1, occ)
    }

    /// Restriction to leaves below any of the given (level, rel) cubes,
    /// keeping the original root.
    pub fn keep_below(&self, cubes: &[(u32, RelIndex)]) -> Result<GridSet> {
        let mut occ = BTreeSet::new();
        for (level, rel) in cubes {
            for leaf in self.leaves_below(*level, rel) {
                occ.insert(leaf);
            }
        }
        GridSet::new(self.root.clone(), self.depth, occ)
    }

    /// Plain text format: a header line `n m root_literal K` followed by one
    /// comma-separated relative leaf index per line.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "{} {} {} {}",
            self.dim(),
            self.base(),
            self.root,
            self.depth
        )?;
        for idx in &self.occupied {
            let line: Vec<String> = idx.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<GridSet> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse("gridset header needs: n m root K".into()));
        }
        let n: usize = parts[0]
            .parse()
            .map_err(|_| Error::Parse("bad n in gridset header".into()))?;
        let root: ParabolicCube = parts[2].parse()?;
        if root.dim() != n {
            return Err(Error::Parse("root dimension disagrees with header".into()));
        }
        let depth: u32 = parts[3]
            .parse()
            .map_err(|_| Error::Parse("bad K in gridset header".into()))?;
        let mut occ = BTreeSet::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let idx = line
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Parse(format!("bad leaf index {p:?}")))
                })
                .collect::<Result<Vec<u64>>>()?;
            occ.insert(idx);
        }
        GridSet::new(root, depth, occ)
    }
}

/// Procedural generators for grid sets, used by JSON experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Empty,
    Full,
    /// All spatial indices at time index 0 (the bottom time-face).
    BottomSlab,
    /// Fix one axis (axis == n means time) to a single index.
    Slab { axis: usize, index: u64 },
    /// Explicit product of per-axis index sets.
    Product { axes: Vec<Vec<u64>> },
    /// Each resolution cube kept independently with probability p.
    Percolation { p: f64, seed: u64 },
    /// Explicit leaf list.
    Leaves { indices: Vec<RelIndex> },
}

fn product_into(axes: &[Vec<u64>], out: &mut BTreeSet<RelIndex>) {
    let mut idx = vec![0usize; axes.len()];
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    loop {
        out.insert(idx.iter().enumerate().map(|(a, &i)| axes[a][i]).collect());
        let mut axis = axes.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < axes[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
}

fn build_levels(
    occupied: &BTreeSet<RelIndex>,
    n: usize,
    m: u64,
    depth: u32,
) -> Vec<HashMap<RelIndex, Vec<RelIndex>>> {
    let mut levels: Vec<HashMap<RelIndex, Vec<RelIndex>>> =
        (0..=depth).map(|_| HashMap::new()).collect();
    // leaf level: meeting cubes with no recorded children
    for leaf in occupied {
        levels[depth as usize].entry(leaf.clone()).or_default();
    }
    for l in (0..depth).rev() {
        let mut seen: HashMap<RelIndex, HashSet<RelIndex>> = HashMap::new();
        for child in levels[l as usize + 1].keys() {
            let mut parent = Vec::with_capacity(n + 1);
            for i in 0..n {
                parent.push(child[i] / m);
            }
            parent.push(child[n] / (m * m));
            seen.entry(parent).or_default().insert(child.clone());
        }
        for (parent, kids) in seen {
            let mut v: Vec<RelIndex> = kids.into_iter().collect();
            v.sort();
            levels[l as usize].insert(parent, v);
        }
    }
    levels
}
