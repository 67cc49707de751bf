//! Mass-distribution construction on a grid set: start every occupied leaf
//! at `side^rho`, then sweep up the tree rescaling any subtree whose mass
//! exceeds its cube's `side^rho` cap.
//!
//! The resulting measure satisfies the growth bound on every cube and its
//! total equals the unbounded net content of the set within the root tree.
//! Masses spread uniformly inside each leaf, which keeps the growth bound
//! valid below the resolution scale as well (the exponent is at most n+2).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::content::{net_content_unchecked, ScaleCap};
use crate::error::{Error, Result};
use crate::geometry::{ParabolicCube, ParabolicRectangle, SpaceTimePoint};
use crate::grid::{GridSet, RelIndex};

/// Finitely additive mass assignment on the cube tree of a grid set.
#[derive(Debug, Clone)]
pub struct TreeMeasure {
    set: GridSet,
    rho: f64,
    /// Mass per level: interior masses are literal sums of their children's
    /// stored values, so additivity is exact by construction.
    masses: Vec<HashMap<RelIndex, f64>>,
}

impl TreeMeasure {
    pub fn set(&self) -> &GridSet {
        &self.set
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn root(&self) -> &ParabolicCube {
        self.set.root()
    }

    pub fn total(&self) -> f64 {
        self.mass_at(0, &vec![0; self.set.dim() + 1])
    }

    pub fn mass_at(&self, level: u32, rel: &RelIndex) -> f64 {
        self.masses[level as usize].get(rel).copied().unwrap_or(0.0)
    }

    /// Mass of an arbitrary cube of the same base. Cubes finer than the
    /// resolution take the uniform-density share of their leaf.
    pub fn mass_of_cube(&self, cube: &ParabolicCube) -> f64 {
        if cube.base() != self.set.base() || cube.dim() != self.set.dim() {
            return 0.0;
        }
        if let Some((level, rel)) = self.set.rel_of_cube(cube) {
            return self.mass_at(level, &rel);
        }
        let leaf_gen = self.set.leaf_generation();
        if cube.generation() > leaf_gen {
            // below resolution: uniform share within the containing leaf
            let leaf = cube.ancestor((cube.generation() - leaf_gen) as u32);
            if let Some((level, rel)) = self.set.rel_of_cube(&leaf) {
                let depth = (cube.generation() - leaf_gen) as i32;
                let share = (self.set.base() as f64).powi(-depth * (self.set.dim() as i32 + 2));
                return self.mass_at(level, &rel) * share;
            }
            return 0.0;
        }
        // ancestor of the root: all mass lives in the root
        if cube.contains_cube(self.set.root()) {
            self.total()
        } else {
            0.0
        }
    }

    /// Exact measure of a closed rectangle: sum over occupied leaves of the
    /// leaf mass times the volume fraction of the overlap.
    pub fn mass_of_rectangle(&self, rect: &ParabolicRectangle) -> f64 {
        let rb = rect.as_box();
        let mut total = 0.0;
        for leaf in self.set.occupied() {
            let mass = self.mass_at(self.set.depth(), leaf);
            if mass == 0.0 {
                continue;
            }
            let lb = self.set.cube_at(self.set.depth(), leaf).as_box();
            let mut frac = 1.0;
            for i in 0..lb.dim() {
                let lo = lb.x_lo[i].max(rb.x_lo[i]);
                let hi = lb.x_hi[i].min(rb.x_hi[i]);
                if hi <= lo {
                    frac = 0.0;
                    break;
                }
                frac *= (hi - lo) / (lb.x_hi[i] - lb.x_lo[i]);
            }
            if frac > 0.0 {
                let lo = lb.t_lo.max(rb.t_lo);
                let hi = lb.t_hi.min(rb.t_hi);
                frac = if hi <= lo {
                    0.0
                } else {
                    frac * (hi - lo) / (lb.t_hi - lb.t_lo)
                };
            }
            total += mass * frac;
        }
        total
    }

    /// Evaluate the measure-theoretic invariants: returns the largest
    /// relative additivity residual and the largest relative growth-bound
    /// excess over all meeting cubes.
    pub fn verify(&self) -> (f64, f64) {
        let mut additivity = 0.0_f64;
        let mut growth = 0.0_f64;
        for level in 0..=self.set.depth() {
            for (rel, mass) in &self.masses[level as usize] {
                let side = (self.set.base() as f64).powi(-self.set.generation_at(level));
                let cap = side.powf(self.rho);
                growth = growth.max((mass - cap) / cap);
                if level < self.set.depth() {
                    let child_sum: f64 = self
                        .set
                        .meeting_children(level, rel)
                        .iter()
                        .map(|c| self.mass_at(level + 1, c))
                        .sum();
                    if *mass > 0.0 {
                        additivity = additivity.max((child_sum - mass).abs() / mass);
                    }
                }
            }
        }
        (additivity, growth)
    }

    /// Serialize as (root literal, rho, leaf masses).
    pub fn to_record(&self) -> TreeMeasureRecord {
        TreeMeasureRecord {
            root: self.set.root().to_string(),
            depth: self.set.depth(),
            rho: self.rho,
            leaves: self
                .set
                .occupied()
                .map(|rel| LeafMass {
                    index: rel.clone(),
                    mass: self.mass_at(self.set.depth(), rel),
                })
                .collect(),
        }
    }

    /// Rebuild from a record: interior masses are recomputed bottom-up and
    /// the growth bound is re-checked (relative tolerance 1e-12).
    pub fn from_record(rec: &TreeMeasureRecord) -> Result<TreeMeasure> {
        let root: ParabolicCube = rec.root.parse()?;
        let occ = rec.leaves.iter().map(|l| l.index.clone()).collect();
        let set = GridSet::new(root, rec.depth, occ)?;
        let leaf_masses: HashMap<RelIndex, f64> = rec
            .leaves
            .iter()
            .map(|l| (l.index.clone(), l.mass))
            .collect();
        if leaf_masses.values().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::invalid("mass", "leaf masses must be finite and >= 0"));
        }
        let measure = finish_from_leaves(set, rec.rho, leaf_masses);
        let (_, growth) = measure.verify();
        if growth > 1e-12 {
            return Err(Error::invalid(
                "mass",
                format!("loaded masses violate the growth bound by {growth:.3e}"),
            ));
        }
        Ok(measure)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafMass {
    pub index: RelIndex,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeMeasureRecord {
    pub root: String,
    pub depth: u32,
    pub rho: f64,
    pub leaves: Vec<LeafMass>,
}

/// Build the measure on a nonempty grid set for an exponent in (0, n+2].
pub fn build_frostman(set: &GridSet, rho: f64) -> Result<TreeMeasure> {
    let n = set.dim() as f64;
    if set.is_empty() {
        return Err(Error::EmptySet("build_frostman"));
    }
    if !(rho > 0.0 && rho <= n + 2.0) {
        return Err(Error::invalid("rho", "need 0 < rho <= n+2"));
    }
    // Capped subtree values: value(Q) = min(side^rho, sum over children).
    // This equals the unbounded net content of the subtree.
    let mut capped: Vec<HashMap<RelIndex, f64>> =
        (0..=set.depth()).map(|_| HashMap::new()).collect();
    for level in (0..=set.depth()).rev() {
        let keys: Vec<RelIndex> = if level == set.depth() {
            set.occupied().cloned().collect()
        } else {
            let mut ks: Vec<RelIndex> = Vec::new();
            for rel in capped[level as usize + 1].keys() {
                let m = set.base() as u64;
                let n = set.dim();
                let mut parent: RelIndex = (0..n).map(|i| rel[i] / m).collect();
                parent.push(rel[n] / (m * m));
                ks.push(parent);
            }
            ks.sort();
            ks.dedup();
            ks
        };
        let side = (set.base() as f64).powi(-set.generation_at(level));
        let cap = side.powf(rho);
        for rel in keys {
            let v = if level == set.depth() {
                cap
            } else {
                let child_sum: f64 = set
                    .meeting_children(level, &rel)
                    .iter()
                    .map(|c| capped[level as usize + 1][c])
                    .sum();
                cap.min(child_sum)
            };
            capped[level as usize].insert(rel, v);
        }
    }
    // Top-down: final leaf mass = its capped value times the product of the
    // rescale ratios along the root path. Ratios are clamped to <= 1 so the
    // growth bound survives floating-point rounding.
    let mut leaf_masses: HashMap<RelIndex, f64> = HashMap::new();
    let rootrel: RelIndex = vec![0; set.dim() + 1];
    let mut stack: Vec<(u32, RelIndex, f64)> = vec![(0, rootrel, 1.0)];
    while let Some((level, rel, ratio)) = stack.pop() {
        if level == set.depth() {
            let v = capped[level as usize][&rel] * ratio;
            leaf_masses.insert(rel, v);
            continue;
        }
        let own = capped[level as usize][&rel] * ratio;
        let child_sum: f64 = set
            .meeting_children(level, &rel)
            .iter()
            .map(|c| capped[level as usize + 1][c])
            .sum();
        let next_ratio = if child_sum > 0.0 {
            (own / child_sum).min(1.0)
        } else {
            0.0
        };
        for c in set.meeting_children(level, &rel) {
            stack.push((level + 1, c.clone(), next_ratio));
        }
    }
    Ok(finish_from_leaves(set.clone(), rho, leaf_masses))
}

fn finish_from_leaves(
    set: GridSet,
    rho: f64,
    leaf_masses: HashMap<RelIndex, f64>,
) -> TreeMeasure {
    let mut masses: Vec<HashMap<RelIndex, f64>> =
        (0..=set.depth()).map(|_| HashMap::new()).collect();
    masses[set.depth() as usize] = leaf_masses;
    for level in (0..set.depth()).rev() {
        let keys: Vec<RelIndex> = {
            let m = set.base() as u64;
            let n = set.dim();
            let mut ks: Vec<RelIndex> = masses[level as usize + 1]
                .keys()
                .map(|rel| {
                    let mut parent: RelIndex = (0..n).map(|i| rel[i] / m).collect();
                    parent.push(rel[n] / (m * m));
                    parent
                })
                .collect();
            ks.sort();
            ks.dedup();
            ks
        };
        for rel in keys {
            let sum: f64 = set
                .meeting_children(level, &rel)
                .iter()
                .map(|c| masses[level as usize + 1].get(c).copied().unwrap_or(0.0))
                .sum();
            masses[level as usize].insert(rel, sum);
        }
    }
    TreeMeasure { set, rho, masses }
}

/// Check the diameter bound `mu(A) <= 3^(n+1) m^rho diam(A)^rho` for a
/// closed rectangle, with the measure summed exactly over the tree.
pub fn frostman_diam_bound_check(mu: &TreeMeasure, rect: &ParabolicRectangle) -> bool {
    let n = mu.set().dim();
    let m = mu.set().base() as f64;
    let bound = 3.0_f64.powi(n as i32 + 1) * m.powf(mu.rho()) * rect.diam().powf(mu.rho());
    mu.mass_of_rectangle(rect) <= bound * (1.0 + 1e-12)
}

/// Total mass equals the unbounded net content within the tree, up to the
/// stated relative tolerance.
pub fn total_matches_content(mu: &TreeMeasure) -> bool {
    let content = net_content_unchecked(mu.set(), mu.rho(), ScaleCap::Unbounded).value;
    (mu.total() - content).abs() <= 1e-12 * content.max(1e-300)
}

/// Point evaluation helper used by potentials: centers and masses of the
/// occupied leaves.
pub fn leaf_atoms(mu: &TreeMeasure) -> Vec<(SpaceTimePoint, f64)> {
    mu.set()
        .occupied()
        .map(|rel| {
            (
                mu.set().cube_at(mu.set().depth(), rel).center(),
                mu.mass_at(mu.set().depth(), rel),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::net_content;
    use crate::grid::GridSpec;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn root(m: u32, n: usize) -> ParabolicCube {
        ParabolicCube::unit(m, n).unwrap()
    }

    #[test]
    fn empty_set_is_an_error() {
        let e = GridSet::generate(root(3, 1), 1, &GridSpec::Empty).unwrap();
        assert!(build_frostman(&e, 1.0).is_err());
    }

    #[test]
    fn single_leaf_total() {
        // a single occupied leaf at depth K keeps its initial mass: no cap
        // binds above it
        let occ: BTreeSet<Vec<u64>> = [vec![4, 17]].into_iter().collect();
        let e = GridSet::new(root(3, 1), 2, occ).unwrap();
        for rho in [0.5, 1.0, 2.5] {
            let mu = build_frostman(&e, rho).unwrap();
            let expected = (1.0f64 / 9.0).powf(rho);
            assert!((mu.total() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn full_grid_uniform_masses() {
        // full root, rho < n+2: cap binds at every level, masses are uniform
        // and the level-j mass is m^(-j(n+2))
        let e = GridSet::generate(root(3, 1), 2, &GridSpec::Full).unwrap();
        let mu = build_frostman(&e, 1.0).unwrap();
        assert!((mu.total() - 1.0).abs() < 1e-12);
        for level in 0..=2u32 {
            let expect = 27.0_f64.powi(-(level as i32));
            for rel in e.occupied() {
                let m = 3u64;
                let up = 2 - level;
                let anc: Vec<u64> = vec![rel[0] / m.pow(up), rel[1] / m.pow(2 * up)];
                let got = mu.mass_at(level, &anc);
                assert!(
                    (got - expect).abs() < 1e-12 * expect,
                    "level {level}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn two_leaves_match_dp_oracle() {
        // n=1, m=3, E = two of the 27 children of the root, rho=1: total 2/3
        let occ: BTreeSet<Vec<u64>> = [vec![0, 0], vec![2, 7]].into_iter().collect();
        let e = GridSet::new(root(3, 1), 1, occ).unwrap();
        let mu = build_frostman(&e, 1.0).unwrap();
        assert!((mu.total() - 2.0 / 3.0).abs() < 1e-14);
        let dp = net_content(&e, 1.0, ScaleCap::Unbounded).unwrap().value;
        assert!((mu.total() - dp).abs() < 1e-14);
    }

    #[test]
    fn invariants_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..60 {
            let m = if trial % 2 == 0 { 2 } else { 3 };
            let e = GridSet::generate(
                root(m, 1),
                3,
                &GridSpec::Percolation {
                    p: 0.45,
                    seed: rng.random(),
                },
            )
            .unwrap();
            if e.is_empty() {
                continue;
            }
            for rho in [0.6, 1.0, 2.0] {
                let mu = build_frostman(&e, rho).unwrap();
                let (additivity, growth) = mu.verify();
                assert!(additivity <= 1e-12, "additivity residual {additivity}");
                assert!(growth <= 1e-12, "growth bound violated by {growth}");
                assert!(total_matches_content(&mu));
            }
        }
    }

    #[test]
    fn rectangle_bound_holds_for_random_rectangles() {
        let e = GridSet::generate(root(3, 1), 3, &GridSpec::Percolation { p: 0.5, seed: 13 })
            .unwrap();
        let mu = build_frostman(&e, 1.3).unwrap();
        // containing rectangle: mass equals the total
        let big = ParabolicRectangle::from_bounds(vec![-1.0], vec![2.0], -1.0, 2.0).unwrap();
        assert!((mu.mass_of_rectangle(&big) - mu.total()).abs() < 1e-12);
        assert!(frostman_diam_bound_check(&mu, &big));
        // single leaf cube as a rectangle
        let leaf = e.occupied().next().unwrap().clone();
        let lb = e.cube_at(3, &leaf).as_box();
        let leaf_rect =
            ParabolicRectangle::from_bounds(lb.x_lo.clone(), lb.x_hi.clone(), lb.t_lo, lb.t_hi)
                .unwrap();
        assert!(frostman_diam_bound_check(&mu, &leaf_rect));
        // 1000 random rectangles
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..1000 {
            let x0: f64 = rng.random_range(-0.5..1.0);
            let w: f64 = rng.random_range(1e-3..1.0);
            let t0: f64 = rng.random_range(-0.5..1.0);
            let h: f64 = rng.random_range(1e-3..1.0);
            let rect = ParabolicRectangle::from_bounds(vec![x0], vec![x0 + w], t0, t0 + h).unwrap();
            assert!(frostman_diam_bound_check(&mu, &rect));
        }
    }

    #[test]
    fn serialization_round_trip_and_corruption_detection() {
        let e = GridSet::generate(root(2, 2), 2, &GridSpec::Percolation { p: 0.5, seed: 21 })
            .unwrap();
        let mu = build_frostman(&e, 1.5).unwrap();
        let rec = mu.to_record();
        let json = serde_json::to_string(&rec).unwrap();
        let parsed: TreeMeasureRecord = serde_json::from_str(&json).unwrap();
        let back = TreeMeasure::from_record(&parsed).unwrap();
        assert!((back.total() - mu.total()).abs() < 1e-15);
        // corrupt one leaf mass beyond its cap: load must fail
        let mut bad = rec.clone();
        bad.leaves[0].mass = 10.0;
        assert!(TreeMeasure::from_record(&bad).is_err());
    }

    #[test]
    fn sub_resolution_cube_mass_respects_growth() {
        let e = GridSet::generate(root(3, 1), 1, &GridSpec::Full).unwrap();
        let mu = build_frostman(&e, 2.0).unwrap();
        // a cube two generations below the resolution
        let q = ParabolicCube::new(3, 3, vec![0, 0]).unwrap();
        let mass = mu.mass_of_cube(&q);
        assert!(mass <= q.side().powf(2.0) * (1.0 + 1e-12));
        assert!(mass > 0.0);
    }
}
