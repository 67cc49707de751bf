//! Parabolic metric, m-adic parabolic cubes, rectangles, and the cube
//! triples used by the alternative audits.
//!
//! Space-time is `R^n x R` with the parabolic distance
//! `max(|X - Y|_2, sqrt(|t - s|))`. A generation-`k` parabolic m-adic cube has
//! spatial side `m^-k` and time extent `m^-2k`, hence `m^(n+2)` children.
//! Cube identity is pure integer data (base, generation, index vector), so
//! tree predicates never touch floating point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (X, t) in R^n x R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("x", "need n >= 1 spatial coordinates"));
        }
        if !x.iter().all(|v| v.is_finite()) || !t.is_finite() {
            return Err(Error::invalid("point", "coordinates must be finite"));
        }
        Ok(SpaceTimePoint { x, t })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Parabolic distance: max of the Euclidean space distance and sqrt(|dt|).
pub fn p_dist(a: &SpaceTimePoint, b: &SpaceTimePoint) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let space: f64 = a
        .x
        .iter()
        .zip(&b.x)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok(space.max((a.t - b.t).abs().sqrt()))
}

/// Sup-norm flavor of the parabolic distance: max(2 |X-Y|_inf, sqrt(2 |dt|)).
///
/// Its closed ball of radius `lambda` is a closed parabolic cube of side
/// `lambda` centered at the point.
pub fn dist_infty(a: &SpaceTimePoint, b: &SpaceTimePoint) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let space = a
        .x
        .iter()
        .zip(&b.x)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0_f64, f64::max);
    Ok((2.0 * space).max((2.0 * (a.t - b.t).abs()).sqrt()))
}

/// Which closure convention a membership query uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Interior only.
    Open,
    /// Lower faces included, upper faces excluded (the m-adic convention).
    HalfOpen,
    /// All faces included.
    Closed,
}

/// Half-open parabolic m-adic cube, identified by base, generation, and an
/// integer index vector of length n+1 (n spatial indices, then the time
/// index).
///
/// Generation k covers `[j_i m^-k, (j_i+1) m^-k)` in each spatial coordinate
/// and `[j_t m^-2k, (j_t+1) m^-2k)` in time. Negative generations give cubes
/// of side larger than one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParabolicCube {
    m: u32,
    k: i32,
    j: Vec<i64>,
}

impl ParabolicCube {
    pub fn new(m: u32, k: i32, j: Vec<i64>) -> Result<Self> {
        if m < 2 {
            return Err(Error::BadBase {
                m,
                reason: "base must be >= 2".into(),
            });
        }
        if j.len() < 2 {
            return Err(Error::invalid("j", "index vector needs n+1 >= 2 entries"));
        }
        Ok(ParabolicCube { m, k, j })
    }

    /// The generation-k cube with all indices zero (lower corner at the origin).
    pub fn unit(m: u32, n: usize) -> Result<Self> {
        Self::new(m, 0, vec![0; n + 1])
    }

    pub fn base(&self) -> u32 {
        self.m
    }

    pub fn generation(&self) -> i32 {
        self.k
    }

    /// Spatial dimension n.
    pub fn dim(&self) -> usize {
        self.j.len() - 1
    }

    pub fn index(&self) -> &[i64] {
        &self.j
    }

    pub fn side(&self) -> f64 {
        (self.m as f64).powi(-self.k)
    }

    pub fn time_extent(&self) -> f64 {
        (self.m as f64).powi(-2 * self.k)
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32 + 2)
    }

    /// Parabolic diameter, sqrt(n) * side.
    pub fn diam(&self) -> f64 {
        (self.dim() as f64).sqrt() * self.side()
    }

    /// Number of children, m^(n+2).
    pub fn child_count(&self) -> u64 {
        (self.m as u64).pow(self.dim() as u32 + 2)
    }

    /// Lower corner (spatial coords, then time).
    pub fn lower_corner(&self) -> (Vec<f64>, f64) {
        let s = self.side();
        let te = self.time_extent();
        let n = self.dim();
        let x = (0..n).map(|i| self.j[i] as f64 * s).collect();
        (x, self.j[n] as f64 * te)
    }

    /// Center of the cube as a space-time point.
    pub fn center(&self) -> SpaceTimePoint {
        let (x, t) = self.lower_corner();
        let s = self.side();
        let te = self.time_extent();
        SpaceTimePoint {
            x: x.into_iter().map(|v| v + 0.5 * s).collect(),
            t: t + 0.5 * te,
        }
    }

    /// Spatial center together with the *top* (future-most) time coordinate.
    /// This is the anchor point `z_Q` of the open-cube normalization used by
    /// the alternative audits.
    pub fn top_center(&self) -> SpaceTimePoint {
        let (x, t) = self.lower_corner();
        let s = self.side();
        SpaceTimePoint {
            x: x.into_iter().map(|v| v + 0.5 * s).collect(),
            t: t + self.time_extent(),
        }
    }

    pub fn contains_point(&self, p: &SpaceTimePoint, closure: Closure) -> Result<bool> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch(p.dim(), self.dim()));
        }
        Ok(self.as_box().contains(p, closure))
    }

    /// All m^(n+2) children, in lexicographic index order.
    pub fn children(&self) -> Vec<ParabolicCube> {
        let m = self.m as i64;
        let n = self.dim();
        let mut out = Vec::with_capacity(self.child_count() as usize);
        let mut digits = vec![0i64; n + 1];
        loop {
            let mut j = Vec::with_capacity(n + 1);
            for i in 0..n {
                j.push(self.j[i] * m + digits[i]);
            }
            j.push(self.j[n] * m * m + digits[n]);
            out.push(ParabolicCube {
                m: self.m,
                k: self.k + 1,
                j,
            });
            // odometer: spatial digits run 0..m, the time digit runs 0..m^2
            let mut axis = n + 1;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                let cap = if axis == n { m * m } else { m };
                digits[axis] += 1;
                if digits[axis] < cap {
                    break;
                }
                digits[axis] = 0;
            }
        }
    }

    /// The unique parent cube, one generation up.
    pub fn parent(&self) -> ParabolicCube {
        let m = self.m as i64;
        let n = self.dim();
        let mut j = Vec::with_capacity(n + 1);
        for i in 0..n {
            j.push(self.j[i].div_euclid(m));
        }
        j.push(self.j[n].div_euclid(m * m));
        ParabolicCube {
            m: self.m,
            k: self.k - 1,
            j,
        }
    }

    /// The ancestor `levels` generations up; `ancestor(0)` is the cube itself.
    pub fn ancestor(&self, levels: u32) -> ParabolicCube {
        let mut q = self.clone();
        for _ in 0..levels {
            q = q.parent();
        }
        q
    }

    /// Whether `self` contains `other` as a tree descendant (or equals it).
    pub fn contains_cube(&self, other: &ParabolicCube) -> bool {
        if self.m != other.m || self.dim() != other.dim() || other.k < self.k {
            return false;
        }
        other.ancestor((other.k - self.k) as u32) == *self
    }

    /// Closed bounding box of the cube.
    pub fn as_box(&self) -> PBox {
        let (x, t) = self.lower_corner();
        let s = self.side();
        let te = self.time_extent();
        PBox {
            x_lo: x.clone(),
            x_hi: x.iter().map(|v| v + s).collect(),
            t_lo: t,
            t_hi: t + te,
        }
    }
}

/// Literal format `m:k:j1,...,j{n+1}`, used in configs and logs.
impl fmt::Display for ParabolicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.j.iter().map(|v| v.to_string()).collect();
        write!(f, "{}:{}:{}", self.m, self.k, idx.join(","))
    }
}

impl FromStr for ParabolicCube {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, ':');
        let m = parts
            .next()
            .and_then(|p| p.parse::<u32>().ok())
            .ok_or_else(|| Error::Parse(format!("bad cube literal {s:?}: base")))?;
        let k = parts
            .next()
            .and_then(|p| p.parse::<i32>().ok())
            .ok_or_else(|| Error::Parse(format!("bad cube literal {s:?}: generation")))?;
        let j = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("bad cube literal {s:?}: indices")))?
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::Parse(format!("bad cube literal {s:?}: index {p:?}")))
            })
            .collect::<Result<Vec<i64>>>()?;
        ParabolicCube::new(m, k, j)
    }
}

/// Closed axis-aligned box in space-time. Degenerate extents are allowed so
/// that boundary faces can be expressed as boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PBox {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl PBox {
    pub fn dim(&self) -> usize {
        self.x_lo.len()
    }

    pub fn contains(&self, p: &SpaceTimePoint, closure: Closure) -> bool {
        let inside = |lo: f64, hi: f64, v: f64| match closure {
            Closure::Open => lo < v && v < hi,
            Closure::HalfOpen => lo <= v && v < hi,
            Closure::Closed => lo <= v && v <= hi,
        };
        p.x.iter()
            .zip(self.x_lo.iter().zip(&self.x_hi))
            .all(|(v, (lo, hi))| inside(*lo, *hi, *v))
            && inside(self.t_lo, self.t_hi, p.t)
    }

    /// Parabolic diameter of the closed box.
    pub fn diam(&self) -> f64 {
        let space: f64 = self
            .x_lo
            .iter()
            .zip(&self.x_hi)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt();
        space.max((self.t_hi - self.t_lo).sqrt())
    }

    /// Closed-form parabolic gap between two closed boxes.
    pub fn gap_to(&self, other: &PBox) -> f64 {
        let mut space2 = 0.0;
        for i in 0..self.dim() {
            let d = interval_gap(self.x_lo[i], self.x_hi[i], other.x_lo[i], other.x_hi[i]);
            space2 += d * d;
        }
        let dt = interval_gap(self.t_lo, self.t_hi, other.t_lo, other.t_hi);
        space2.sqrt().max(dt.sqrt())
    }

    /// The 2n side faces plus the bottom time-face, i.e. the part of the box
    /// boundary that backwards-in-time paths can reach from inside. The top
    /// time-face is omitted.
    pub fn past_reachable_faces(&self) -> Vec<PBox> {
        let n = self.dim();
        let mut faces = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            for &v in &[self.x_lo[i], self.x_hi[i]] {
                let mut f = self.clone();
                f.x_lo[i] = v;
                f.x_hi[i] = v;
                faces.push(f);
            }
        }
        let mut bottom = self.clone();
        bottom.t_hi = bottom.t_lo;
        faces.push(bottom);
        faces
    }

    pub fn point(p: &SpaceTimePoint) -> PBox {
        PBox {
            x_lo: p.x.clone(),
            x_hi: p.x.clone(),
            t_lo: p.t,
            t_hi: p.t,
        }
    }
}

fn interval_gap(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    (b_lo - a_hi).max(a_lo - b_hi).max(0.0)
}

/// Infimum of the parabolic distance over pairs from two finite unions of
/// closed boxes, computed in closed form per box pair.
pub fn gap(a: &[PBox], b: &[PBox]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet("gap"));
    }
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            best = best.min(p.gap_to(q));
        }
    }
    Ok(best)
}

/// Closed parabolic rectangle: spatial sides `s_1..s_n` and time thickness
/// `s_{n+1}^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicRectangle {
    corner: Vec<f64>,
    sides: Vec<f64>,
    t_lo: f64,
    time_side: f64,
}

impl ParabolicRectangle {
    /// `sides` has length n+1; the last entry is the time side `s_{n+1}`,
    /// whose square is the time extent.
    pub fn new(corner: Vec<f64>, sides: Vec<f64>, t_lo: f64) -> Result<Self> {
        if corner.is_empty() || sides.len() != corner.len() + 1 {
            return Err(Error::invalid(
                "sides",
                "need n spatial corner coordinates and n+1 side lengths",
            ));
        }
        if !sides.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("sides", "side lengths must be positive"));
        }
        let time_side = sides[corner.len()];
        Ok(ParabolicRectangle {
            corner,
            sides: sides[..sides.len() - 1].to_vec(),
            t_lo,
            time_side,
        })
    }

    /// Axis-aligned construction from explicit bounds.
    pub fn from_bounds(x_lo: Vec<f64>, x_hi: Vec<f64>, t_lo: f64, t_hi: f64) -> Result<Self> {
        if x_lo.len() != x_hi.len() || x_lo.is_empty() {
            return Err(Error::invalid("bounds", "mismatched spatial bounds"));
        }
        if t_hi <= t_lo {
            return Err(Error::invalid("bounds", "need t_hi > t_lo"));
        }
        let sides: Vec<f64> = x_lo.iter().zip(&x_hi).map(|(lo, hi)| hi - lo).collect();
        if !sides.iter().all(|s| *s > 0.0) {
            return Err(Error::invalid("bounds", "need x_hi > x_lo"));
        }
        let mut all = sides;
        all.push((t_hi - t_lo).sqrt());
        ParabolicRectangle::new(x_lo, all, t_lo)
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn time_extent(&self) -> f64 {
        self.time_side * self.time_side
    }

    pub fn as_box(&self) -> PBox {
        PBox {
            x_lo: self.corner.clone(),
            x_hi: self
                .corner
                .iter()
                .zip(&self.sides)
                .map(|(c, s)| c + s)
                .collect(),
            t_lo: self.t_lo,
            t_hi: self.t_lo + self.time_extent(),
        }
    }

    pub fn contains(&self, p: &SpaceTimePoint, closure: Closure) -> bool {
        self.as_box().contains(p, closure)
    }

    pub fn diam(&self) -> f64 {
        self.as_box().diam()
    }

    /// Strict inclusion in the interior of `outer`.
    pub fn strictly_inside(&self, outer: &ParabolicRectangle) -> bool {
        let a = self.as_box();
        let b = outer.as_box();
        a.x_lo
            .iter()
            .zip(&b.x_lo)
            .all(|(inner, out)| inner > out)
            && a.x_hi.iter().zip(&b.x_hi).all(|(inner, out)| inner < out)
            && a.t_lo > b.t_lo
            && a.t_hi < b.t_hi
    }
}

/// The (Q, F, Q*) triple of the alternative audit, in the open-cube
/// normalization `Q = z + (-r/2, r/2)^n x (-r^2, 0)`.
///
/// `F` sits at the spatial center of the top time-face; `Q*` shares its
/// spatial footprint two layers further back in time, separated from the
/// normal boundary of `Q` by `delta * r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeTriple {
    pub z: SpaceTimePoint,
    pub r: f64,
    pub eps: f64,
    pub delta: f64,
}

impl CubeTriple {
    pub fn new(z: SpaceTimePoint, r: f64, eps: f64, delta: f64) -> Result<Self> {
        let t = CubeTriple { z, r, eps, delta };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.z.dim() as f64;
        if !(self.r > 0.0) {
            return Err(Error::invalid("r", "need r > 0"));
        }
        if !(self.eps > 0.0 && self.eps < 0.5 && self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::invalid("eps/delta", "need 0 < eps, delta < 1/2"));
        }
        if self.eps / self.delta > 1.0 / (6.0 * n).sqrt() + 1e-12 {
            return Err(Error::invalid(
                "eps/delta",
                format!(
                    "need eps/delta <= 1/sqrt(6n) = {:.6}, got {:.6}",
                    1.0 / (6.0 * n).sqrt(),
                    self.eps / self.delta
                ),
            ));
        }
        // The time separation between Q* and the bottom face always exceeds
        // delta * r for eps < 1/2, so the binding gap is the spatial one.
        let spatial_gap = 0.5 * (1.0 - self.eps) * self.r;
        if (spatial_gap - self.delta * self.r).abs() > 1e-9 * self.r {
            return Err(Error::invalid(
                "delta",
                format!(
                    "gap(Q*, normal boundary of Q) = {spatial_gap:.9} differs from delta*r = {:.9}",
                    self.delta * self.r
                ),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.z.dim()
    }

    /// Open cube Q as a box.
    pub fn q_box(&self) -> PBox {
        PBox {
            x_lo: self.z.x.iter().map(|c| c - 0.5 * self.r).collect(),
            x_hi: self.z.x.iter().map(|c| c + 0.5 * self.r).collect(),
            t_lo: self.z.t - self.r * self.r,
            t_hi: self.z.t,
        }
    }

    fn footprint(&self) -> (Vec<f64>, Vec<f64>) {
        let h = 0.5 * self.eps * self.r;
        (
            self.z.x.iter().map(|c| c - h).collect(),
            self.z.x.iter().map(|c| c + h).collect(),
        )
    }

    /// Pole region F = z + S x [-eps^2 r^2, 0).
    pub fn f_box(&self) -> PBox {
        let (x_lo, x_hi) = self.footprint();
        let e2r2 = self.eps * self.eps * self.r * self.r;
        PBox {
            x_lo,
            x_hi,
            t_lo: self.z.t - e2r2,
            t_hi: self.z.t,
        }
    }

    /// Target region Q* = z + S x [-3 eps^2 r^2, -2 eps^2 r^2].
    pub fn q_star_box(&self) -> PBox {
        let (x_lo, x_hi) = self.footprint();
        let e2r2 = self.eps * self.eps * self.r * self.r;
        PBox {
            x_lo,
            x_hi,
            t_lo: self.z.t - 3.0 * e2r2,
            t_hi: self.z.t - 2.0 * e2r2,
        }
    }

    /// Normal boundary of the open cube Q: side faces plus the bottom face.
    pub fn normal_boundary(&self) -> Vec<PBox> {
        self.q_box().past_reachable_faces()
    }
}

/// The standard triple of an m-adic cube: `F` is the spatially centered,
/// forward-most-in-time child and `Q*` the child two time layers below it,
/// giving `eps = 1/m` and `delta = (m-1)/(2m)`. Requires odd `m` with
/// `m >= 1 + 2 sqrt(6n)`.
pub fn standard_triple(q: &ParabolicCube) -> Result<CubeTriple> {
    let m = q.base();
    let n = q.dim() as f64;
    if m % 2 == 0 {
        return Err(Error::BadBase {
            m,
            reason: "standard triple needs odd m so a spatially centered child exists".into(),
        });
    }
    let min_m = 1.0 + 2.0 * (6.0 * n).sqrt();
    if (m as f64) < min_m {
        return Err(Error::BadBase {
            m,
            reason: format!("standard triple needs m >= 1 + 2 sqrt(6n) = {min_m:.3}"),
        });
    }
    CubeTriple::new(
        q.top_center(),
        q.side(),
        1.0 / m as f64,
        (m as f64 - 1.0) / (2.0 * m as f64),
    )
}

/// The m-adic children of `q` realizing the standard triple: `(F, Q*)`.
pub fn standard_triple_children(q: &ParabolicCube) -> Result<(ParabolicCube, ParabolicCube)> {
    let triple = standard_triple(q)?;
    let m = q.base() as i64;
    let n = q.dim();
    let mid = (m - 1) / 2;
    let mut jf = Vec::with_capacity(n + 1);
    for i in 0..n {
        jf.push(q.index()[i] * m + mid);
    }
    let t_base = q.index()[n] * m * m;
    let mut jq = jf.clone();
    jf.push(t_base + m * m - 1);
    jq.push(t_base + m * m - 3);
    let f = ParabolicCube::new(q.base(), q.generation() + 1, jf)?;
    let q_star = ParabolicCube::new(q.base(), q.generation() + 1, jq)?;
    debug_assert!(triple.f_box().contains(&f.center(), Closure::Closed));
    debug_assert!(triple.q_star_box().contains(&q_star.center(), Closure::Closed));
    Ok((f, q_star))
}
