//! Bounded space-time containers minus closed rectangle obstacles: the
//! domains the exit simulations run in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PBox, ParabolicCube, ParabolicRectangle, SpaceTimePoint};
use crate::grid::GridSet;

/// Spatial cross-section of a container.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Spatial {
    Box { x_lo: Vec<f64>, x_hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Spatial {
    pub fn dim(&self) -> usize {
        match self {
            Spatial::Box { x_lo, .. } => x_lo.len(),
            Spatial::Ball { center, .. } => center.len(),
        }
    }

    fn contains_open(&self, x: &[f64]) -> bool {
        match self {
            Spatial::Box { x_lo, x_hi } => x
                .iter()
                .zip(x_lo.iter().zip(x_hi))
                .all(|(v, (lo, hi))| lo < v && v < hi),
            Spatial::Ball { center, radius } => {
                let d2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum();
                d2 < radius * radius
            }
        }
    }

    /// Euclidean distance to the spatial boundary from an interior point.
    fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Spatial::Box { x_lo, x_hi } => x
                .iter()
                .zip(x_lo.iter().zip(x_hi))
                .map(|(v, (lo, hi))| (v - lo).min(hi - v))
                .fold(f64::INFINITY, f64::min),
            Spatial::Ball { center, radius } => {
                let d: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                radius - d
            }
        }
    }

    /// Smallest geometric feature length.
    fn feature(&self) -> f64 {
        match self {
            Spatial::Box { x_lo, x_hi } => x_lo
                .iter()
                .zip(x_hi)
                .map(|(lo, hi)| hi - lo)
                .fold(f64::INFINITY, f64::min),
            Spatial::Ball { radius, .. } => *radius,
        }
    }
}

/// Time extent of a container.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "time", rename_all = "snake_case")]
pub enum TimeExtent {
    Interval { t_lo: f64, t_hi: f64 },
    /// Infinite cylinder.
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Container {
    pub spatial: Spatial,
    pub time: TimeExtent,
}

impl Container {
    pub fn spatial_box(x_lo: Vec<f64>, x_hi: Vec<f64>, t_lo: f64, t_hi: f64) -> Result<Self> {
        if x_lo.len() != x_hi.len() || x_lo.is_empty() {
            return Err(Error::invalid("container", "bad spatial bounds"));
        }
        if x_lo.iter().zip(&x_hi).any(|(lo, hi)| hi <= lo) || t_hi <= t_lo {
            return Err(Error::invalid("container", "empty container"));
        }
        Ok(Container {
            spatial: Spatial::Box { x_lo, x_hi },
            time: TimeExtent::Interval { t_lo, t_hi },
        })
    }

    /// Open parabolic cube `z + (-r/2, r/2)^n x (-r^2, 0)`.
    pub fn parabolic_cube(z: &SpaceTimePoint, r: f64) -> Result<Self> {
        Container::spatial_box(
            z.x.iter().map(|c| c - 0.5 * r).collect(),
            z.x.iter().map(|c| c + 0.5 * r).collect(),
            z.t - r * r,
            z.t,
        )
    }

    /// Interior of an m-adic cube.
    pub fn of_cube(q: &ParabolicCube) -> Result<Self> {
        Container::parabolic_cube(&q.top_center(), q.side())
    }

    pub fn infinite_box(x_lo: Vec<f64>, x_hi: Vec<f64>) -> Result<Self> {
        if x_lo.len() != x_hi.len()
            || x_lo.is_empty()
            || x_lo.iter().zip(&x_hi).any(|(lo, hi)| hi <= lo)
        {
            return Err(Error::invalid("container", "bad spatial bounds"));
        }
        Ok(Container {
            spatial: Spatial::Box { x_lo, x_hi },
            time: TimeExtent::All,
        })
    }

    pub fn infinite_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || radius <= 0.0 {
            return Err(Error::invalid("container", "bad ball"));
        }
        Ok(Container {
            spatial: Spatial::Ball { center, radius },
            time: TimeExtent::All,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64, t_lo: f64, t_hi: f64) -> Result<Self> {
        if center.is_empty() || radius <= 0.0 || t_hi <= t_lo {
            return Err(Error::invalid("container", "bad ball container"));
        }
        Ok(Container {
            spatial: Spatial::Ball { center, radius },
            time: TimeExtent::Interval { t_lo, t_hi },
        })
    }

    pub fn dim(&self) -> usize {
        self.spatial.dim()
    }

    pub fn contains_open(&self, p: &SpaceTimePoint) -> bool {
        let time_ok = match self.time {
            TimeExtent::Interval { t_lo, t_hi } => t_lo < p.t && p.t < t_hi,
            TimeExtent::All => true,
        };
        time_ok && self.spatial.contains_open(&p.x)
    }
}

/// Obstacle: a closed rectangle or a discretized closed set.
#[derive(Debug, Clone)]
pub enum Obstacle {
    Rect(ParabolicRectangle),
    Grid(GridSet),
}

impl Obstacle {
    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        match self {
            Obstacle::Rect(r) => r.contains(p, crate::geometry::Closure::Closed),
            Obstacle::Grid(g) => g.point_in_set(&p.x, p.t),
        }
    }

    /// Bounding box.
    pub fn bbox(&self) -> PBox {
        match self {
            Obstacle::Rect(r) => r.as_box(),
            Obstacle::Grid(g) => g.root().as_box(),
        }
    }

    /// Smallest feature length (the time side counts in length units).
    pub fn feature(&self) -> f64 {
        match self {
            Obstacle::Rect(r) => {
                let b = r.as_box();
                let spatial = b
                    .x_lo
                    .iter()
                    .zip(&b.x_hi)
                    .map(|(lo, hi)| hi - lo)
                    .fold(f64::INFINITY, f64::min);
                spatial.min((b.t_hi - b.t_lo).sqrt())
            }
            Obstacle::Grid(g) => {
                (g.base() as f64).powi(-(g.root().generation() + g.depth() as i32))
            }
        }
    }

    /// Faces a backwards-in-time walker can be absorbed on: side faces plus
    /// the top time-face (the bottom face is unreachable from outside).
    pub fn absorbing_faces(&self) -> Vec<PBox> {
        let face_of = |b: &PBox| -> Vec<PBox> {
            let n = b.dim();
            let mut faces = Vec::with_capacity(2 * n + 1);
            for i in 0..n {
                for &v in &[b.x_lo[i], b.x_hi[i]] {
                    let mut f = b.clone();
                    f.x_lo[i] = v;
                    f.x_hi[i] = v;
                    faces.push(f);
                }
            }
            let mut top = b.clone();
            top.t_lo = top.t_hi;
            faces.push(top);
            faces
        };
        match self {
            Obstacle::Rect(r) => face_of(&r.as_box()),
            Obstacle::Grid(g) => g
                .occupied()
                .map(|rel| g.cube_at(g.depth(), rel).as_box())
                .flat_map(|b| face_of(&b))
                .collect(),
        }
    }
}

/// A container minus a finite union of closed obstacles.
#[derive(Debug, Clone)]
pub struct SpaceTimeDomain {
    pub container: Container,
    pub obstacles: Vec<Obstacle>,
}

impl SpaceTimeDomain {
    pub fn new(container: Container, obstacles: Vec<Obstacle>) -> Result<Self> {
        for obs in &obstacles {
            let d = match obs {
                Obstacle::Rect(r) => r.dim(),
                Obstacle::Grid(g) => g.dim(),
            };
            if d != container.dim() {
                return Err(Error::DimensionMismatch(d, container.dim()));
            }
        }
        Ok(SpaceTimeDomain {
            container,
            obstacles,
        })
    }

    pub fn without_obstacles(container: Container) -> Self {
        SpaceTimeDomain {
            container,
            obstacles: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.container.dim()
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        self.container.contains_open(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Smallest feature length over container and obstacles; sets the
    /// default step size.
    pub fn feature(&self) -> f64 {
        let mut f = self.spatial_feature_of_container();
        for o in &self.obstacles {
            f = f.min(o.feature());
        }
        f
    }

    fn spatial_feature_of_container(&self) -> f64 {
        let mut f = self.container.spatial.feature();
        if let TimeExtent::Interval { t_lo, t_hi } = self.container.time {
            f = f.min((t_hi - t_lo).sqrt());
        }
        f
    }

    /// Parabolic distance from an interior point to the essential boundary:
    /// container side faces and bottom, obstacle side and top faces. The
    /// container's top time-face is singular and excluded.
    pub fn essential_boundary_distance(&self, p: &SpaceTimePoint) -> f64 {
        let mut d = self.container.spatial.boundary_distance(&p.x);
        if let TimeExtent::Interval { t_lo, .. } = self.container.time {
            d = d.min((p.t - t_lo).sqrt());
        }
        let pb = PBox::point(p);
        for o in &self.obstacles {
            for face in o.absorbing_faces() {
                d = d.min(pb.gap_to(&face));
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t).unwrap()
    }

    #[test]
    fn membership() {
        let c = Container::spatial_box(vec![-1.0], vec![1.0], 0.0, 1.0).unwrap();
        let obs = Obstacle::Rect(
            ParabolicRectangle::from_bounds(vec![-0.2], vec![0.2], 0.4, 0.5).unwrap(),
        );
        let d = SpaceTimeDomain::new(c, vec![obs]).unwrap();
        assert!(d.contains(&pt(&[0.5], 0.5)));
        assert!(!d.contains(&pt(&[0.0], 0.45)));
        assert!(!d.contains(&pt(&[0.0], 0.4))); // closed obstacle face
        assert!(!d.contains(&pt(&[1.0], 0.5))); // open container boundary
        assert!(!d.contains(&pt(&[0.5], 0.0)));
    }

    #[test]
    fn essential_distance_uses_obstacle_top_not_bottom() {
        let c = Container::spatial_box(vec![-1.0], vec![1.0], 0.0, 1.0).unwrap();
        let obs = Obstacle::Rect(
            ParabolicRectangle::from_bounds(vec![-0.5], vec![0.5], 0.3, 0.5).unwrap(),
        );
        let d = SpaceTimeDomain::new(c, vec![obs]).unwrap();
        // pole above the slab: the slab top at t=0.5 is what it can hit
        let pole = pt(&[0.0], 0.9);
        let expect = (0.9_f64 - 0.5).sqrt(); // sqrt(0.4) < spatial 1, bottom sqrt(0.9)
        assert!((d.essential_boundary_distance(&pole) - expect).abs() < 1e-12);
    }

    #[test]
    fn feature_sizes() {
        let c = Container::spatial_box(vec![-1.0], vec![1.0], 0.0, 1.0).unwrap();
        let d = SpaceTimeDomain::without_obstacles(c);
        assert!((d.feature() - 1.0).abs() < 1e-15); // sqrt of duration
        let cyl = Container::infinite_box(vec![0.0], vec![1.0]).unwrap();
        let d2 = SpaceTimeDomain::without_obstacles(cyl);
        assert!((d2.feature() - 1.0).abs() < 1e-15);
    }
}
