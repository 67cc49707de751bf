//! Monte Carlo audits of the caloric-measure estimates: the universal
//! cylinder and ball bounds, the strong Markov decomposition, and the
//! nested-rectangle product bound.

use serde::{Deserialize, Serialize};

use crate::domain::{Obstacle, SpaceTimeDomain};
use crate::error::{Error, Result};
use crate::geometry::{ParabolicRectangle, SpaceTimePoint};
use crate::kernel::{c_n, phi, w};
use crate::walk::{estimate_caloric, estimate_caloric_streams, BoundaryTag, MCEstimate, WalkConfig};

/// Outcome of a single inequality audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundAudit {
    pub estimate: MCEstimate,
    pub bound: f64,
    /// The bound exceeds one, so it holds for any probability.
    pub trivially_true: bool,
    pub pass: bool,
}

impl BoundAudit {
    fn new(estimate: MCEstimate, bound: f64) -> Self {
        BoundAudit {
            estimate,
            bound,
            trivially_true: bound >= 1.0,
            pass: estimate.mean <= bound + 3.0 * estimate.stderr,
        }
    }
}

/// Audit of the universal cylinder estimate: the measure of the open
/// cylinder of radius `r` and half-duration `s` at a boundary point is at
/// most `W(X - X0, r^2/(2n) + s + t - t0) / phi(1, 1/(2n) + 2 s / r^2) r^n`.
pub fn check_cylinder_estimate(
    domain: &SpaceTimeDomain,
    pole: &SpaceTimePoint,
    center: &SpaceTimePoint,
    r: f64,
    s: f64,
    n_walks: u64,
    cfg: &WalkConfig,
) -> Result<BoundAudit> {
    let n = domain.dim();
    if r <= 0.0 || s <= 0.0 {
        return Err(Error::invalid("r/s", "need positive cylinder dimensions"));
    }
    let dx: Vec<f64> = pole.x.iter().zip(&center.x).map(|(a, b)| a - b).collect();
    let time_arg = r * r / (2.0 * n as f64) + s + pole.t - center.t;
    let denom = phi(n, 1.0, 1.0 / (2.0 * n as f64) + 2.0 * s / (r * r))?;
    let bound = w(&dx, time_arg) / denom * r.powi(n as i32);
    let cx = center.x.clone();
    let ct = center.t;
    let est = estimate_caloric(
        domain,
        pole,
        move |sample| {
            let d2: f64 = sample
                .point
                .x
                .iter()
                .zip(&cx)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2 < r * r && (sample.point.t - ct).abs() < s
        },
        n_walks,
        cfg,
    )?;
    Ok(BoundAudit::new(est, bound))
}

/// The explicit constant of the ball estimate, assembled from the two cases
/// of its proof: `K_n = max(C_n, (4 pi)^(-n/2)) / phi(1, 1/(2n) + 2)`.
pub fn ball_estimate_constant(n: usize) -> f64 {
    let far_space = c_n(n);
    let far_time = (4.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0);
    far_space.max(far_time) / phi(n, 1.0, 1.0 / (2.0 * n as f64) + 2.0).expect("t > 0")
}

/// Audit of the universal ball estimate: for `r` at most the parabolic
/// distance from the pole to the essential boundary, the measure of the
/// parabolic ball is at most `K_n (r / dist)^n`.
pub fn check_ball_estimate(
    domain: &SpaceTimeDomain,
    pole: &SpaceTimePoint,
    center: &SpaceTimePoint,
    r: f64,
    n_walks: u64,
    cfg: &WalkConfig,
) -> Result<BoundAudit> {
    let n = domain.dim();
    let dist = domain.essential_boundary_distance(pole);
    if !(r > 0.0 && r <= dist * (1.0 + 1e-12)) {
        return Err(Error::invalid(
            "r",
            format!("need 0 < r <= dist(pole, essential boundary) = {dist}"),
        ));
    }
    let bound = ball_estimate_constant(n) * (r / dist).powi(n as i32);
    let cx = center.x.clone();
    let ct = center.t;
    let est = estimate_caloric(
        domain,
        pole,
        move |sample| {
            let d2: f64 = sample
                .point
                .x
                .iter()
                .zip(&cx)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2 < r * r && (sample.point.t - ct).abs() < r * r
        },
        n_walks,
        cfg,
    )?;
    Ok(BoundAudit::new(est, bound))
}

/// Residual of the strong Markov decomposition across nested domains.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovResidual {
    pub direct: MCEstimate,
    /// Walks stopped on the shared boundary that hit the target.
    pub boundary_term: f64,
    /// Continued walks from exits interior to the outer domain.
    pub continuation_term: f64,
    pub continued_walks: u64,
    pub residual: f64,
    pub sigma: f64,
    pub pass: bool,
}

/// Check the strong Markov identity between `inner` and `outer`, where the
/// inner domain must extend the outer domain's obstacle list (same
/// container). Walks in the inner domain that stop on an obstacle absent
/// from the outer domain are continued there as fresh walks.
pub fn strong_markov_residual<F>(
    inner: &SpaceTimeDomain,
    outer: &SpaceTimeDomain,
    pole: &SpaceTimePoint,
    target: F,
    n_walks: u64,
    cfg: &WalkConfig,
) -> Result<MarkovResidual>
where
    F: Fn(&crate::walk::ExitSample) -> bool + Sync,
{
    let shared = outer.obstacles.len();
    if shared > inner.obstacles.len() {
        return Err(Error::NotNested(
            "inner domain must carry at least the outer obstacles".into(),
        ));
    }
    for (a, b) in inner.obstacles.iter().zip(&outer.obstacles) {
        if !same_obstacle(a, b) {
            return Err(Error::NotNested(
                "inner obstacle list must extend the outer list in order".into(),
            ));
        }
    }
    let direct = estimate_caloric(outer, pole, &target, n_walks, cfg)?;
    use rayon::prelude::*;
    let (boundary_hits, cont_hits, continued) = (0..n_walks)
        .into_par_iter()
        .map(|i| -> Result<(u64, u64, u64)> {
            let s = crate::walk::simulate_exit_stream(inner, pole, cfg, i)?;
            let interior_exit = match s.tag {
                BoundaryTag::Obstacle(idx) => idx >= shared,
                _ => false,
            };
            if !interior_exit {
                return Ok((u64::from(target(&s)), 0, 0));
            }
            // continue inside the outer domain on a disjoint stream block
            let cont = crate::walk::simulate_exit_stream(outer, &s.point, cfg, n_walks + i)?;
            Ok((0, u64::from(target(&cont)), 1))
        })
        .try_reduce(
            || (0, 0, 0),
            |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)),
        )?;
    let boundary_term = boundary_hits as f64 / n_walks as f64;
    let continuation_term = cont_hits as f64 / n_walks as f64;
    let combined = boundary_term + continuation_term;
    let combined_se = (combined * (1.0 - combined) / n_walks as f64).sqrt();
    let sigma = (direct.stderr * direct.stderr + combined_se * combined_se).sqrt();
    let residual = (direct.mean - combined).abs();
    Ok(MarkovResidual {
        direct,
        boundary_term,
        continuation_term,
        continued_walks: continued,
        residual,
        sigma,
        pass: residual <= 3.0 * sigma,
    })
}

fn same_obstacle(a: &Obstacle, b: &Obstacle) -> bool {
    match (a, b) {
        (Obstacle::Rect(x), Obstacle::Rect(y)) => x == y,
        (Obstacle::Grid(x), Obstacle::Grid(y)) => {
            x.root() == y.root()
                && x.depth() == y.depth()
                && x.occupied().eq(y.occupied())
        }
        _ => false,
    }
}

/// Audit record for the nested-rectangle product bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedRectangleAudit {
    pub lhs: MCEstimate,
    pub first_factor: MCEstimate,
    /// One supremum per remaining rectangle, estimated over a pole grid.
    pub sup_factors: Vec<f64>,
    pub grid_points_per_face_axis: usize,
    pub poles_used: Vec<usize>,
    pub bound: f64,
    pub sigma: f64,
    pub pass: bool,
}

/// Check that the measure of exits inside the innermost rectangle is at most
/// the product of surface-hit measures along the chain, with each supremum
/// taken over a grid of poles on the previous surface.
pub fn nested_rectangle_bound(
    domain: &SpaceTimeDomain,
    rects: &[ParabolicRectangle],
    pole: &SpaceTimePoint,
    n_walks: u64,
    sup_walks: u64,
    grid_per_axis: usize,
    cfg: &WalkConfig,
) -> Result<NestedRectangleAudit> {
    if rects.is_empty() {
        return Err(Error::EmptySet("nested_rectangle_bound"));
    }
    for w in rects.windows(2) {
        if !w[1].strictly_inside(&w[0]) {
            return Err(Error::NotNested(
                "rectangles must be strictly nested outermost-first".into(),
            ));
        }
    }
    if rects[0].contains(pole, crate::geometry::Closure::Closed) {
        return Err(Error::invalid("pole", "pole must lie outside the chain"));
    }
    let k = rects.len();
    let inner_box = rects[k - 1].as_box();
    // LHS: exits of the base domain landing inside the innermost rectangle
    let lhs = estimate_caloric(
        domain,
        pole,
        |s| inner_box.contains(&s.point, crate::geometry::Closure::Closed),
        n_walks,
        cfg,
    )?;
    // first factor: hit the outermost surface in the carved domain
    let carved = |rect: &ParabolicRectangle| -> SpaceTimeDomain {
        let mut obstacles = domain.obstacles.clone();
        obstacles.push(Obstacle::Rect(rect.clone()));
        SpaceTimeDomain {
            container: domain.container.clone(),
            obstacles,
        }
    };
    let hit_added = |d: &SpaceTimeDomain| {
        let added = d.obstacles.len() - 1;
        move |s: &crate::walk::ExitSample| s.tag == BoundaryTag::Obstacle(added)
    };
    let d1 = carved(&rects[0]);
    let first_factor = estimate_caloric(&d1, pole, hit_added(&d1), n_walks, cfg)?;
    // supremum factors over pole grids on each surface
    let mut sup_factors = Vec::new();
    let mut poles_used = Vec::new();
    let mut rel_var = if first_factor.mean > 0.0 {
        (first_factor.stderr / first_factor.mean).powi(2)
    } else {
        0.0
    };
    let mut stream_base = 2 * n_walks;
    for i in 1..k {
        let d_next = carved(&rects[i]);
        let target = hit_added(&d_next);
        let mut sup = 0.0_f64;
        let mut sup_se = 0.0_f64;
        let mut used = 0usize;
        for grid_pole in surface_grid(&rects[i - 1], grid_per_axis) {
            if !d_next.contains(&grid_pole) {
                continue;
            }
            used += 1;
            let est = estimate_caloric_streams(
                &d_next,
                &grid_pole,
                &target,
                sup_walks,
                cfg,
                stream_base,
            )?;
            stream_base += sup_walks;
            if est.mean > sup {
                sup = est.mean;
                sup_se = est.stderr;
            }
        }
        if used == 0 {
            return Err(Error::invalid("grid", "no admissible poles on a surface"));
        }
        if sup > 0.0 {
            rel_var += (sup_se / sup).powi(2);
        }
        sup_factors.push(sup);
        poles_used.push(used);
    }
    let product: f64 = first_factor.mean * sup_factors.iter().product::<f64>();
    let prod_se = product * rel_var.sqrt();
    let sigma = (lhs.stderr * lhs.stderr + prod_se * prod_se).sqrt();
    let pass = lhs.mean <= product + 3.0 * sigma;
    Ok(NestedRectangleAudit {
        lhs,
        first_factor,
        sup_factors,
        grid_points_per_face_axis: grid_per_axis,
        poles_used,
        bound: product,
        sigma,
        pass,
    })
}

/// Grid of points on the side and top faces of a rectangle.
fn surface_grid(rect: &ParabolicRectangle, per_axis: usize) -> Vec<SpaceTimePoint> {
    let b = rect.as_box();
    let n = b.dim();
    let mut out = Vec::new();
    let ticks = |lo: f64, hi: f64| -> Vec<f64> {
        (0..per_axis)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64)
            .collect()
    };
    // side faces: fix one spatial coordinate, grid the rest and time
    for axis in 0..n {
        for &v in &[b.x_lo[axis], b.x_hi[axis]] {
            let mut frames: Vec<Vec<f64>> = vec![Vec::new()];
            for i in 0..n {
                let vals = if i == axis {
                    vec![v]
                } else {
                    ticks(b.x_lo[i], b.x_hi[i])
                };
                let mut next = Vec::new();
                for f in &frames {
                    for &val in &vals {
                        let mut g = f.clone();
                        g.push(val);
                        next.push(g);
                    }
                }
                frames = next;
            }
            for f in frames {
                for &t in &ticks(b.t_lo, b.t_hi) {
                    out.push(SpaceTimePoint { x: f.clone(), t });
                }
            }
        }
    }
    // top time-face
    let mut frames: Vec<Vec<f64>> = vec![Vec::new()];
    for i in 0..n {
        let vals = ticks(b.x_lo[i], b.x_hi[i]);
        let mut next = Vec::new();
        for f in &frames {
            for &val in &vals {
                let mut g = f.clone();
                g.push(val);
                next.push(g);
            }
        }
        frames = next;
    }
    for f in frames {
        out.push(SpaceTimePoint { x: f, t: b.t_hi });
    }
    out
}

/// Cylinder projection cross-check: on an infinite cylinder, compare the
/// caloric estimate of `A x R` with the walk-on-spheres harmonic estimate of
/// `A` on the base.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionAudit {
    pub caloric: MCEstimate,
    pub harmonic: MCEstimate,
    pub difference: f64,
    pub sigma: f64,
    pub pass: bool,
}

pub fn check_cylinder_projection<F>(
    base: &crate::wos::BaseDomain,
    x: &[f64],
    spatial_target: F,
    n_walks: u64,
    seed: u64,
) -> Result<ProjectionAudit>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let container = match base {
        crate::wos::BaseDomain::Box { x_lo, x_hi } => {
            crate::domain::Container::infinite_box(x_lo.clone(), x_hi.clone())?
        }
        crate::wos::BaseDomain::Ball { center, radius } => {
            crate::domain::Container::infinite_ball(center.clone(), *radius)?
        }
    };
    let domain = SpaceTimeDomain::without_obstacles(container);
    let cfg = WalkConfig::default_for(&domain, seed);
    let pole = SpaceTimePoint::new(x.to_vec(), 0.0)?;
    let caloric = estimate_caloric(&domain, &pole, |s| spatial_target(&s.point.x), n_walks, &cfg)?;
    let harmonic = crate::wos::walk_on_spheres(
        base,
        x,
        &spatial_target,
        n_walks,
        seed.wrapping_add(1),
        1e-9,
    )?;
    let sigma = (caloric.stderr.powi(2) + harmonic.stderr.powi(2)).sqrt();
    let difference = (caloric.mean - harmonic.mean).abs();
    Ok(ProjectionAudit {
        caloric,
        harmonic,
        difference,
        sigma,
        pass: difference <= 3.0 * sigma.max(1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Container;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t).unwrap()
    }

    fn box_domain(n: usize) -> SpaceTimeDomain {
        SpaceTimeDomain::without_obstacles(
            Container::spatial_box(vec![-1.0; n], vec![1.0; n], 0.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn cylinder_estimate_far_pole_passes_with_slack() {
        let d = box_domain(1);
        let cfg = WalkConfig::default_for(&d, 1);
        let pole = pt(&[0.0], 0.9);
        let center = pt(&[0.0], 0.0);
        let audit =
            check_cylinder_estimate(&d, &pole, &center, 0.1, 0.01, 20_000, &cfg).unwrap();
        assert!(audit.pass);
        assert!(!audit.trivially_true);
        assert!(audit.estimate.mean < audit.bound);
    }

    #[test]
    fn cylinder_estimate_trivial_when_r_huge() {
        let d = box_domain(1);
        let cfg = WalkConfig::default_for(&d, 1);
        let pole = pt(&[0.0], 0.9);
        let center = pt(&[0.0], 0.0);
        let audit = check_cylinder_estimate(&d, &pole, &center, 50.0, 1.0, 1_000, &cfg).unwrap();
        assert!(audit.trivially_true && audit.pass);
    }

    #[test]
    fn cylinder_estimate_future_target_is_zero() {
        // cylinder strictly in the pole's future: no exits land there
        let d = box_domain(1);
        let cfg = WalkConfig::default_for(&d, 1);
        let pole = pt(&[0.5], 0.2);
        let center = pt(&[-0.5], 0.9);
        let audit = check_cylinder_estimate(&d, &pole, &center, 0.2, 0.01, 5_000, &cfg).unwrap();
        assert_eq!(audit.estimate.mean, 0.0);
        assert!(audit.pass);
    }

    #[test]
    fn ball_estimate_small_radius() {
        let d = box_domain(1);
        let cfg = WalkConfig::default_for(&d, 2);
        let pole = pt(&[0.0], 0.9);
        let dist = d.essential_boundary_distance(&pole);
        let center = pt(&[0.0], 0.0);
        let audit =
            check_ball_estimate(&d, &pole, &center, dist / 10.0, 20_000, &cfg).unwrap();
        assert!(audit.pass);
        // r above dist violates the precondition
        assert!(check_ball_estimate(&d, &pole, &center, dist * 1.5, 100, &cfg).is_err());
        // r = dist is trivially passing for n=1 (K_1 > 1)
        let triv = check_ball_estimate(&d, &pole, &center, dist, 1_000, &cfg).unwrap();
        assert!(triv.trivially_true);
    }

    #[test]
    fn markov_residual_zero_for_identical_domains() {
        let d = box_domain(1);
        let cfg = WalkConfig::default_for(&d, 3);
        let pole = pt(&[0.0], 0.9);
        let r = strong_markov_residual(
            &d,
            &d,
            &pole,
            |s| s.tag == BoundaryTag::Bottom,
            5_000,
            &cfg,
        )
        .unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.continued_walks, 0);
        assert!(r.pass);
    }

    #[test]
    fn markov_residual_full_target_is_exactly_consistent() {
        // target with measure one: both decompositions count every walk
        let outer = box_domain(1);
        let slab = ParabolicRectangle::from_bounds(vec![-0.5], vec![0.5], 0.4, 0.45).unwrap();
        let inner = SpaceTimeDomain::new(
            outer.container.clone(),
            vec![Obstacle::Rect(slab)],
        )
        .unwrap();
        let cfg = WalkConfig::default_for(&inner, 4);
        let pole = pt(&[0.0], 0.9);
        let r = strong_markov_residual(&inner, &outer, &pole, |_| true, 3_000, &cfg).unwrap();
        assert_eq!(r.direct.mean, 1.0);
        assert_eq!(r.boundary_term + r.continuation_term, 1.0);
        assert!(r.continued_walks > 0);
    }

    #[test]
    fn nested_rectangles_reject_bad_chains() {
        let d = box_domain(1);
        let cfg = WalkConfig::default_for(&d, 5);
        let h1 = ParabolicRectangle::from_bounds(vec![-0.5], vec![0.5], 0.2, 0.5).unwrap();
        let h2 = ParabolicRectangle::from_bounds(vec![-0.6], vec![0.4], 0.25, 0.45).unwrap();
        let pole = pt(&[0.0], 0.9);
        assert!(nested_rectangle_bound(&d, &[h1.clone(), h2], &pole, 100, 100, 2, &cfg).is_err());
        // pole inside the chain rejected
        let pole_in = pt(&[0.0], 0.3);
        assert!(nested_rectangle_bound(&d, &[h1], &pole_in, 100, 100, 2, &cfg).is_err());
    }

    #[test]
    fn nested_rectangle_future_chain_has_zero_lhs() {
        // innermost rectangle strictly in the pole's future
        let c = Container::spatial_box(vec![-1.0], vec![1.0], 0.0, 1.0).unwrap();
        let obs = ParabolicRectangle::from_bounds(vec![-0.05], vec![0.05], 0.62, 0.64).unwrap();
        let d = SpaceTimeDomain::new(c, vec![Obstacle::Rect(obs)]).unwrap();
        let cfg = WalkConfig::default_for(&d, 6);
        let h1 = ParabolicRectangle::from_bounds(vec![-0.3], vec![0.3], 0.55, 0.75).unwrap();
        let pole = pt(&[0.0], 0.2);
        let audit = nested_rectangle_bound(&d, &[h1], &pole, 2_000, 1_000, 2, &cfg).unwrap();
        assert_eq!(audit.lhs.mean, 0.0);
        assert!(audit.pass);
    }

    #[test]
    fn projection_interval_matches_linear_values() {
        let base = crate::wos::BaseDomain::Box {
            x_lo: vec![0.0],
            x_hi: vec![1.0],
        };
        let audit =
            check_cylinder_projection(&base, &[0.3], |b| b[0] > 0.5, 50_000, 12).unwrap();
        assert!(audit.pass, "difference {} sigma {}", audit.difference, audit.sigma);
        assert!((audit.harmonic.mean - 0.3).abs() <= 3.0 * audit.harmonic.stderr.max(1e-9));
        assert!((audit.caloric.mean - 0.3).abs() <= 3.0 * audit.caloric.stderr);
    }
}
