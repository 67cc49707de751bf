//! Monte Carlo caloric measure: Euler walks run backwards in time until the
//! first contact with the boundary of the domain.
//!
//! Each walk draws from its own counter-mode ChaCha stream keyed by the walk
//! index, so estimates are bit-identical for a fixed (seed, N, dt) no matter
//! how the work is scheduled. Container box faces optionally get a Brownian
//! bridge crossing test per step, which removes the O(sqrt(dt)) bias from
//! excursions between sampled points; straddled crossings are located on the
//! violated constraint directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Obstacle, SpaceTimeDomain, Spatial, TimeExtent};
use crate::error::{Error, Result};
use crate::geometry::SpaceTimePoint;

/// Step-size, seeding, and boundary-location controls for the walks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WalkConfig {
    pub dt: f64,
    pub seed: u64,
    /// Length tolerance for locating crossings of grid obstacles.
    pub bisection_tol: f64,
    pub max_steps: u32,
    /// Brownian-bridge crossing test for container box faces.
    pub bridge_correction: bool,
}

impl WalkConfig {
    /// Default policy: dt = feature^2 / 400, tolerance = feature / 1000.
    pub fn default_for(domain: &SpaceTimeDomain, seed: u64) -> Self {
        let feature = domain.feature();
        WalkConfig {
            dt: feature * feature / 400.0,
            seed,
            bisection_tol: feature / 1000.0,
            max_steps: 20_000_000,
            bridge_correction: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", "need dt > 0"));
        }
        if !(self.bisection_tol > 0.0) {
            return Err(Error::invalid("bisection_tol", "need tol > 0"));
        }
        Ok(())
    }
}

/// Which part of the boundary absorbed the walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Container box face: axis index and whether it was the upper face.
    Side { axis: usize, upper: bool },
    /// Container ball surface.
    BallSide,
    /// Container bottom time-face.
    Bottom,
    /// Obstacle by index in the domain's obstacle list.
    Obstacle(usize),
}

/// One absorbed walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExitSample {
    pub point: SpaceTimePoint,
    pub tag: BoundaryTag,
    pub steps: u32,
}

/// Bernoulli Monte Carlo estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

impl MCEstimate {
    pub fn from_hits(hits: u64, n: u64, seed: u64) -> Self {
        let mean = hits as f64 / n as f64;
        MCEstimate {
            mean,
            stderr: (mean * (1.0 - mean) / n as f64).sqrt(),
            n,
            seed,
        }
    }
}

struct Candidate {
    tau: f64,
    tag: BoundaryTag,
}

/// Simulate one exit with the stream derived from (cfg.seed, stream).
pub fn simulate_exit_stream(
    domain: &SpaceTimeDomain,
    pole: &SpaceTimePoint,
    cfg: &WalkConfig,
    stream: u64,
) -> Result<ExitSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    walk(domain, pole, cfg, &mut rng)
}

/// Simulate one exit on stream 0.
pub fn simulate_exit(
    domain: &SpaceTimeDomain,
    pole: &SpaceTimePoint,
    cfg: &WalkConfig,
) -> Result<ExitSample> {
    simulate_exit_stream(domain, pole, cfg, 0)
}

fn walk(
    domain: &SpaceTimeDomain,
    pole: &SpaceTimePoint,
    cfg: &WalkConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ExitSample> {
    cfg.validate()?;
    if pole.dim() != domain.dim() {
        return Err(Error::DimensionMismatch(pole.dim(), domain.dim()));
    }
    if !domain.contains(pole) {
        return Err(Error::PoleOutsideDomain(pole.x.clone()));
    }
    let n = domain.dim();
    let sqrt_dt = cfg.dt.sqrt();
    let mut x = pole.x.clone();
    let mut t = pole.t;
    let mut x_next = vec![0.0; n];
    let mut steps: u32 = 0;
    loop {
        if steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded(cfg.max_steps));
        }
        steps += 1;
        for i in 0..n {
            let xi: f64 = rng.sample(StandardNormal);
            x_next[i] = x[i] + sqrt_dt * xi;
        }
        let t_next = t - cfg.dt;

        let mut best: Option<Candidate> = None;
        let push = |c: Candidate, best: &mut Option<Candidate>| {
            if best.as_ref().map_or(true, |b| c.tau < b.tau) {
                *best = Some(c);
            }
        };

        // container bottom
        if let TimeExtent::Interval { t_lo, .. } = domain.container.time {
            if t_next <= t_lo {
                push(
                    Candidate {
                        tau: (t - t_lo) / cfg.dt,
                        tag: BoundaryTag::Bottom,
                    },
                    &mut best,
                );
            }
        }

        // container spatial boundary
        match &domain.container.spatial {
            Spatial::Box { x_lo, x_hi } => {
                let mut bridge_faces: Vec<(usize, bool, f64)> = Vec::new();
                for i in 0..n {
                    for (b, upper) in [(x_lo[i], false), (x_hi[i], true)] {
                        let d0 = b - x[i];
                        let d1 = b - x_next[i];
                        if d0.signum() != d1.signum() && d1 != 0.0 {
                            // straddled: exact linear crossing
                            push(
                                Candidate {
                                    tau: d0 / (x_next[i] - x[i]),
                                    tag: BoundaryTag::Side { axis: i, upper },
                                },
                                &mut best,
                            );
                        } else if cfg.bridge_correction {
                            let prod = d0 * d1;
                            // skip faces too far away for any crossing mass
                            if prod < 20.0 * cfg.dt {
                                let p = (-2.0 * prod / cfg.dt).exp();
                                if p > 1e-18 {
                                    bridge_faces.push((i, upper, p));
                                }
                            }
                        }
                    }
                }
                if !bridge_faces.is_empty() {
                    let survive: f64 = bridge_faces.iter().map(|(_, _, p)| 1.0 - p).product();
                    let u: f64 = rng.random();
                    if u > survive {
                        // a face was touched between the sampled points;
                        // attribute it proportionally and place the crossing
                        // uniformly along the segment
                        let total: f64 = bridge_faces.iter().map(|(_, _, p)| p).sum();
                        let mut pick: f64 = rng.random::<f64>() * total;
                        let mut chosen = bridge_faces[bridge_faces.len() - 1];
                        for f in &bridge_faces {
                            if pick < f.2 {
                                chosen = *f;
                                break;
                            }
                            pick -= f.2;
                        }
                        let tau: f64 = rng.random();
                        push(
                            Candidate {
                                tau,
                                tag: BoundaryTag::Side {
                                    axis: chosen.0,
                                    upper: chosen.1,
                                },
                            },
                            &mut best,
                        );
                    }
                }
            }
            Spatial::Ball { center, radius } => {
                let d2: f64 = x_next
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum();
                if d2 >= radius * radius {
                    // earliest root of |x + tau dx - c|^2 = R^2
                    let mut a = 0.0;
                    let mut bq = 0.0;
                    let mut cq = -radius * radius;
                    for i in 0..n {
                        let p = x[i] - center[i];
                        let d = x_next[i] - x[i];
                        a += d * d;
                        bq += 2.0 * p * d;
                        cq += p * p;
                    }
                    let disc = (bq * bq - 4.0 * a * cq).max(0.0).sqrt();
                    let tau = (-bq + disc) / (2.0 * a);
                    push(
                        Candidate {
                            tau: tau.clamp(0.0, 1.0),
                            tag: BoundaryTag::BallSide,
                        },
                        &mut best,
                    );
                }
            }
        }

        // obstacles
        for (idx, obs) in domain.obstacles.iter().enumerate() {
            match obs {
                Obstacle::Rect(rect) => {
                    if let Some(tau) = segment_box_entry(&x, t, &x_next, t_next, &rect.as_box()) {
                        push(
                            Candidate {
                                tau,
                                tag: BoundaryTag::Obstacle(idx),
                            },
                            &mut best,
                        );
                    }
                }
                Obstacle::Grid(grid) => {
                    if let Some(tau) =
                        segment_grid_entry(&x, t, &x_next, t_next, grid, cfg.bisection_tol)
                    {
                        push(
                            Candidate {
                                tau,
                                tag: BoundaryTag::Obstacle(idx),
                            },
                            &mut best,
                        );
                    }
                }
            }
        }

        if let Some(hit) = best {
            let tau = hit.tau.clamp(0.0, 1.0);
            let mut ex: Vec<f64> = (0..n).map(|i| x[i] + tau * (x_next[i] - x[i])).collect();
            let mut et = t - tau * cfg.dt;
            // snap onto the constraint that absorbed the walk
            match hit.tag {
                BoundaryTag::Side { axis, upper } => {
                    if let Spatial::Box { x_lo, x_hi } = &domain.container.spatial {
                        ex[axis] = if upper { x_hi[axis] } else { x_lo[axis] };
                    }
                }
                BoundaryTag::Bottom => {
                    if let TimeExtent::Interval { t_lo, .. } = domain.container.time {
                        et = t_lo;
                    }
                }
                BoundaryTag::BallSide => {
                    if let Spatial::Ball { center, radius } = &domain.container.spatial {
                        let norm: f64 = ex
                            .iter()
                            .zip(center)
                            .map(|(v, c)| (v - c) * (v - c))
                            .sum::<f64>()
                            .sqrt();
                        if norm > 0.0 {
                            for i in 0..n {
                                ex[i] = center[i] + (ex[i] - center[i]) * radius / norm;
                            }
                        }
                    }
                }
                BoundaryTag::Obstacle(_) => {}
            }
            return Ok(ExitSample {
                point: SpaceTimePoint { x: ex, t: et },
                tag: hit.tag,
                steps,
            });
        }

        std::mem::swap(&mut x, &mut x_next);
        t = t_next;
    }
}

/// Entry parameter of the segment into a closed box (slab clipping over the
/// n spatial axes and the time axis), or None if it stays outside.
fn segment_box_entry(
    x: &[f64],
    t: f64,
    x_next: &[f64],
    t_next: f64,
    rect: &crate::geometry::PBox,
) -> Option<f64> {
    let mut enter = 0.0_f64;
    let mut exit = 1.0_f64;
    let mut clip = |p0: f64, p1: f64, lo: f64, hi: f64| -> bool {
        let d = p1 - p0;
        if d.abs() < f64::MIN_POSITIVE {
            return p0 >= lo && p0 <= hi;
        }
        let mut a = (lo - p0) / d;
        let mut b = (hi - p0) / d;
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        enter = enter.max(a);
        exit = exit.min(b);
        enter <= exit
    };
    for i in 0..x.len() {
        if !clip(x[i], x_next[i], rect.x_lo[i], rect.x_hi[i]) {
            return None;
        }
    }
    if !clip(t, t_next, rect.t_lo, rect.t_hi) {
        return None;
    }
    (enter <= exit && exit >= 0.0 && enter <= 1.0).then_some(enter.max(0.0))
}

/// Conservative entry parameter into a grid obstacle: sample the segment at
/// sub-steps no coarser than half a leaf dimension, then bisect the first
/// inside bracket down to the length tolerance.
fn segment_grid_entry(
    x: &[f64],
    t: f64,
    x_next: &[f64],
    t_next: f64,
    grid: &crate::grid::GridSet,
    tol: f64,
) -> Option<f64> {
    let bbox = grid.root().as_box();
    // quick rejection on the segment's bounding box
    for i in 0..x.len() {
        let lo = x[i].min(x_next[i]);
        let hi = x[i].max(x_next[i]);
        if hi < bbox.x_lo[i] || lo > bbox.x_hi[i] {
            return None;
        }
    }
    if t.max(t_next) < bbox.t_lo || t.min(t_next) > bbox.t_hi {
        return None;
    }
    let leaf_side = grid.cube_at(grid.depth(), grid.occupied().next()?).side();
    let leaf_text = leaf_side * leaf_side;
    let mut sub = 1usize;
    for i in 0..x.len() {
        let need = ((x_next[i] - x[i]).abs() / (0.5 * leaf_side)).ceil() as usize;
        sub = sub.max(need);
    }
    sub = sub.max(((t - t_next) / (0.5 * leaf_text)).ceil() as usize);
    sub = sub.clamp(1, 100_000);
    let at = |tau: f64| -> (Vec<f64>, f64) {
        (
            (0..x.len())
                .map(|i| x[i] + tau * (x_next[i] - x[i]))
                .collect(),
            t + tau * (t_next - t),
        )
    };
    let mut prev = 0.0;
    for j in 1..=sub {
        let tau = j as f64 / sub as f64;
        let (p, pt) = at(tau);
        if grid.point_in_set(&p, pt) {
            // bisect [prev, tau] down to the length tolerance
            let mut lo = prev;
            let mut hi = tau;
            let seg_len: f64 = x
                .iter()
                .zip(x_next)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                .max((t - t_next).abs().sqrt());
            for _ in 0..60 {
                if (hi - lo) * seg_len <= tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let (p, pt) = at(mid);
                if grid.point_in_set(&p, pt) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = tau;
    }
    None
}

/// Serializable exit-set predicates for configs and the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum TargetSpec {
    All,
    None,
    Bottom,
    AnyObstacle,
    Obstacle { index: usize },
    /// Exit point in a closed box.
    InBox {
        x_lo: Vec<f64>,
        x_hi: Vec<f64>,
        t_lo: f64,
        t_hi: f64,
    },
    /// Open cylinder |Y - X0| < r, |s - t0| < s_half.
    InCylinder {
        center_x: Vec<f64>,
        center_t: f64,
        r: f64,
        s_half: f64,
    },
    /// Open parabolic ball, the cylinder with s_half = r^2.
    InBall {
        center_x: Vec<f64>,
        center_t: f64,
        r: f64,
    },
    Not { inner: Box<TargetSpec> },
}

impl TargetSpec {
    pub fn matches(&self, sample: &ExitSample) -> bool {
        match self {
            TargetSpec::All => true,
            TargetSpec::None => false,
            TargetSpec::Bottom => sample.tag == BoundaryTag::Bottom,
            TargetSpec::AnyObstacle => matches!(sample.tag, BoundaryTag::Obstacle(_)),
            TargetSpec::Obstacle { index } => sample.tag == BoundaryTag::Obstacle(*index),
            TargetSpec::InBox {
                x_lo,
                x_hi,
                t_lo,
                t_hi,
            } => {
                sample
                    .point
                    .x
                    .iter()
                    .zip(x_lo.iter().zip(x_hi))
                    .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
                    && *t_lo <= sample.point.t
                    && sample.point.t <= *t_hi
            }
            TargetSpec::InCylinder {
                center_x,
                center_t,
                r,
                s_half,
            } => {
                let d2: f64 = sample
                    .point
                    .x
                    .iter()
                    .zip(center_x)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum();
                d2 < r * r && (sample.point.t - center_t).abs() < *s_half
            }
            TargetSpec::InBall {
                center_x,
                center_t,
                r,
            } => TargetSpec::InCylinder {
                center_x: center_x.clone(),
                center_t: *center_t,
                r: *r,
                s_half: r * r,
            }
            .matches(sample),
            TargetSpec::Not { inner } => !inner.matches(sample),
        }
    }
}

/// Bernoulli estimate of the caloric measure of the target exit set, from
/// `n` independent walks on streams `stream_base..stream_base+n`.
pub fn estimate_caloric_streams<F>(
    domain: &SpaceTimeDomain,
    pole: &SpaceTimePoint,
    target: F,
    n: u64,
    cfg: &WalkConfig,
    stream_base: u64,
) -> Result<MCEstimate>
where
    F: Fn(&ExitSample) -> bool + Sync,
{
    if n == 0 {
        return Err(Error::invalid("n", "need at least one walk"));
    }
    let hits = (0..n)
        .into_par_iter()
        .map(|i| {
            simulate_exit_stream(domain, pole, cfg, stream_base + i)
                .map(|s| u64::from(target(&s)))
        })
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    Ok(MCEstimate::from_hits(hits, n, cfg.seed))
}

pub fn estimate_caloric<F>(
    domain: &SpaceTimeDomain,
    pole: &SpaceTimePoint,
    target: F,
    n: u64,
    cfg: &WalkConfig,
) -> Result<MCEstimate>
where
    F: Fn(&ExitSample) -> bool + Sync,
{
    estimate_caloric_streams(domain, pole, target, n, cfg, 0)
}

/// Truncated alternating series for the survival probability of a standard
/// Brownian motion in (-L, L) over time T, from the eigenfunction expansion.
/// Used as the independent oracle for the interval fixture.
pub fn interval_survival_series(l: f64, t: f64, terms: usize) -> f64 {
    let mut sum = 0.0;
    for k in 0..terms {
        let odd = (2 * k + 1) as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (4.0 / (std::f64::consts::PI * odd))
            * (-odd * odd * std::f64::consts::PI * std::f64::consts::PI * t / (8.0 * l * l)).exp();
    }
    sum
}
