//! Walk-on-spheres harmonic measure sampler: jump to a uniform point on the
//! largest centered sphere until within tolerance of the boundary, then
//! absorb at the nearest boundary point.
//!
//! Serves as the independent oracle for the cylinder projection check: on an
//! infinite cylinder the caloric measure of `A x R` equals the harmonic
//! measure of `A` on the base.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::walk::MCEstimate;

/// Spatial base domain for the harmonic sampler.
#[derive(Debug, Clone)]
pub enum BaseDomain {
    Box { x_lo: Vec<f64>, x_hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl BaseDomain {
    fn dim(&self) -> usize {
        match self {
            BaseDomain::Box { x_lo, .. } => x_lo.len(),
            BaseDomain::Ball { center, .. } => center.len(),
        }
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            BaseDomain::Box { x_lo, x_hi } => x
                .iter()
                .zip(x_lo.iter().zip(x_hi))
                .map(|(v, (lo, hi))| (v - lo).min(hi - v))
                .fold(f64::INFINITY, f64::min),
            BaseDomain::Ball { center, radius } => {
                radius
                    - x.iter()
                        .zip(center)
                        .map(|(v, c)| (v - c) * (v - c))
                        .sum::<f64>()
                        .sqrt()
            }
        }
    }

    fn nearest_boundary_point(&self, x: &[f64]) -> Vec<f64> {
        match self {
            BaseDomain::Box { x_lo, x_hi } => {
                // project onto the closest face
                let mut best_axis = 0;
                let mut best_val = x_lo[0];
                let mut best_d = f64::INFINITY;
                for i in 0..x.len() {
                    for v in [x_lo[i], x_hi[i]] {
                        let d = (x[i] - v).abs();
                        if d < best_d {
                            best_d = d;
                            best_axis = i;
                            best_val = v;
                        }
                    }
                }
                let mut p = x.to_vec();
                p[best_axis] = best_val;
                p
            }
            BaseDomain::Ball { center, radius } => {
                let norm: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                if norm == 0.0 {
                    let mut p = center.clone();
                    p[0] += radius;
                    return p;
                }
                x.iter()
                    .zip(center)
                    .map(|(v, c)| c + (v - c) * radius / norm)
                    .collect()
            }
        }
    }
}

/// Harmonic measure of the target boundary set from `x`, sampled by
/// walk-on-spheres with the given absorption tolerance.
pub fn walk_on_spheres<F>(
    domain: &BaseDomain,
    x: &[f64],
    target: F,
    n: u64,
    seed: u64,
    tol: f64,
) -> Result<MCEstimate>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let dim = domain.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch(x.len(), dim));
    }
    if domain.boundary_distance(x) <= 0.0 {
        return Err(Error::PoleOutsideDomain(x.to_vec()));
    }
    if n == 0 || tol <= 0.0 {
        return Err(Error::invalid("wos", "need n > 0 and tol > 0"));
    }
    let max_jumps = 100_000u32;
    let hits = (0..n)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut pos = x.to_vec();
            for _ in 0..max_jumps {
                let d = domain.boundary_distance(&pos);
                if d <= tol {
                    let b = domain.nearest_boundary_point(&pos);
                    return Ok(u64::from(target(&b)));
                }
                jump_on_sphere(&mut pos, d, &mut rng);
            }
            Err(Error::invalid("wos", "walk failed to converge"))
        })
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    Ok(MCEstimate::from_hits(hits, n, seed))
}

fn jump_on_sphere(pos: &mut [f64], radius: f64, rng: &mut ChaCha8Rng) {
    match pos.len() {
        1 => {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            pos[0] += sign * radius;
        }
        _ => {
            // uniform direction from a normalized Gaussian
            loop {
                let dir: Vec<f64> = pos.iter().map(|_| rng.sample(StandardNormal)).collect();
                let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for (p, d) in pos.iter_mut().zip(&dir) {
                        *p += radius * d / norm;
                    }
                    return;
                }
            }
        }
    }
}
