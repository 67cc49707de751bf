//! The fundamental temperature W, its radial profile, and the associated
//! phase-portrait constants. Everything is evaluated in the log domain so
//! extreme ratios r^2/t neither overflow nor underflow.

use crate::error::{Error, Result};

/// ln of (4 pi t)^(-n/2) exp(-r^2 / 4t) for t > 0.
fn ln_phi(n: usize, r: f64, t: f64) -> f64 {
    -0.5 * (n as f64) * (4.0 * std::f64::consts::PI * t).ln() - r * r / (4.0 * t)
}

/// Fundamental temperature W(X, t): zero for t <= 0.
pub fn w(x: &[f64], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    ln_phi(x.len(), r, t).exp()
}

/// Radial profile phi(r, t) = (4 pi t)^(-n/2) exp(-r^2 / 4t), t > 0.
pub fn phi(n: usize, r: f64, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::invalid("t", "phi needs t > 0"));
    }
    if r < 0.0 {
        return Err(Error::invalid("r", "phi needs r >= 0"));
    }
    Ok(ln_phi(n, r, t).exp())
}

/// The maximizer of t -> phi(r, t): r^2 / (2n).
pub fn phi_argmax_t(n: usize, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::invalid("r", "need r > 0"));
    }
    Ok(r * r / (2.0 * n as f64))
}

/// Maximum of t -> phi(r, t), namely C_n r^-n.
pub fn phi_max(n: usize, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::invalid("r", "need r > 0"));
    }
    Ok(c_n(n) * r.powi(-(n as i32)))
}

/// C_n = (n / 2 pi)^(n/2) e^(-n/2), the vertical-trace maximum constant.
pub fn c_n(n: usize) -> f64 {
    let nf = n as f64;
    (nf / (2.0 * std::f64::consts::PI)).powf(nf / 2.0) * (-nf / 2.0).exp()
}

/// C(lambda, n) = (4 pi lambda)^(-n/2) e^(-1/(4 lambda)), the parabolic-trace
/// constant: phi(r, lambda r^2) = C(lambda, n) r^-n.
pub fn c_lambda(lambda: f64, n: usize) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::invalid("lambda", "need lambda > 0"));
    }
    let nf = n as f64;
    Ok((-(nf / 2.0) * (4.0 * std::f64::consts::PI * lambda).ln() - 1.0 / (4.0 * lambda)).exp())
}

/// Quadrature controls for the normalization check.
#[derive(Debug, Clone, Copy)]
pub struct QuadSpec {
    /// Radial cutoff in units of sqrt(t).
    pub r_max_sigmas: f64,
    /// Number of Simpson panels.
    pub panels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            r_max_sigmas: 16.0,
            panels: 4000,
        }
    }
}

/// Numeric check of the unit-mass identity for W over R^n at a fixed time
/// gap: integrates the radial profile against the sphere-area element with
/// composite Simpson. Returns the integral (0 for t <= 0).
pub fn normalization_check(n: usize, t: f64, quad: QuadSpec) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    if quad.panels < 2 || quad.r_max_sigmas <= 0.0 {
        return Err(Error::Quadrature("degenerate quadrature spec".into()));
    }
    let r_max = quad.r_max_sigmas * t.sqrt();
    let omega = sphere_area(n);
    let f = |r: f64| -> f64 {
        if r == 0.0 && n > 1 {
            return 0.0;
        }
        omega * r.powi(n as i32 - 1) * ln_phi(n, r, t).exp()
    };
    let m = quad.panels * 2;
    let h = r_max / m as f64;
    let mut sum = f(0.0) + f(r_max);
    for i in 1..m {
        let coeff = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += coeff * f(i as f64 * h);
    }
    let integral = sum * h / 3.0;
    if !integral.is_finite() {
        return Err(Error::Quadrature("non-finite integral".into()));
    }
    Ok(integral)
}

/// Surface area of the unit sphere in R^n: 2 pi^(n/2) / Gamma(n/2).
fn sphere_area(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * std::f64::consts::PI.powf(nf / 2.0) / gamma_half_integer(n)
}

/// Gamma(n/2) for integer n >= 1.
fn gamma_half_integer(n: usize) -> f64 {
    // Gamma(1/2) = sqrt(pi), Gamma(1) = 1, Gamma(z+1) = z Gamma(z)
    let mut z = n as f64 / 2.0;
    let mut acc = 1.0;
    while z > 1.0 + 1e-12 {
        z -= 1.0;
        acc *= z;
    }
    if (z - 0.5).abs() < 1e-12 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc
    }
}
