//! Deterministic constant selection for the upper dimension bound, and the
//! regression showing why the annulus count must grow like m^(n+2) log^2 m
//! rather than m.
//!
//! All geometric-decay quantities are evaluated in the log domain; the
//! covering-sum margin in the exponent stipulation is computed from its
//! telescoped closed form so that margins far below machine epsilon of 1
//! remain meaningful.

use serde::{Deserialize, Serialize};

use crate::alternative::AlphaLedger;
use crate::error::{Error, Result};

/// Output of the constant-selection search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub n: u32,
    pub m: u64,
    /// Annulus refinement exponent, n + 3.
    pub d: u32,
    /// Number of annular rings consumed, a multiple of m^(d-1).
    pub k: u128,
    /// Rounding summand added to reach that multiple.
    pub c: u128,
    /// Ring capacity (m^d - 1) / 2; the search requires k <= capacity.
    pub capacity: u128,
    /// Measure threshold of the first alternative, m^-(n+2) / (2 alpha).
    pub eta: f64,
    pub ledger: AlphaLedger,
    /// Fraction of children consumed by the rings; must stay below 1/2.
    pub delta_frac: f64,
    /// Child-mass decay rate: -log_m of the combined deficit.
    pub lambda: f64,
    /// Covering exponent from the stipulation, found by log-domain bisection.
    pub rho: f64,
    /// Margin 1 - lhs of the stipulation at the returned rho.
    pub rho_margin: f64,
    pub beta: f64,
}

/// Left-hand side margin of the exponent stipulation: `1 - lhs(rho)` where
/// `lhs(rho) = (m^(n+2)-1) sum_{j=1..d+1} m^(-j(n+2-rho))
///            + (1/2) m^-(n+2) m^(-d(n+2-rho))`.
///
/// Computed from the telescoped numerator `-expm1(rho ln m) + (a-1) q^(d+2)`
/// over `1 - q`, with `q = m^(rho-(n+2))`, so margins of order `m^(-(d+1)(n+2))`
/// survive in floating point. At rho -> 0+ the margin tends to
/// `(1/2) m^(-(d+1)(n+2))`.
pub fn rho_stipulation_margin(m: u64, n: u32, d: u32, rho: f64) -> f64 {
    let ln_m = (m as f64).ln();
    let p = n as f64 + 2.0;
    let j_top = d as f64 + 1.0;
    let ln_a = p * ln_m;
    let ln_q = rho * ln_m - ln_a;
    let q = ln_q.exp();
    // ln(a - 1) = ln a + ln(1 - 1/a)
    let ln_a_minus_1 = ln_a + (-(-ln_a).exp()).ln_1p();
    let tail = (ln_a_minus_1 + (j_top + 1.0) * ln_q).exp();
    let numerator = -(rho * ln_m).exp_m1() + tail;
    let bracket = numerator / (1.0 - q);
    let second = 0.5 * (-p * ln_m - d as f64 * (p - rho) * ln_m).exp();
    bracket - second
}

/// Largest exponent in (0, 1) keeping the stipulation margin positive, found
/// by log-domain bisection to relative granularity 1e-9, ties toward the
/// smaller exponent. Returns the exponent and its margin.
pub fn rho_by_bisection(m: u64, n: u32, d: u32) -> Option<(f64, f64)> {
    let mut lo_ln = (1e-300_f64).ln();
    let mut hi_ln = 0.0_f64; // rho = 1
    if rho_stipulation_margin(m, n, d, 1e-300) <= 0.0 {
        return None;
    }
    if rho_stipulation_margin(m, n, d, 1.0) > 0.0 {
        let margin = rho_stipulation_margin(m, n, d, 1.0 - 1e-9);
        return Some((1.0 - 1e-9, margin));
    }
    while hi_ln - lo_ln > 1e-9 {
        let mid = 0.5 * (lo_ln + hi_ln);
        if rho_stipulation_margin(m, n, d, mid.exp()) > 0.0 {
            lo_ln = mid;
        } else {
            hi_ln = mid;
        }
    }
    let rho = lo_ln.exp();
    Some((rho, rho_stipulation_margin(m, n, d, rho)))
}

/// Fraction of a cube's children consumed by `k` annular rings of depth-d
/// descendants: `1 - (m^d - 2k)^n (m^(2d) - 2k) / m^(d(n+2))`,
/// evaluated through log1p/expm1.
pub fn consumed_child_fraction(m: u64, n: u32, d: u32, k: u128) -> f64 {
    let md = (m as f64).powi(d as i32);
    let m2d = (m as f64).powi(2 * d as i32);
    let x = 2.0 * k as f64 / md;
    let y = 2.0 * k as f64 / m2d;
    if x >= 1.0 || y >= 1.0 {
        return 1.0;
    }
    -((n as f64) * (-x).ln_1p() + (-y).ln_1p()).exp_m1()
}

/// The ring count before rounding: `ceil(m^(n+2) ln^2 m)`.
fn ring_count(m: u64, n: u32) -> u128 {
    let ln_m = (m as f64).ln();
    let base = (m as u128).pow(n + 2);
    let frac = ln_m * ln_m;
    // base * frac rounded up, in integer arithmetic where possible
    let scaled = (base as f64) * frac;
    if scaled < 1e30 {
        scaled.ceil() as u128
    } else {
        // split frac into integer and fractional parts to keep precision
        let int = frac.floor() as u128;
        let rem = frac - frac.floor();
        base * int + ((base as f64) * rem).ceil() as u128
    }
}

fn smallest_admissible_m(n: u32) -> u64 {
    let min = 1.0 + 2.0 * (6.0 * n as f64).sqrt();
    let mut m = min.ceil() as u64;
    if m % 2 == 0 {
        m += 1;
    }
    m.max(7)
}

/// Deterministic search with an explicit threshold constant and search
/// bound. The public entry point uses the honest ledger alpha and the
/// standard bound.
pub fn lemma2_constants_with(n: u32, alpha: f64, m_bound: u64) -> Result<ConstantsReport> {
    if n == 0 {
        return Err(Error::invalid("n", "need n >= 1"));
    }
    if !(alpha > 1.0) {
        return Err(Error::invalid("alpha", "need alpha > 1"));
    }
    let d = n + 3;
    let ledger = AlphaLedger::new(n as usize);
    let m_min = smallest_admissible_m(n);
    let mut m = m_min;
    while m <= m_bound {
        let k0 = ring_count(m, n);
        let md1 = (m as u128).pow(d - 1);
        let k = k0.div_ceil(md1) * md1;
        let c = k - k0;
        let capacity = ((m as u128).pow(d) - 1) / 2;
        if k <= capacity {
            let ln_m = (m as f64).ln();
            let eta = (-(n as f64 + 2.0) * ln_m - (2.0 * alpha).ln()).exp();
            let delta_frac = consumed_child_fraction(m, n, d, k);
            if delta_frac < 0.5 {
                // deficit = sqrt(delta_frac) + eta^(-1/2) (1-eta)^(k/2),
                // the tail in the log domain
                let tail = (-0.5 * eta.ln() + (k as f64 / 2.0) * (-eta).ln_1p()).exp();
                let deficit = delta_frac.sqrt() + tail;
                if deficit < 1.0 {
                    if let Some((rho, rho_margin)) = rho_by_bisection(m, n, d) {
                        let lambda = -deficit.ln() / ln_m;
                        let beta = lambda * rho / (lambda + rho);
                        return Ok(ConstantsReport {
                            n,
                            m,
                            d,
                            k,
                            c,
                            capacity,
                            eta,
                            ledger,
                            delta_frac,
                            lambda,
                            rho,
                            rho_margin,
                            beta,
                        });
                    }
                }
            }
        }
        m += 2;
    }
    Err(Error::SearchExhausted { n, bound: m_bound })
}

pub const M_SEARCH_BOUND: u64 = 1_000_000;

/// The constant-selection procedure with the honest ledger threshold.
pub fn lemma2_constants(n: u32) -> Result<ConstantsReport> {
    lemma2_constants_with(n, AlphaLedger::new(n as usize).alpha, M_SEARCH_BOUND)
}

/// One evaluated point of the ring-count regression.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegressionPoint {
    pub m: u64,
    pub lhs: f64,
}

/// Report contrasting the linear ring count with the corrected one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRegressionReport {
    /// Threshold constant of the three-dimensional analog.
    pub alpha3: f64,
    /// Minimum over odd m of the linear-ring-count left side; the inequality
    /// demands values below -3, which never happen.
    pub original_min: RegressionPoint,
    pub original_ever_succeeds: bool,
    /// Per-n outcome of the corrected ring count within the search range.
    pub corrected: Vec<CorrectedOutcome>,
    /// Largest relative disagreement between the two evaluation routes.
    pub recomputation_residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrectedOutcome {
    pub n: u32,
    pub alpha: f64,
    /// First odd m in range satisfying the corrected inequality, if any.
    pub first_success_m: Option<u64>,
    /// Analytic root in ln m of the corrected left side; success requires
    /// ln m beyond this threshold.
    pub threshold_ln_m: f64,
}

/// Linear-ring-count left side (the uncorrectable one): with k of order m
/// and the threshold scale m^-3, the decay term is m^-3 (m / ln m) and the
/// whole expression tends to zero from above instead of diving below -3.
fn original_lhs(m: f64, alpha: f64) -> f64 {
    (8.0 * alpha).ln() / m.ln() - (m.powi(-3) / (2.0 * alpha)) * (m / m.ln())
}

/// Same quantity through an independent floating route: both terms carried
/// in the log domain until the final subtraction.
fn original_lhs_log_domain(m: f64, alpha: f64) -> f64 {
    let ln_m = m.ln();
    let a = ((8.0 * alpha).ln().ln() - ln_m.ln()).exp();
    let b = (-2.0 * ln_m - (2.0 * alpha).ln() - ln_m.ln()).exp();
    a - b
}

/// Corrected left side: `ln(8 alpha) / ln m - ln m / (2 alpha) + (n + 2)`,
/// negative iff the corrected ring count satisfies its requirement.
fn corrected_lhs(m: f64, n: u32, alpha: f64) -> f64 {
    corrected_lhs_at_ln(m.ln(), n, alpha)
}

/// Same in terms of ln m, usable beyond the floating range of m itself.
pub fn corrected_lhs_at_ln(ln_m: f64, n: u32, alpha: f64) -> f64 {
    (8.0 * alpha).ln() / ln_m - ln_m / (2.0 * alpha) + (n as f64 + 2.0)
}

fn corrected_lhs_log_domain(m: f64, n: u32, alpha: f64) -> f64 {
    let ln_m = m.ln();
    let a = ((8.0 * alpha).ln().ln() - ln_m.ln()).exp();
    let b = (ln_m.ln() - (2.0 * alpha).ln()).exp();
    a - b + (n as f64 + 2.0)
}

/// Evaluate both ring-count choices across odd m up to the bound.
pub fn bourgain_error_regression(m_bound: u64) -> ErrorRegressionReport {
    let alpha3 = AlphaLedger::new(3).alpha;
    let mut min_pt = RegressionPoint {
        m: 7,
        lhs: f64::INFINITY,
    };
    let mut ever = false;
    let mut residual = 0.0_f64;
    let mut m = 7u64;
    while m <= m_bound {
        let lhs = original_lhs(m as f64, alpha3);
        let alt = original_lhs_log_domain(m as f64, alpha3);
        residual = residual.max((lhs - alt).abs() / lhs.abs().max(1.0));
        if lhs < min_pt.lhs {
            min_pt = RegressionPoint { m, lhs };
        }
        if lhs < -3.0 {
            ever = true;
        }
        m += 2;
    }
    let mut corrected = Vec::new();
    for n in 1..=3u32 {
        let alpha = AlphaLedger::new(n as usize).alpha;
        let mut first = None;
        let mut m = 7u64;
        while m <= m_bound {
            let lhs = corrected_lhs(m as f64, n, alpha);
            let alt = corrected_lhs_log_domain(m as f64, n, alpha);
            residual = residual.max((lhs - alt).abs() / lhs.abs().max(1.0));
            if lhs < 0.0 {
                first = Some(m);
                break;
            }
            m += 2;
        }
        // analytic root of L/(2 alpha) = (n+2) + ln(8 alpha)/L
        let a2 = 2.0 * alpha;
        let p = n as f64 + 2.0;
        let threshold_ln_m = 0.5 * (a2 * p + (a2 * a2 * p * p + 4.0 * a2 * (8.0 * alpha).ln()).sqrt());
        corrected.push(CorrectedOutcome {
            n,
            alpha,
            first_success_m: first,
            threshold_ln_m,
        });
    }
    ErrorRegressionReport {
        alpha3,
        original_min: min_pt,
        original_ever_succeeds: ever,
        corrected,
        recomputation_residual: residual,
    }
}
