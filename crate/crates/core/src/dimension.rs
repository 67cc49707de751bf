//! The dimension-bound tree: classify cubes by small covering content
//! (type 1) or by a Cauchy-Schwarz deficit of child masses (type 2), expand
//! type-1 cubes along their witness antichains and type-2 cubes through all
//! children, and certify the covering and residual-mass bounds of the
//! resulting exceptional set.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::content::{net_content_unchecked, ScaleCap};
use crate::error::{Error, Result};
use crate::frostman::TreeMeasure;
use crate::geometry::ParabolicCube;
use crate::grid::{GridSet, RelIndex};

/// Cube-to-mass evaluator with provenance.
#[derive(Debug, Clone)]
pub enum MeasureOracle {
    Frostman(TreeMeasure),
    /// mu(Q) = vol(Q cap root) / vol(root).
    NormalizedVolume { root: ParabolicCube },
    /// Empirical masses binned into resolution cubes (e.g. exit samples).
    Empirical(TreeMeasure),
}

impl MeasureOracle {
    pub fn provenance(&self) -> &'static str {
        match self {
            MeasureOracle::Frostman(_) => "frostman",
            MeasureOracle::NormalizedVolume { .. } => "analytic",
            MeasureOracle::Empirical(_) => "empirical-mc",
        }
    }

    pub fn mass(&self, cube: &ParabolicCube) -> f64 {
        match self {
            MeasureOracle::Frostman(m) | MeasureOracle::Empirical(m) => m.mass_of_cube(cube),
            MeasureOracle::NormalizedVolume { root } => {
                if root.contains_cube(cube) {
                    let rel_gen = cube.generation() - root.generation();
                    (root.base() as f64).powi(-rel_gen * (cube.dim() as i32 + 2))
                } else if cube.contains_cube(root) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            MeasureOracle::Frostman(m) | MeasureOracle::Empirical(m) => m.total(),
            MeasureOracle::NormalizedVolume { .. } => 1.0,
        }
    }

    /// Largest relative additivity residual of mass(Q) against the child sum
    /// over a sample of cubes.
    pub fn additivity_residual(&self, cubes: &[ParabolicCube]) -> f64 {
        let mut worst = 0.0_f64;
        for q in cubes {
            let sum: f64 = q.children().iter().map(|c| self.mass(c)).sum();
            let m = self.mass(q);
            if m > 0.0 {
                worst = worst.max((sum - m).abs() / m);
            }
        }
        worst
    }
}

/// Outcome of classifying one cube.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Classification {
    Type1 {
        content: f64,
        threshold: f64,
        witness: Vec<String>,
    },
    Type2 {
        lhs: f64,
        rhs: f64,
    },
    Neither {
        content: f64,
        threshold: f64,
        lhs: f64,
        rhs: f64,
    },
}

/// Classify the cube at (level, rel) in the set's tree.
///
/// Type 1: the covering content of `E cap Q` at scales below `side(Q)/m`
/// with exponent `n+2-rho` beats `side(Q)^(n+2-rho)` strictly. Type 2: the
/// child-mass Cauchy-Schwarz deficit holds at rate `m^-lambda`.
pub fn classify_cube(
    set: &GridSet,
    level: u32,
    rel: &RelIndex,
    mu: &MeasureOracle,
    rho: f64,
    lambda: f64,
) -> Result<Classification> {
    let n = set.dim() as f64;
    if !(rho > 0.0 && rho < n + 2.0) {
        return Err(Error::invalid("rho", "need 0 < rho < n+2"));
    }
    if lambda <= 0.0 {
        return Err(Error::invalid("lambda", "need lambda > 0"));
    }
    if level >= set.depth() {
        return Err(Error::invalid(
            "level",
            "cube must sit strictly above the grid resolution",
        ));
    }
    let cube = set.cube_at(level, rel);
    if cube.generation() < 0 {
        return Err(Error::invalid("cube", "need side at most one"));
    }
    let exponent = n + 2.0 - rho;
    let threshold = cube.side().powf(exponent);
    let (content, witness) = if set.meets(level, rel) {
        let sub = set.restrict(level, rel)?;
        let v = net_content_unchecked(&sub, exponent, ScaleCap::Generation(cube.generation() + 1));
        (v.value, v.witness)
    } else {
        (0.0, Vec::new())
    };
    let type1 = content < threshold;
    // child-mass deficit over all children in the full grid
    let vol_q = cube.volume();
    let mass_q = mu.mass(&cube);
    let rhs = (set.base() as f64).powf(-lambda) * mass_q.sqrt() * vol_q.sqrt();
    let lhs: f64 = cube
        .children()
        .iter()
        .map(|c| mu.mass(c).sqrt() * c.volume().sqrt())
        .sum();
    if type1 {
        return Ok(Classification::Type1 {
            content,
            threshold,
            witness: witness.iter().map(|c| c.to_string()).collect(),
        });
    }
    if lhs <= rhs * (1.0 + 1e-12) {
        return Ok(Classification::Type2 { lhs, rhs });
    }
    Ok(Classification::Neither {
        content,
        threshold,
        lhs,
        rhs,
    })
}

/// Parameters of a tree build.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TreeParams {
    pub rho: f64,
    pub lambda: f64,
    /// Defaults to the equalizing choice rho / (lambda + rho).
    pub eps: Option<f64>,
    pub delta: f64,
}

/// One certified covering-content check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContentCheck {
    pub alpha: f64,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Report of a successful tree build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeReport {
    pub provenance: String,
    pub rho: f64,
    pub lambda: f64,
    pub eps: f64,
    pub delta: f64,
    /// Required number of type-2 ancestors before a chain stops being
    /// efficient.
    pub s: u32,
    pub eta: f64,
    /// Cubes per tree level with their classification kind.
    pub levels: Vec<Vec<(String, String)>>,
    pub terminal: Vec<String>,
    pub efficient: Vec<String>,
    pub f_cubes: Vec<String>,
    pub g_cubes: Vec<String>,
    pub f_delta_leaves: usize,
    pub content_checks: Vec<ContentCheck>,
    pub mu_outside: f64,
    pub mu_outside_bound: f64,
    pub pass: bool,
}

struct Node {
    level: u32,
    rel: RelIndex,
    type2_above: u32,
    sth_type2: Option<(u32, RelIndex)>,
}

/// Replay the tree construction on a discretized set and certify the
/// covering-content and residual-mass goals.
pub fn build_dimension_tree(
    set: &GridSet,
    mu: &MeasureOracle,
    params: &TreeParams,
) -> Result<TreeReport> {
    let n = set.dim() as f64;
    let m = set.base() as f64;
    if set.root().generation() != 0 {
        return Err(Error::invalid("root", "tree build expects a side-one root"));
    }
    if set.is_empty() {
        return Err(Error::EmptySet("build_dimension_tree"));
    }
    if mu.total() > 1.0 + 1e-9 {
        return Err(Error::invalid("mu", "oracle total must be at most one"));
    }
    let rho = params.rho;
    let lambda = params.lambda;
    let eps = params.eps.unwrap_or(rho / (lambda + rho));
    let delta = params.delta;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", "need 0 < eps < 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "need 0 < delta < 1"));
    }
    let log_m_inv_delta = -(delta.ln()) / m.ln();
    if eps * log_m_inv_delta < 1.0 {
        return Err(Error::invalid(
            "delta",
            "need eps * log_m(1/delta) >= 1; pick a smaller delta",
        ));
    }
    let leaf_side = m.powi(-(set.depth() as i32));
    if delta < leaf_side {
        return Err(Error::ScaleBelowResolution(format!("delta = {delta}")));
    }
    let s = (eps * log_m_inv_delta).ceil() as u32;

    let mut levels: Vec<Vec<(String, String)>> = Vec::new();
    let mut terminals: Vec<Node> = Vec::new();
    let mut offenders: Vec<String> = Vec::new();
    let mut frontier = vec![Node {
        level: 0,
        rel: vec![0; set.dim() + 1],
        type2_above: 0,
        sth_type2: None,
    }];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        let mut level_log = Vec::new();
        for node in frontier {
            let cube = set.cube_at(node.level, &node.rel);
            if cube.side() <= delta * (1.0 + 1e-12) {
                level_log.push((cube.to_string(), "terminal".to_string()));
                terminals.push(node);
                continue;
            }
            if node.level >= set.depth() {
                return Err(Error::ScaleBelowResolution(
                    "tree reached the grid resolution before side <= delta".into(),
                ));
            }
            match classify_cube(set, node.level, &node.rel, mu, rho, lambda)? {
                Classification::Type1 { witness, .. } => {
                    level_log.push((cube.to_string(), "type1".to_string()));
                    for lit in witness {
                        let w: ParabolicCube = lit.parse()?;
                        let (wl, wr) = set
                            .rel_of_cube(&w)
                            .ok_or_else(|| Error::Parse("witness outside tree".into()))?;
                        next.push(Node {
                            level: wl,
                            rel: wr,
                            type2_above: node.type2_above,
                            sth_type2: node.sth_type2.clone(),
                        });
                    }
                }
                Classification::Type2 { .. } => {
                    level_log.push((cube.to_string(), "type2".to_string()));
                    let count = node.type2_above + 1;
                    let marker = if count == s && node.sth_type2.is_none() {
                        Some((node.level, node.rel.clone()))
                    } else {
                        node.sth_type2.clone()
                    };
                    for child in set.meeting_children(node.level, &node.rel).to_vec() {
                        next.push(Node {
                            level: node.level + 1,
                            rel: child,
                            type2_above: count,
                            sth_type2: marker.clone(),
                        });
                    }
                }
                Classification::Neither { .. } => {
                    level_log.push((cube.to_string(), "neither".to_string()));
                    offenders.push(cube.to_string());
                }
            }
        }
        levels.push(level_log);
        frontier = next;
    }
    if !offenders.is_empty() {
        return Err(Error::NotApplicable {
            count: offenders.len(),
            first: offenders[0].clone(),
        });
    }

    // efficient terminals and the s-th type-2 ancestors of the rest
    let mut efficient: Vec<(u32, RelIndex)> = Vec::new();
    let mut f_set: BTreeSet<(u32, RelIndex)> = BTreeSet::new();
    for t in &terminals {
        if t.type2_above < s {
            efficient.push((t.level, t.rel.clone()));
        } else {
            let anc = t
                .sth_type2
                .clone()
                .expect("terminal with >= s type-2 ancestors carries the marker");
            f_set.insert(anc);
        }
    }
    let g_set: Vec<(u32, RelIndex)> = f_set
        .iter()
        .filter(|(level, rel)| {
            let cube = set.cube_at(*level, rel);
            cube.side().powf(n + 2.0 - lambda * eps) <= mu.mass(&cube)
        })
        .cloned()
        .collect();

    // covering-content goal on F_delta at scale m * delta^eps
    let mut kept = efficient.clone();
    kept.extend(g_set.iter().cloned());
    let f_delta = set.keep_below(&kept)?;
    let cap_side = m * delta.powf(eps);
    let cap_gen = ((-(cap_side.ln()) / m.ln()) - 1e-9).ceil().max(0.0) as i32;
    let eta = (n + 2.0 - rho * (1.0 - eps)).max(n + 2.0 - lambda * eps);
    let mut content_checks = Vec::new();
    for alpha in [0.0, 0.1, 0.5] {
        let value = if f_delta.is_empty() {
            0.0
        } else {
            net_content_unchecked(&f_delta, eta + alpha, ScaleCap::Generation(cap_gen)).value
        };
        let bound = 2.0 * m.powf(alpha) * delta.powf(eps * alpha);
        content_checks.push(ContentCheck {
            alpha,
            value,
            bound,
            pass: value <= bound * (1.0 + 1e-12),
        });
    }

    // residual mass outside F_delta
    let kept_mass: f64 = kept
        .iter()
        .map(|(level, rel)| mu.mass(&set.cube_at(*level, rel)))
        .sum();
    let mu_outside = (mu.total() - kept_mass).max(0.0);
    let mu_outside_bound = m.powf(lambda) * delta.powf(lambda * eps / 2.0);
    let pass =
        content_checks.iter().all(|c| c.pass) && mu_outside <= mu_outside_bound * (1.0 + 1e-12);

    let lit = |items: &[(u32, RelIndex)]| -> Vec<String> {
        items
            .iter()
            .map(|(level, rel)| set.cube_at(*level, rel).to_string())
            .collect()
    };
    Ok(TreeReport {
        provenance: mu.provenance().to_string(),
        rho,
        lambda,
        eps,
        delta,
        s,
        eta,
        levels,
        terminal: terminals
            .iter()
            .map(|t| set.cube_at(t.level, &t.rel).to_string())
            .collect(),
        efficient: lit(&efficient),
        f_cubes: lit(&f_set.iter().cloned().collect::<Vec<_>>()),
        g_cubes: lit(&g_set),
        f_delta_leaves: f_delta.leaf_count(),
        content_checks,
        mu_outside,
        mu_outside_bound,
        pass,
    })
}
