//! Test-support oracles, independent of the library's computation paths.

use std::collections::BTreeSet;

use caloric::content::ScaleCap;
use caloric::grid::{GridSet, RelIndex};

/// Minimum over all antichain covers, enumerated as assignments of each
/// occupied leaf to one of its ancestor levels, subject to the chosen cubes
/// being pairwise equal-or-disjoint. Exponential; for a handful of leaves
/// only.
pub fn brute_force_min_cover(set: &GridSet, rho: f64, delta: ScaleCap) -> f64 {
    let leaves: Vec<RelIndex> = set.occupied().cloned().collect();
    if leaves.is_empty() {
        return 0.0;
    }
    let min_gen = match delta {
        ScaleCap::Unbounded => set.root().generation(),
        ScaleCap::Generation(j) => j.max(set.root().generation()),
    };
    let min_level = (min_gen - set.root().generation()) as u32;
    let levels: Vec<u32> = (min_level..=set.depth()).collect();
    let m = set.base() as u64;
    let n = set.dim();
    let ancestor = |leaf: &RelIndex, level: u32| -> (u32, RelIndex) {
        let up = set.depth() - level;
        let sp = m.pow(up);
        let tp = m.pow(2 * up);
        let mut rel: RelIndex = (0..n).map(|i| leaf[i] / sp).collect();
        rel.push(leaf[n] / tp);
        (level, rel)
    };
    let nested = |hi: &(u32, RelIndex), lo: &(u32, RelIndex)| -> bool {
        if hi.0 >= lo.0 {
            return false;
        }
        let up = lo.0 - hi.0;
        let sp = m.pow(up);
        let tp = m.pow(2 * up);
        let mut anc: RelIndex = (0..n).map(|i| lo.1[i] / sp).collect();
        anc.push(lo.1[n] / tp);
        anc == hi.1
    };
    let mut best = f64::INFINITY;
    let mut choice = vec![0usize; leaves.len()];
    loop {
        let chosen: Vec<(u32, RelIndex)> = leaves
            .iter()
            .zip(&choice)
            .map(|(leaf, &c)| ancestor(leaf, levels[c]))
            .collect();
        let mut ok = true;
        'outer: for i in 0..chosen.len() {
            for j in (i + 1)..chosen.len() {
                if chosen[i] == chosen[j] {
                    continue;
                }
                if nested(&chosen[i], &chosen[j]) || nested(&chosen[j], &chosen[i]) {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            let distinct: BTreeSet<&(u32, RelIndex)> = chosen.iter().collect();
            let cost: f64 = distinct
                .iter()
                .map(|(level, _)| {
                    (set.base() as f64)
                        .powi(-set.generation_at(*level))
                        .powf(rho)
                })
                .sum();
            best = best.min(cost);
        }
        let mut pos = leaves.len();
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < levels.len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Independent 1-d maximizer: golden-section bracket shrink, then bisection
/// on the sign of a small symmetric difference.
pub fn numeric_argmax(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    for _ in 0..60 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    let mut lo = 0.5 * (a + b) * 0.9;
    let mut hi = 0.5 * (a + b) * 1.1;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let h = 1e-5 * mid;
        if f(mid + h) > f(mid - h) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-11 * mid {
            break;
        }
    }
    0.5 * (lo + hi)
}
