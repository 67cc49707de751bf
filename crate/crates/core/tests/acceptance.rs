//! Acceptance suite: one test per criterion, each printing a PASS line on
//! success (visible with --nocapture) and failing loudly otherwise.
//!
//! Criterion 7's search-termination, stipulation-margin, and corrected-count
//! legs are known-red with the honest threshold constant; see the failing
//! tests' messages.

mod common;

use caloric::alternative::{bourgain_alternative_audit, AlphaLedger, BourgainAuditOptions};
use caloric::audits::{
    check_ball_estimate, check_cylinder_estimate, check_cylinder_projection,
    nested_rectangle_bound, strong_markov_residual,
};
use caloric::constants::{bourgain_error_regression, lemma2_constants, M_SEARCH_BOUND};
use caloric::content::{net_content, ScaleCap};
use caloric::dimension::{build_dimension_tree, MeasureOracle, TreeParams};
use caloric::domain::{Container, Obstacle, SpaceTimeDomain};
use caloric::frostman::{build_frostman, frostman_diam_bound_check, total_matches_content};
use caloric::geometry::{
    standard_triple, standard_triple_children, ParabolicCube, ParabolicRectangle, SpaceTimePoint,
};
use caloric::grid::{GridSet, GridSpec};
use caloric::kernel::{c_n, normalization_check, phi_argmax_t, QuadSpec};
use caloric::walk::{
    estimate_caloric, interval_survival_series, simulate_exit_stream, BoundaryTag, WalkConfig,
};
use caloric::wos::{walk_on_spheres, BaseDomain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
    SpaceTimePoint::new(x.to_vec(), t).unwrap()
}

/// Criterion 1: heat-kernel portrait. Numeric argmax within 1e-9 relative
/// for n in 1..=8 and r in {0.1, 1, 10}; the constant table ordering; unit
/// mass within 1e-6.
#[test]
fn acceptance_01_heat_kernel_portrait() {
    for n in 1..=8usize {
        for r in [0.1, 1.0, 10.0] {
            let expect = phi_argmax_t(n, r).unwrap();
            let f = |t: f64| {
                -0.5 * (n as f64) * (4.0 * std::f64::consts::PI * t).ln() - r * r / (4.0 * t)
            };
            let numeric = common::numeric_argmax(f, expect / 50.0, expect * 50.0);
            assert!(
                (numeric - expect).abs() <= 1e-9 * expect,
                "argmax n={n} r={r}: {numeric} vs {expect}"
            );
        }
    }
    let c: Vec<f64> = (1..=8).map(c_n).collect();
    assert!(0.25 > c[0], "C_1 = {}", c[0]);
    for i in 0..5 {
        assert!(c[i] > c[i + 1], "C ordering at {i}");
    }
    assert!(c[5] > 0.04, "C_6 = {}", c[5]);
    assert!(c[5] < c[6] && c[6] < c[7], "tail ordering");
    for n in 1..=8 {
        for t in [0.01, 1.0] {
            let v = normalization_check(n, t, QuadSpec::default()).unwrap();
            assert!((v - 1.0).abs() < 1e-6, "unit mass n={n} t={t}: {v}");
        }
    }
    println!("ACCEPTANCE 1 heat-kernel portrait: PASS");
}

/// Criterion 2: net content vs exhaustive covers on hundreds of random sets;
/// mass-distribution total equals the DP value; growth bound on every cube;
/// diameter bound on 1000 random rectangles.
#[test]
fn acceptance_02_content_and_frostman() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let mut checked = 0usize;
    for &m in &[2u32, 3] {
        for depth in 1..=3u32 {
            for _ in 0..34 {
                let spatial = (m as u64).pow(depth);
                let time = (m as u64).pow(2 * depth);
                let k = rng.random_range(1..=5usize);
                let mut occ = std::collections::BTreeSet::new();
                for _ in 0..k {
                    occ.insert(vec![rng.random_range(0..spatial), rng.random_range(0..time)]);
                }
                let set = GridSet::new(ParabolicCube::unit(m, 1).unwrap(), depth, occ).unwrap();
                for rho in [0.8, 1.5] {
                    let dp = net_content(&set, rho, ScaleCap::Unbounded).unwrap().value;
                    let brute = common::brute_force_min_cover(&set, rho, ScaleCap::Unbounded);
                    assert!(
                        (dp - brute).abs() <= 1e-12 * brute.max(1.0),
                        "m={m} depth={depth} rho={rho}: dp={dp} brute={brute}"
                    );
                    let mu = build_frostman(&set, rho).unwrap();
                    assert!(total_matches_content(&mu), "total vs DP");
                    let (additivity, growth) = mu.verify();
                    assert!(additivity <= 1e-12 && growth <= 1e-12);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked >= 400, "only {checked} random sets checked");
    // diameter bound on 1000 random rectangles over a percolation set
    let set = GridSet::generate(
        ParabolicCube::unit(3, 1).unwrap(),
        3,
        &GridSpec::Percolation { p: 0.5, seed: 99 },
    )
    .unwrap();
    let mu = build_frostman(&set, 1.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(171717);
    for _ in 0..1000 {
        let x0: f64 = rng.random_range(-0.5..1.0);
        let w: f64 = rng.random_range(1e-3..1.2);
        let t0: f64 = rng.random_range(-0.5..1.0);
        let h: f64 = rng.random_range(1e-3..1.2);
        let rect = ParabolicRectangle::from_bounds(vec![x0], vec![x0 + w], t0, t0 + h).unwrap();
        assert!(frostman_diam_bound_check(&mu, &rect));
    }
    println!("ACCEPTANCE 2 net content / frostman: PASS");
}

/// Criterion 3: zero-future on all samples; interval survival within three
/// sigma of the series oracle at N = 1e5 under the default step policy;
/// Markov residual under three sigma on three nested fixtures; nested
/// rectangle bound for one, two, and three rectangles.
#[test]
fn acceptance_03_caloric_mc() {
    // zero-future, checked sample by sample
    let d = SpaceTimeDomain::without_obstacles(
        Container::spatial_box(vec![-1.0], vec![1.0], 0.0, 1.0).unwrap(),
    );
    let cfg = WalkConfig::default_for(&d, 31415);
    let pole = pt(&[0.0], 1.0 - 1e-12);
    for stream in 0..20_000u64 {
        let s = simulate_exit_stream(&d, &pole, &cfg, stream).unwrap();
        assert!(s.point.t < pole.t, "future exit at stream {stream}");
    }
    // survival against the series oracle
    let est = estimate_caloric(&d, &pole, |s| s.tag == BoundaryTag::Bottom, 100_000, &cfg)
        .unwrap();
    let exact = interval_survival_series(1.0, 1.0, 50);
    assert!(
        (est.mean - exact).abs() <= 3.0 * est.stderr,
        "survival {} vs {exact} (sigma {})",
        est.mean,
        est.stderr
    );
    println!(
        "ACCEPTANCE 3 survival: {} vs series {exact} within 3 sigma",
        est.mean
    );

    // strong Markov on three nested fixtures; obstacle features stay at 0.4+
    // so the default step policy keeps walks short
    let fixtures: Vec<(SpaceTimeDomain, SpaceTimeDomain, SpaceTimePoint, &str)> = {
        let c1 = Container::spatial_box(vec![-1.0], vec![1.0], 0.0, 1.0).unwrap();
        let outer_a = SpaceTimeDomain::without_obstacles(c1.clone());
        let inner_a = SpaceTimeDomain::new(
            c1.clone(),
            vec![Obstacle::Rect(
                ParabolicRectangle::from_bounds(vec![-0.5], vec![0.5], 0.35, 0.60).unwrap(),
            )],
        )
        .unwrap();
        let shared = Obstacle::Rect(
            ParabolicRectangle::from_bounds(vec![-0.9], vec![-0.3], 0.55, 0.80).unwrap(),
        );
        let outer_b = SpaceTimeDomain::new(c1.clone(), vec![shared.clone()]).unwrap();
        let inner_b = SpaceTimeDomain::new(
            c1,
            vec![
                shared,
                Obstacle::Rect(
                    ParabolicRectangle::from_bounds(vec![0.2], vec![0.8], 0.30, 0.55).unwrap(),
                ),
            ],
        )
        .unwrap();
        let c2 = Container::spatial_box(vec![-1.0, -1.0], vec![1.0, 1.0], 0.0, 1.0).unwrap();
        let outer_c = SpaceTimeDomain::without_obstacles(c2.clone());
        let inner_c = SpaceTimeDomain::new(
            c2,
            vec![Obstacle::Rect(
                ParabolicRectangle::from_bounds(vec![-0.5, -0.5], vec![0.5, 0.5], 0.40, 0.65)
                    .unwrap(),
            )],
        )
        .unwrap();
        vec![
            (inner_a, outer_a, pt(&[0.0], 0.9), "slab n=1"),
            (inner_b, outer_b, pt(&[0.0], 0.95), "two-obstacle n=1"),
            (inner_c, outer_c, pt(&[0.0, 0.0], 0.9), "slab n=2"),
        ]
    };
    for (inner, outer, pole, name) in &fixtures {
        let cfg = WalkConfig::default_for(inner, 2718);
        let r = strong_markov_residual(
            inner,
            outer,
            pole,
            |s| s.tag == BoundaryTag::Bottom,
            100_000,
            &cfg,
        )
        .unwrap();
        assert!(
            r.pass,
            "{name}: residual {} vs 3 sigma {}",
            r.residual,
            3.0 * r.sigma
        );
        println!(
            "ACCEPTANCE 3 markov [{name}]: residual {:.5} <= {:.5}",
            r.residual,
            3.0 * r.sigma
        );
    }

    // nested rectangles, one to three deep
    let c = Container::spatial_box(vec![-1.0], vec![1.0], 0.0, 1.0).unwrap();
    let core_obstacle = Obstacle::Rect(
        ParabolicRectangle::from_bounds(vec![-0.25], vec![0.25], 0.25, 0.41).unwrap(),
    );
    let domain = SpaceTimeDomain::new(c, vec![core_obstacle]).unwrap();
    let h1 = ParabolicRectangle::from_bounds(vec![-0.7], vec![0.7], 0.10, 0.55).unwrap();
    let h2 = ParabolicRectangle::from_bounds(vec![-0.5], vec![0.5], 0.15, 0.50).unwrap();
    let h3 = ParabolicRectangle::from_bounds(vec![-0.35], vec![0.35], 0.20, 0.45).unwrap();
    let pole = pt(&[0.0], 0.9);
    let cfg = WalkConfig::default_for(&domain, 1618);
    for k in 1..=3usize {
        let chain: Vec<ParabolicRectangle> =
            [&h1, &h2, &h3][..k].iter().map(|r| (*r).clone()).collect();
        let audit =
            nested_rectangle_bound(&domain, &chain, &pole, 100_000, 20_000, 4, &cfg).unwrap();
        assert!(
            audit.pass,
            "k={k}: lhs {} vs bound {} + 3 sigma {}",
            audit.lhs.mean,
            audit.bound,
            3.0 * audit.sigma
        );
        println!(
            "ACCEPTANCE 3 nested k={k}: lhs {:.5} <= {:.5} + 3*{:.5}",
            audit.lhs.mean, audit.bound, audit.sigma
        );
    }
    println!("ACCEPTANCE 3 caloric MC correctness: PASS");
}

/// Criterion 4: cylinder and ball bounds over a 20-configuration sweep.
#[test]
fn acceptance_04_universal_estimates() {
    let mut configs = 0usize;
    for n in [1usize, 2] {
        let d = SpaceTimeDomain::without_obstacles(
            Container::spatial_box(vec![-1.0; n], vec![1.0; n], 0.0, 1.0).unwrap(),
        );
        let cfg = WalkConfig::default_for(&d, 9000 + n as u64);
        let pole = pt(&vec![0.0; n], 0.9);
        let dist = d.essential_boundary_distance(&pole);
        let bottom_center = pt(&vec![0.0; n], 0.0);
        for ratio in [0.1, 0.3, 1.0] {
            let r = ratio * dist;
            // ball estimate
            let audit =
                check_ball_estimate(&d, &pole, &bottom_center, r, 100_000, &cfg).unwrap();
            assert!(audit.pass, "ball n={n} ratio={ratio}");
            configs += 1;
            // short cylinder
            let a = check_cylinder_estimate(
                &d,
                &pole,
                &bottom_center,
                r,
                0.5 * r * r,
                100_000,
                &cfg,
            )
            .unwrap();
            assert!(a.pass, "cylinder(s=r^2/2) n={n} ratio={ratio}");
            configs += 1;
        }
        for ratio in [0.1, 0.3] {
            let r = ratio * dist;
            // long cylinder
            let a = check_cylinder_estimate(&d, &pole, &bottom_center, r, 2.0 * r * r, 100_000, &cfg)
                .unwrap();
            assert!(a.pass, "cylinder(s=2r^2) n={n} ratio={ratio}");
            configs += 1;
        }
        // target strictly in the pole's future: estimate must be zero
        let low_pole = pt(&vec![0.0; n], 0.2);
        let future_center = pt(&vec![0.0; n], 0.95);
        let a = check_cylinder_estimate(
            &d,
            &low_pole,
            &future_center,
            0.1,
            0.005,
            20_000,
            &cfg,
        )
        .unwrap();
        assert_eq!(a.estimate.mean, 0.0, "future target n={n}");
        assert!(a.pass);
        configs += 1;
        // obstacle fixture: ball around the obstacle's top-face center
        let slab = ParabolicRectangle::from_bounds(vec![-0.5; n], vec![0.5; n], 0.30, 0.55)
            .unwrap();
        let dd = SpaceTimeDomain::new(
            Container::spatial_box(vec![-1.0; n], vec![1.0; n], 0.0, 1.0).unwrap(),
            vec![Obstacle::Rect(slab)],
        )
        .unwrap();
        let cfg2 = WalkConfig::default_for(&dd, 9100 + n as u64);
        let dist2 = dd.essential_boundary_distance(&pole);
        let face_center = pt(&vec![0.0; n], 0.55);
        let audit =
            check_ball_estimate(&dd, &pole, &face_center, 0.3 * dist2, 100_000, &cfg2).unwrap();
        assert!(audit.pass, "obstacle ball n={n}");
        configs += 1;
    }
    assert_eq!(configs, 20);
    println!("ACCEPTANCE 4 universal estimates: PASS ({configs} configurations)");
}

/// Criterion 5: cylinder projection against walk-on-spheres, interval and
/// disk fixtures with their exact values.
#[test]
fn acceptance_05_cylinder_projection() {
    let interval = BaseDomain::Box {
        x_lo: vec![0.0],
        x_hi: vec![1.0],
    };
    let a = check_cylinder_projection(&interval, &[0.3], |b| b[0] > 0.5, 100_000, 555).unwrap();
    assert!(a.pass, "interval: {} vs {}", a.caloric.mean, a.harmonic.mean);
    assert!((a.harmonic.mean - 0.3).abs() <= 3.0 * a.harmonic.stderr.max(1e-9));
    assert!((a.caloric.mean - 0.3).abs() <= 3.0 * a.caloric.stderr);
    let b = check_cylinder_projection(&interval, &[0.3], |b| b[0] < 0.5, 100_000, 556).unwrap();
    assert!((b.caloric.mean - 0.7).abs() <= 3.0 * b.caloric.stderr);

    let disk = BaseDomain::Ball {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    let quarter = |p: &[f64]| p[0] > 0.0 && p[1] >= 0.0;
    let c = check_cylinder_projection(&disk, &[0.0, 0.0], quarter, 100_000, 557).unwrap();
    assert!(c.pass, "disk: {} vs {}", c.caloric.mean, c.harmonic.mean);
    assert!((c.caloric.mean - 0.25).abs() <= 3.0 * c.caloric.stderr);
    let wos = walk_on_spheres(&disk, &[0.0, 0.0], quarter, 100_000, 558, 1e-6).unwrap();
    assert!((wos.mean - 0.25).abs() <= 3.0 * wos.stderr);
    println!(
        "ACCEPTANCE 5 cylinder projection: PASS (interval {:.4}/{:.4}, disk {:.4})",
        a.caloric.mean, b.caloric.mean, c.caloric.mean
    );
}

/// Frozen regression: minimizing-pole estimate for the reference
/// configuration below, pinned after the first verified run with the seed
/// and grid recorded in the options.
const FROZEN_MIN_POLE_ESTIMATE: f64 = 0.34434;

/// Criterion 6: the alternative on the reference triple (n=1, m=7, eps=1/7,
/// delta=3/7). Fully occupied target: the measure alternative fires with
/// three-sigma margin over eta and the minimizing-pole estimate reproduces
/// the frozen regression value. Empty target: the content alternative fires
/// at zero.
#[test]
fn acceptance_06_bourgain_alternative() {
    let q = ParabolicCube::unit(7, 1).unwrap();
    let triple = standard_triple(&q).unwrap();
    assert!((triple.eps - 1.0 / 7.0).abs() < 1e-15);
    assert!((triple.delta - 3.0 / 7.0).abs() < 1e-15);
    let (_, q_star) = standard_triple_children(&q).unwrap();
    let full = GridSet::generate(q_star.clone(), 1, &GridSpec::Full).unwrap();
    let feature = 1.0 / 7.0;
    let cfg = WalkConfig {
        dt: feature * feature / 400.0,
        seed: 20260810,
        bisection_tol: feature / 1000.0,
        max_steps: 10_000_000,
        bridge_correction: true,
    };
    let eta = AlphaLedger::new(1).eta_for(7);
    let opts = BourgainAuditOptions {
        pole_grid: 3,
        walks_per_pole: 20_000,
        walks_at_min: 100_000,
        truncate_below_target: true,
        e1_points: 200,
    };
    let rho = 2.0;
    let rec = bourgain_alternative_audit(&full, &triple, eta, rho, &cfg, &opts).unwrap();
    assert!(
        (rec.content - rec.content_max).abs() <= 1e-12,
        "full target content is maximal"
    );
    let min = rec.min_pole_estimate.expect("pole grid nonempty");
    assert!(
        min.mean - 3.0 * min.stderr >= eta,
        "alternative 1 must fire with margin: min {} sigma {} eta {eta}",
        min.mean,
        min.stderr
    );
    assert!(rec.alternative1_fires && rec.pass);
    // constant-ratio identity of the two potential bounds
    assert!(
        (rec.e2_e3_constant_ratio - (5.0_f64 / 12.0).exp()).abs() < 1e-12,
        "e2/e3 ratio"
    );
    // seed-pinned regression
    assert!(
        (min.mean - FROZEN_MIN_POLE_ESTIMATE).abs() <= 1e-12,
        "frozen min-pole regression: got {:.17}, frozen {FROZEN_MIN_POLE_ESTIMATE}",
        min.mean
    );

    let empty = GridSet::generate(q_star, 1, &GridSpec::Empty).unwrap();
    let rec2 = bourgain_alternative_audit(&empty, &triple, eta, rho, &cfg, &opts).unwrap();
    assert!(rec2.alternative2_fires && rec2.content == 0.0 && rec2.pass);
    println!(
        "ACCEPTANCE 6 alternative: PASS (min pole {:.5} >> eta {:.3e})",
        min.mean, eta
    );
}

/// Criterion 7a: the constant search must terminate with positive beta for
/// n in 1..=3. KNOWN RED: with the honest ledger threshold the deficit
/// requires ln m of order 2(n+2) alpha_n (about 2e3 for n=1), so the search
/// exhausts its m <= 1e6 bound. See the decisions ledger for the full
/// analysis; the machinery is demonstrated with order-one thresholds in the
/// library's unit tests.
#[test]
fn acceptance_07a_constants_terminate() {
    for n in 1..=3u32 {
        match lemma2_constants(n) {
            Ok(rep) => {
                assert!(rep.beta > 0.0, "beta must be positive");
                println!("ACCEPTANCE 7a n={n}: PASS (m={}, beta={})", rep.m, rep.beta);
            }
            Err(e) => panic!(
                "ACCEPTANCE 7a n={n}: FAIL — {e}; unattainable with the honest \
                 alpha ledger (alpha_1 = {:.1}), which forces m ≈ exp(2(n+2) alpha)",
                AlphaLedger::new(n as usize).alpha
            ),
        }
    }
}

/// Criterion 7b: the stipulation margin at the returned exponent must be at
/// least 1e-9. KNOWN RED twice over: no report exists (7a), and the margin
/// at the crossing is bounded by (1/2) m^(-(d+1)(n+2)) <= 1e-13 for every
/// admissible m, so the stated tolerance cannot hold for any m >= 7.
#[test]
fn acceptance_07b_rho_stipulation_margin() {
    for n in 1..=3u32 {
        let rep = lemma2_constants(n).unwrap_or_else(|e| {
            panic!(
                "ACCEPTANCE 7b n={n}: FAIL — no constants report ({e}); and the \
                 crossing margin (1/2) m^-(d+1)(n+2) is below 1e-9 for every m >= 7"
            )
        });
        assert!(
            rep.rho_margin >= 1e-9,
            "ACCEPTANCE 7b n={n}: FAIL — margin {} < 1e-9",
            rep.rho_margin
        );
    }
}

/// Criterion 7c: the linear ring count never satisfies its requirement for
/// any m up to 1e6 (PASSES), while the corrected count must succeed in range
/// (KNOWN RED with the honest threshold: the analytic success threshold sits
/// at ln m of order 2(n+2) alpha_n, far beyond ln 1e6 = 13.8).
#[test]
fn acceptance_07c_error_regression() {
    let rep = bourgain_error_regression(M_SEARCH_BOUND);
    assert!(
        !rep.original_ever_succeeds,
        "linear ring count must never satisfy the requirement"
    );
    assert!(rep.original_min.lhs > -3.0);
    assert!(rep.recomputation_residual <= 1e-12, "evaluation cross-check");
    println!(
        "ACCEPTANCE 7c linear-count leg: PASS (min lhs {:.3} at m={} stays above -3)",
        rep.original_min.lhs, rep.original_min.m
    );
    for c in &rep.corrected {
        assert!(
            c.first_success_m.is_some(),
            "ACCEPTANCE 7c n={}: FAIL — corrected ring count first succeeds at \
             ln m ≈ {:.0} (m ≈ 1e{:.0}), beyond the 1e6 range; honest-threshold \
             consequence, see the decisions ledger",
            c.n,
            c.threshold_ln_m,
            c.threshold_ln_m / std::f64::consts::LN_10
        );
    }
}

/// Criterion 8: the tree algorithm certifies the covering and residual
/// goals on the bottom-face slab fixture and reports NotApplicable on the
/// normalized-volume measure.
#[test]
fn acceptance_08_dimension_tree() {
    let slab = GridSet::generate(
        ParabolicCube::unit(3, 1).unwrap(),
        4,
        &GridSpec::BottomSlab,
    )
    .unwrap();
    let mu = MeasureOracle::Frostman(build_frostman(&slab, 1.0).unwrap());
    let params = TreeParams {
        rho: 1.0,
        lambda: 1.0,
        eps: None,
        delta: 1.0 / 27.0,
    };
    let report = build_dimension_tree(&slab, &mu, &params).unwrap();
    assert!(report.pass, "slab fixture goals");
    for check in &report.content_checks {
        assert!(
            check.pass,
            "covering goal at alpha={}: {} vs {}",
            check.alpha, check.value, check.bound
        );
    }
    assert!(report.mu_outside <= report.mu_outside_bound);

    let full = GridSet::generate(ParabolicCube::unit(3, 1).unwrap(), 2, &GridSpec::Full).unwrap();
    let vol = MeasureOracle::NormalizedVolume {
        root: full.root().clone(),
    };
    let params2 = TreeParams {
        rho: 1.0,
        lambda: 0.5,
        eps: None,
        delta: 1.0 / 9.0,
    };
    match build_dimension_tree(&full, &vol, &params2) {
        Err(caloric::Error::NotApplicable { count, .. }) => assert!(count >= 1),
        other => panic!("expected NotApplicable, got {other:?}"),
    }
    println!("ACCEPTANCE 8 dimension tree: PASS");
}
