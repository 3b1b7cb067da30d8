mod common;

use proptest::prelude::*;
use zvonkin_lab::model::{GrowthTag, VectorFieldSpec};
use zvonkin_lab::simulate::{map_paths, unit_diffusion, FnSde, PathSample, Scheme, TimeGrid};
use zvonkin_lab::tci::*;

const OU_TAG: GrowthTag = GrowthTag::Dissipative {
    r: 0.0,
    kappa1: 1.0,
    kappa2: 0.0,
    kappa3: 1.0,
};

fn brownian() -> FnSde<impl Fn(f64, &[f64], &mut [f64]) + Sync, fn(f64, &[f64], &mut [f64])> {
    FnSde::new(
        1,
        "bm",
        |_t, _x: &[f64], out: &mut [f64]| out[0] = 0.0,
        unit_diffusion,
    )
}

fn ou_paths(n: usize, steps: usize, seed: u64) -> Vec<PathSample> {
    let ou = zvonkin_lab::model::DiniModelSpec::ornstein_uhlenbeck(1, 1.0);
    map_paths(
        &ou,
        &[0.0],
        &TimeGrid::new(1.0, steps),
        seed,
        n,
        Scheme::EulerMaruyama,
        |p| p.clone(),
    )
    .unwrap()
}

#[test]
fn thresholds_are_homogeneous_and_pure() {
    let tags = [
        OU_TAG,
        GrowthTag::Linear { kappa4: 0.7 },
        GrowthTag::Dissipative {
            r: 1.5,
            kappa1: 0.8,
            kappa2: 0.1,
            kappa3: 2.0,
        },
    ];
    for tag in &tags {
        let l1 = lambda_threshold(tag, 1.3, 0.9);
        let l2 = lambda_threshold(tag, 2.6, 0.9);
        assert_eq!(l2.value, l1.value / 4.0);
        assert_eq!(lambda_threshold(tag, 1.3, 0.9), l1);
        let d1 = delta_threshold(tag, 1.3, 0.9);
        assert_eq!(delta_threshold(tag, 2.6, 0.9), d1 / 4.0);
        assert_eq!(delta_threshold(tag, 1.3, 0.9).to_bits(), d1.to_bits());
    }
    // T-doubling halves δ when T enters only as the prefactor
    assert_eq!(
        delta_threshold(&OU_TAG, 1.0, 2.0),
        delta_threshold(&OU_TAG, 1.0, 1.0) / 2.0
    );
    assert_eq!(
        delta_threshold(&GrowthTag::Linear { kappa4: 0.0 }, 1.0, 2.0),
        0.0625
    );
}

#[test]
fn t1_constants_follow_delta() {
    let a = t1_constant(0.0625).unwrap();
    assert_eq!((a.transformed, a.original), (4.0, 16.0));
    let b = t1_constant(0.125).unwrap();
    assert_eq!((b.transformed, b.original), (2.0, 8.0));
    assert!(t1_constant(1e-12).unwrap().transformed > 1e11);
    assert!(t1_constant(0.0).is_err());
}

#[test]
fn zero_parameter_gives_exactly_one() {
    let paths = ou_paths(300, 32, 4);
    let e = exp_functional_estimate(&paths, 0.0, 2.0).unwrap();
    assert_eq!(e.estimate, 1.0);
    let (_, tm) = common::ou_pipeline();
    let g = gaussian_tail_estimate(
        &tm,
        &[0.0],
        0.0,
        300,
        &TimeGrid::new(1.0, 32),
        4,
        Scheme::EulerMaruyama,
    )
    .unwrap();
    assert_eq!(g.estimate, 1.0);
}

#[test]
fn cameron_martin_brownian_functional() {
    let paths = map_paths(
        &brownian(),
        &[0.0],
        &TimeGrid::new(1.0, 1024),
        11,
        100_000,
        Scheme::EulerMaruyama,
        |p| p.clone(),
    )
    .unwrap();
    let e = exp_functional_estimate(&paths, 0.125, 2.0).unwrap();
    let exact = 1.0 / 0.5f64.cos().sqrt();
    assert!((exact - 1.0675).abs() < 1e-4);
    assert!(
        (e.estimate - exact).abs() <= 3.0 * e.stderr,
        "{} ± {} vs {exact}",
        e.estimate,
        e.stderr
    );
    assert_eq!(e.diagnostics.verdict, Verdict::Stable);
}

#[test]
fn ou_small_lambda_first_order() {
    let paths = ou_paths(100_000, 256, 12);
    let lambda = 0.05;
    let e = exp_functional_estimate(&paths, lambda, 2.0).unwrap();
    let integrals = path_integrals(&paths, 2.0);
    let mean = integrals.iter().sum::<f64>() / integrals.len() as f64;
    // ∫₀¹ (1 - e^{-2t})/2 dt
    let oracle = 0.5 - 0.25 * (1.0 - (-2.0f64).exp());
    assert!((oracle - 0.2838).abs() < 1e-4);
    // Jensen on the empirical measure, then first order in λ
    assert!(e.log_estimate >= lambda * mean);
    assert!(
        (e.log_estimate / lambda - oracle).abs() < 0.01,
        "{}",
        e.log_estimate / lambda
    );
}

#[test]
fn tail_sweep_separates_stable_and_unstable() {
    let (_, tm) = common::ou_pipeline();
    let th = ThresholdSet::from_fit(
        &zvonkin_lab::zvonkin::verify_tilde_conditions(&tm, &Default::default()).unwrap(),
        1.0,
    )
    .unwrap();
    assert_eq!(th.delta_max, 0.0625);
    let grid = TimeGrid::new(1.0, 32);
    let rows = gaussian_tail_sweep(
        &tm,
        &[0.0],
        &[0.05, 10.0],
        &[2_500, 10_000, 40_000],
        th.delta_max,
        &grid,
        8,
        Scheme::EulerMaruyama,
    )
    .unwrap();
    for r in &rows {
        let expected = if r.delta < th.delta_max {
            Verdict::Stable
        } else {
            Verdict::Unstable
        };
        assert_eq!(r.result.diagnostics.verdict, expected, "{r:?}");
        assert_eq!(r.below_threshold, r.delta < th.delta_max);
    }
}

#[test]
fn t2_constant_shifts_on_ou() {
    let ou = zvonkin_lab::model::DiniModelSpec::ornstein_uhlenbeck(1, 1.0);
    let steps = 64;
    let grid = TimeGrid::new(1.0, steps);
    let hs = [0.0, 0.1, 0.2, 0.4];
    let shifts: Vec<VectorFieldSpec> = hs
        .iter()
        .map(|&c| VectorFieldSpec::Constant { value: vec![c] })
        .collect();
    let sec = t2_check(
        &ou,
        &[0.0],
        &shifts,
        &grid,
        &T2Config {
            n_paths: 256,
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(sec.rows[0].skipped && sec.rows[0].entropy == 0.0 && sec.rows[0].ratio.is_none());
    // synchronous coupling: ΔX_{k+1} = (1 - dt)ΔX_k + h dt, so sup|ΔX| = h(1 - (1 - dt)^n)
    let dt = 1.0 / steps as f64;
    let gap = 1.0 - (1.0 - dt).powi(steps as i32);
    for (row, &h) in sec.rows.iter().zip(&hs).skip(1) {
        let closed = 0.5 * h * h;
        // the integrand is constant: only rounding separates the estimate from ½h²T
        assert!(
            (row.entropy - closed).abs() <= 3.0 * row.entropy_stderr + 1e-12 * closed,
            "{row:?}"
        );
        assert!(row.w2_exact <= h * gap + 1e-12);
        let ratio = row.ratio.unwrap();
        assert!(ratio.is_finite() && ratio <= 2.0 * gap * gap + 1e-9);
        assert!((ratio - row.ratio_half.unwrap()).abs() < 0.1 * ratio);
    }
    for k in 1..3 {
        let (a, b) = (&sec.rows[k], &sec.rows[k + 1]);
        assert!((b.entropy / a.entropy - 4.0).abs() < 0.4);
        assert!((b.w2_exact / a.w2_exact - 2.0).abs() < 0.2);
    }
    assert!(sec.stable && sec.c2_hat.is_some());
}

#[test]
fn coupling_on_ou_is_exactly_quadratic() {
    let ou = zvonkin_lab::model::DiniModelSpec::ornstein_uhlenbeck(1, 1.0);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = [0.0, 0.25, 0.5, 1.0]
        .iter()
        .map(|&r| (vec![0.3], vec![0.3 + r]))
        .collect();
    let rep = coupling_lipschitz_check(
        &ou,
        &pairs,
        64,
        &TimeGrid::new(1.0, 32),
        2,
        Scheme::EulerMaruyama,
    )
    .unwrap();
    assert_eq!(rep.rows[0].mean_sup_sq, 0.0);
    for row in &rep.rows[1..] {
        assert!(
            (row.mean_sup_sq - row.distance * row.distance).abs() < 1e-12,
            "{row:?}"
        );
    }
    assert!((rep.slope.unwrap() - 2.0).abs() < 1e-9);
    assert!((rep.prefactor - 1.0).abs() < 1e-9);
}

#[test]
fn invariance_thousand_trials() {
    let r = invariance_suite(&[2, 3, 4, 5, 6], 1000, 21).unwrap();
    assert!(r.passed(), "{:?}", r.failures.first());
    assert!(r.ensure().is_ok());
    assert!(r.max_w_gap <= 1e-10 && r.max_entropy_gap <= 1e-12);
    assert!(r.min_sandwich_slack >= -1e-12);
    // every trial is distinct and the identity trial is first
    assert_eq!(r.records[0].map, SineMap::identity());
}

#[test]
fn counterexamples_serialize() {
    let mut r = invariance_suite(&[3], 2, 1).unwrap();
    let rec = &r.records[1];
    let mu = zvonkin_lab::transport::EmpiricalMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
    r.failures.push(Counterexample {
        trial: 1,
        property: Property::Sandwich,
        map: rec.map,
        p: rec.p,
        mu: mu.clone(),
        nu: mu,
        lhs: 1.0,
        rhs: 0.5,
        tolerance: 1e-12,
    });
    assert!(!r.passed() && r.ensure().is_err());
    let mut buf = Vec::new();
    r.write_counterexamples(&mut buf).unwrap();
    let back: Vec<Counterexample> = serde_json::from_slice(&buf).unwrap();
    assert_eq!(back, r.failures);
}

#[test]
fn pipeline_report_on_ou() {
    let (model, tm) = common::ou_pipeline();
    let cfg = TciConfig {
        seed: 17,
        time_steps: 32,
        exp_functional: Some(ExpFunctionalCheck {
            n_paths: 2_000,
            ..Default::default()
        }),
        gaussian_tail: Some(TailCheck {
            sizes: vec![1_000, 4_000, 16_000],
            ..Default::default()
        }),
        t2: Some(T2Check {
            n_paths: 128,
            ..Default::default()
        }),
        coupling: Some(CouplingCheck {
            n_pairs: 64,
            ..Default::default()
        }),
        invariance: Some(InvarianceCheck {
            trials: 200,
            ..Default::default()
        }),
        ..Default::default()
    };
    let a = run_tci(&model, &tm, &cfg);
    assert!(
        a.all_passed(),
        "{:#?}",
        a.records
            .iter()
            .filter(|r| r.verdict != CheckVerdict::Pass)
            .collect::<Vec<_>>()
    );
    assert_eq!(a.thresholds.as_ref().unwrap().delta_max, 0.0625);
    let t1 = a.constants.t1.unwrap();
    assert_eq!(t1.delta, 0.05);
    assert_eq!(t1.original, 4.0 / (4.0 * 0.05));
    assert_eq!(a.t2.as_ref().unwrap().rows.len(), 3);
    assert!(a
        .records
        .iter()
        .all(|r| r.provenance.n > 0 || r.name.starts_with("threshold")));

    let b = run_tci(&model, &tm, &cfg);
    let (mut ja, mut jb, mut ca, mut cb) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    a.write_json(&mut ja).unwrap();
    b.write_json(&mut jb).unwrap();
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ja, jb);
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert_eq!(text.lines().count(), a.records.len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimates_nondecreasing_in_parameter(
        logs in proptest::collection::vec(0.0f64..3.0, 1..200),
        a in 0.0f64..2.0,
        b in 0.0f64..2.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let lo_est = gaussian_tail_from_squares(&logs, lo).unwrap();
        let hi_est = gaussian_tail_from_squares(&logs, hi).unwrap();
        prop_assert!(lo_est.estimate <= hi_est.estimate * (1.0 + 1e-14));
        prop_assert_eq!(gaussian_tail_from_squares(&logs, 0.0).unwrap().estimate, 1.0);
    }

    #[test]
    fn threshold_formulas_scale(sigma in 0.1f64..5.0, t in 0.1f64..5.0, k1 in 0.1f64..3.0, k3 in 0.0f64..3.0, r in -0.5f64..2.0) {
        let tag = GrowthTag::Dissipative { r, kappa1: k1, kappa2: 0.0, kappa3: k3 };
        let th = ThresholdSet::new(tag, sigma, t).unwrap();
        prop_assert!(th.lambda_max.value > 0.0 && th.delta_max > 0.0);
        prop_assert_eq!(th.lambda_max.strict, r > 0.0);
        prop_assert_eq!(ThresholdSet::new(tag, sigma, t).unwrap(), th.clone());
        let doubled = delta_threshold(&tag, sigma, 2.0 * t);
        prop_assert!((doubled - th.delta_max / 2.0).abs() <= 1e-15 * th.delta_max);
    }
}
