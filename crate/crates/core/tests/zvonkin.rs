mod common;

use proptest::prelude::*;
use zvonkin_lab::model::{DiniModelSpec, SingularModelSpec, VectorFieldSpec};
use zvonkin_lab::numerics::solve_tridiagonal;
use zvonkin_lab::simulate::{ReferenceSde, Scheme, TimeGrid};
use zvonkin_lab::zvonkin::*;
use zvonkin_lab::Error;

fn sine_phi(amp: f64, points: usize) -> Homeomorphism {
    let sp = SpaceGrid::new(1, 4.0, points).unwrap();
    build_phi(
        GridFunction::from_fn(sp, None, |_t, x| vec![amp * x[0].sin()]).unwrap(),
        1.0,
        DINI_GRAD_THRESHOLD,
    )
    .unwrap()
}

fn indicator_model() -> SingularModelSpec {
    let mut m = SingularModelSpec::ornstein_uhlenbeck(1, 1.0, 1.0);
    m.singular_drift = VectorFieldSpec::Indicator {
        value: vec![1.0],
        radius: 1.0,
    };
    m
}

/// `(λ - ½∂²)v = 1_{[-1,1]}` on `[-R, R]` with zero ends: cell averages of the
/// indicator computed by exact interval overlap, Thomas solve.
fn thomas_oracle(lambda: f64, radius: f64, points: usize) -> f64 {
    let dx = 2.0 * radius / (points - 1) as f64;
    let n = points - 2;
    let c = 0.5 / (dx * dx);
    let lower = vec![-c; n];
    let upper = vec![-c; n];
    let diag = vec![lambda + 2.0 * c; n];
    let mut rhs: Vec<f64> = (1..=n)
        .map(|i| {
            let x = -radius + i as f64 * dx;
            let (lo, hi) = ((x - 0.5 * dx).max(-1.0), (x + 0.5 * dx).min(1.0));
            (hi - lo).max(0.0) / dx
        })
        .collect();
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs).unwrap();
    rhs[n / 2]
}

#[test]
fn elliptic_first_iterate_matches_oracles() {
    let cfg = EllipticConfig {
        points: 3201,
        max_iter: 1,
        ..Default::default()
    };
    let s = solve_u_elliptic(&indicator_model(), 4.0, &cfg).unwrap();
    let u0 = s.u.eval_vec(0.0, &[0.0]).unwrap()[0];
    let fine = thomas_oracle(4.0, cfg.radius, 2 * cfg.points - 1);
    assert!((u0 - fine).abs() < 1e-6, "{u0} vs {fine}");
    // closed form on the line: ¼(1 - e^{-√(2λ)})
    let exact = 0.25 * (1.0 - (-(8.0f64).sqrt()).exp());
    assert!((u0 - exact).abs() < 1e-5, "{u0} vs {exact}");
}

#[test]
fn elliptic_iteration_contracts() {
    let s = solve_u_elliptic(&indicator_model(), 4.0, &EllipticConfig::default()).unwrap();
    assert!(s.converged);
    assert!(s.history.iter().filter_map(|r| r.ratio).all(|r| r < 1.0));
}

#[test]
fn elliptic_sweep_decays_at_least_at_predicted_rate() {
    let mut m = SingularModelSpec::ornstein_uhlenbeck(1, 1.0, 1.0);
    m.singular_drift = VectorFieldSpec::SingularPower {
        coeff: 1.0,
        gamma: 0.2,
        direction: vec![1.0],
    };
    m.p = 4.0;
    let lambdas: Vec<f64> = (2..=8).map(|k| 2f64.powi(k)).collect();
    let sweep = elliptic_lambda_sweep(&m, &lambdas, &EllipticConfig::default()).unwrap();
    assert_eq!(sweep.predicted, -0.375);
    assert!(sweep.decays);
    assert!(sweep.slope_u <= sweep.predicted, "{}", sweep.slope_u);
}

#[test]
fn parabolic_benchmark_certifies() {
    let m = DiniModelSpec::log_square_benchmark();
    let cfg = ParabolicConfig::default();
    let auto = solve_u_parabolic_auto(&m, &LambdaStrategy::default(), &cfg).unwrap();
    let s = &auto.solution;
    assert!(s.converged && s.grad_sup < DINI_GRAD_THRESHOLD);
    assert!(s.residual <= 2.0 * cfg.tol, "{}", s.residual);
    assert!(s.history.iter().filter_map(|r| r.ratio).all(|r| r < 1.0));
    assert!(s.u_sup <= s.resolvent_bound + 1e-3);
    assert!(s.u_sup <= 1.5 / s.lambda + 1e-3);
    assert_eq!(auto.trace.last().unwrap().outcome, "accepted");
}

#[test]
fn parabolic_decays_in_lambda() {
    let m = DiniModelSpec::log_square_benchmark();
    let cfg = ParabolicConfig {
        points: 301,
        time_steps: 100,
        ..Default::default()
    };
    let rows = parabolic_lambda_sweep(&m, &[2.0, 8.0, 32.0, 128.0], &cfg).unwrap();
    for w in rows.windows(2) {
        assert!(
            w[1].u_sup < w[0].u_sup && w[1].grad_sup < w[0].grad_sup,
            "{rows:?}"
        );
    }
}

#[test]
fn forced_small_lambda_is_rejected_by_the_threshold() {
    let m = DiniModelSpec::log_square_benchmark();
    let cfg = ParabolicConfig {
        points: 301,
        time_steps: 100,
        ..Default::default()
    };
    let s = solve_u_parabolic(&m, 0.01, &cfg).unwrap();
    assert!(matches!(
        build_phi(s.u, 0.01, DINI_GRAD_THRESHOLD),
        Err(Error::GradientTooLarge { .. })
    ));
}

#[test]
fn gradient_estimate_scaling_on_heat_semigroup() {
    let m = DiniModelSpec {
        regular_drift: VectorFieldSpec::Zero,
        ..DiniModelSpec::ornstein_uhlenbeck(1, 1.0)
    };
    let reference = ReferenceSde(&m);
    let sign = |x: &[f64]| x[0].signum();
    let taus: Vec<f64> = (0..=4).map(|k| 2f64.powi(-k)).collect();
    let cfg = GradientCheckConfig {
        samples: 100_000,
        ..Default::default()
    };
    let rep = check_gradient_estimate(&reference, &sign, 0.0, &[0.0], &taus, &cfg).unwrap();
    for row in &rep.rows {
        let exact = 2.0 / (2.0 * std::f64::consts::PI * row.tau).sqrt();
        assert!((row.gradient - exact).abs() <= 0.05 * exact, "{row:?}");
    }
    assert!((rep.exponent.unwrap() + 0.5).abs() <= 0.1);
}

#[test]
fn p0_of_sign_matches_gaussian_cdf() {
    let m = DiniModelSpec {
        regular_drift: VectorFieldSpec::Zero,
        ..DiniModelSpec::ornstein_uhlenbeck(1, 1.0)
    };
    let (v, se) = estimate_p0(
        &ReferenceSde(&m),
        &|x: &[f64]| x[0].signum(),
        0.0,
        1.0,
        &[0.5],
        50_000,
        8,
        3,
    )
    .unwrap();
    let exact = 2.0 * common::normal_cdf(0.5) - 1.0;
    assert!((exact - 0.3829).abs() < 1e-4);
    assert!((v - exact).abs() <= 3.0 * se, "{v} ± {se} vs {exact}");
}

#[test]
fn inverse_matches_bisection() {
    let phi = sine_phi(0.4, 40001);
    assert!((phi.grad_bound - 0.4).abs() < 1e-6);
    let x = phi.invert(0.0, &[1.0]).unwrap()[0];
    let oracle = common::bisect(|x| x + 0.4 * x.sin() - 1.0, 0.0, 1.0);
    assert!((x - oracle).abs() < 1e-8, "{x} vs {oracle}");
}

#[test]
fn transformed_sigma_obeys_product_bound() {
    let (_, tm) = common::manufactured_ou(1.3);
    let fit = verify_tilde_conditions(&tm, &TildeGridConfig::default()).unwrap();
    assert!(fit.sigma_sup <= (1.0 + tm.phi.grad_bound) * 1.3 + 1e-12);
}

#[test]
fn linear_tag_fit_recovers_bounded_drift() {
    let mut m = SingularModelSpec::ornstein_uhlenbeck(1, 1.0, 1.0);
    m.growth_drift = VectorFieldSpec::Constant { value: vec![0.7] };
    m.growth = zvonkin_lab::model::GrowthTag::Linear { kappa4: 1.0 };
    let sp = SpaceGrid::new(1, 6.0, 121).unwrap();
    let phi = build_phi(GridFunction::zeros(sp, None), 1.0, SINGULAR_GRAD_THRESHOLD).unwrap();
    let fit = verify_tilde_conditions(
        &transformed_singular(phi, &m, 1.0).unwrap(),
        &TildeGridConfig::default(),
    )
    .unwrap();
    match fit.tag {
        zvonkin_lab::model::GrowthTag::Linear { kappa4 } => assert!((kappa4 - 0.7).abs() < 1e-12),
        t => panic!("{t:?}"),
    }
}

#[test]
fn strongly_dissipative_model_keeps_finite_constants() {
    let mut m = SingularModelSpec::ornstein_uhlenbeck(1, 1.0, 1.0);
    m.growth_drift = VectorFieldSpec::RadialPower {
        coeff: -1.0,
        power: 2.0,
    };
    m.growth = zvonkin_lab::model::GrowthTag::Dissipative {
        r: 2.0,
        kappa1: 1.0,
        kappa2: 0.0,
        kappa3: 1.0,
    };
    let sp = SpaceGrid::new(1, 6.0, 6001).unwrap();
    let u = GridFunction::from_fn(sp, None, |_t, x| vec![0.1 * x[0].sin()]).unwrap();
    let phi = build_phi(u, 4.0, SINGULAR_GRAD_THRESHOLD).unwrap();
    assert!(phi.grad_bound <= 0.1 + 1e-9);
    let fit = verify_tilde_conditions(
        &transformed_singular(phi, &m, 4.0).unwrap(),
        &TildeGridConfig::default(),
    )
    .unwrap();
    match fit.tag {
        zvonkin_lab::model::GrowthTag::Dissipative {
            kappa1,
            kappa2,
            kappa3,
            ..
        } => {
            assert!(kappa1 > 0.0 && kappa2.is_finite() && kappa3.is_finite())
        }
        t => panic!("{t:?}"),
    }
    assert!(fit.negative_radius.is_some());
}

#[test]
fn zero_transform_is_exactly_consistent() {
    let m = SingularModelSpec::ornstein_uhlenbeck(1, 1.0, 1.0);
    let sp = SpaceGrid::new(1, 10.0, 201).unwrap();
    let phi = build_phi(GridFunction::zeros(sp, None), 1.0, SINGULAR_GRAD_THRESHOLD).unwrap();
    let tm = transformed_singular(phi, &m, 1.0).unwrap();
    let cfg = ConsistencyConfig {
        paths: 50,
        ..Default::default()
    };
    let r = pathwise_consistency(&m, &tm, &[0.5], &cfg).unwrap();
    assert!(r.rows.iter().all(|row| row.error == 0.0));
}

#[test]
fn manufactured_transform_is_pathwise_consistent() {
    let (orig, tm) = common::manufactured_ou(1.0);
    let r = pathwise_consistency(
        &orig,
        &tm,
        &[0.5],
        &ConsistencyConfig {
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(r.monotone);
    assert!(r.rate.unwrap() >= 0.4);
    assert!(r.rows.last().unwrap().error <= 5e-3);
}

#[test]
fn dini_pipeline_is_pathwise_consistent() {
    let m = DiniModelSpec::log_square_benchmark();
    let cfg = ParabolicConfig {
        points: 301,
        time_steps: 100,
        ..Default::default()
    };
    let auto = solve_u_parabolic_auto(&m, &LambdaStrategy::default(), &cfg).unwrap();
    let lambda = auto.solution.lambda;
    let phi = build_phi(auto.solution.u, lambda, DINI_GRAD_THRESHOLD).unwrap();
    let tm = transformed_dini(phi, &m, lambda).unwrap();
    let r = pathwise_consistency(
        &m,
        &tm,
        &[0.3],
        &ConsistencyConfig {
            paths: 200,
            ..Default::default()
        },
    )
    .unwrap();
    let (first, last) = (&r.rows[0], r.rows.last().unwrap());
    assert!(last.error + 2.0 * last.stderr < first.error, "{r:?}");
}

#[test]
fn transformed_paths_stay_bi_lipschitz() {
    // sampled path pairs: (1-g) ρ ≤ ρ∘Φ ≤ (1+g) ρ for the sup metric
    let phi = sine_phi(0.4, 8001);
    let g = phi.grad_bound;
    let grid = TimeGrid::new(1.0, 64);
    let m = DiniModelSpec {
        regular_drift: VectorFieldSpec::Zero,
        ..DiniModelSpec::ornstein_uhlenbeck(1, 1.0)
    };
    for seed in 0..20 {
        let a = zvonkin_lab::simulate::simulate_em(&m, &[0.2], &grid, seed).unwrap();
        let b = zvonkin_lab::simulate::simulate_em(&m, &[-0.4], &grid, seed + 100).unwrap();
        let (mut rho, mut rho_phi) = (0.0f64, 0.0f64);
        for k in 0..grid.n_nodes() {
            let (x, y) = (a.state(k)[0], b.state(k)[0]);
            if x.abs() > 3.9 || y.abs() > 3.9 {
                continue;
            }
            rho = rho.max((x - y).abs());
            rho_phi = rho_phi
                .max((phi.phi(0.0, &[x]).unwrap()[0] - phi.phi(0.0, &[y]).unwrap()[0]).abs());
        }
        assert!((1.0 - g) * rho <= rho_phi + 1e-12 && rho_phi <= (1.0 + g) * rho + 1e-12);
    }
    let _ = Scheme::EulerMaruyama;
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn phi_is_bi_lipschitz(x in -3.9f64..3.9, y in -3.9f64..3.9) {
        prop_assume!((x - y).abs() > 1e-9);
        let phi = sine_phi(0.4, 2001);
        let g = phi.grad_bound;
        let r = (phi.phi(0.0, &[x]).unwrap()[0] - phi.phi(0.0, &[y]).unwrap()[0]).abs() / (x - y).abs();
        prop_assert!(r >= 1.0 - g - 1e-12 && r <= 1.0 + g + 1e-12);
        prop_assert!(r >= 0.6 - 1e-12 && r <= 1.4 + 1e-12);
    }

    #[test]
    fn inverse_round_trips(y in -3.0f64..3.0, z in -3.0f64..3.0) {
        let sp = SpaceGrid::new(2, 4.0, 161).unwrap();
        let u = GridFunction::from_fn(sp, None, |_t, x| vec![0.2 * x[1].sin(), 0.15 * (x[0] * 0.7).cos()]).unwrap();
        let phi = build_phi(u, 1.0, SINGULAR_GRAD_THRESHOLD).unwrap();
        let x = phi.invert(0.0, &[y, z]).unwrap();
        let back = phi.phi(0.0, &x).unwrap();
        prop_assert!((back[0] - y).abs() <= 1e-8 && (back[1] - z).abs() <= 1e-8);
    }

    #[test]
    fn interpolation_reproduces_nodes(i in 0usize..41, j in 0usize..41) {
        let sp = SpaceGrid::new(2, 2.0, 41).unwrap();
        let u = GridFunction::from_fn(sp, None, |_t, x| vec![x[0].exp() * x[1], x[0] - x[1] * x[1]]).unwrap();
        let node = sp.node_index([i, j]);
        let v = u.eval_vec(0.0, &sp.node(node)).unwrap();
        prop_assert_eq!(v.as_slice(), u.node_value(0, node));
    }
}
