#![allow(dead_code)]

use zvonkin_lab::model::{MatrixFieldSpec, SingularModelSpec};
use zvonkin_lab::simulate::{FnSde, Sde};
use zvonkin_lab::zvonkin::{
    build_phi, transformed_singular, GridFunction, SpaceGrid, TransformedModel,
};

pub const SYNTH_AMP: f64 = 0.1;
pub const SYNTH_FREQ: f64 = 1.0;
pub const SYNTH_LAMBDA: f64 = 2.0;

/// OU with an extra drift chosen so that `u = a sin(ωx)` solves
/// `(½σ²∂² + b₁∂ - λ)u = -b₁` exactly; returns the original equation
/// (`b₁ - x`, `σ`) and the transform built from `u` on a fine grid.
pub fn manufactured_ou(sigma: f64) -> (impl Sde, TransformedModel) {
    let (a, w, lambda) = (SYNTH_AMP, SYNTH_FREQ, SYNTH_LAMBDA);
    let b1 = move |x: f64| {
        let u = a * (w * x).sin();
        let du = a * w * (w * x).cos();
        let d2u = -a * w * w * (w * x).sin();
        (lambda * u - 0.5 * sigma * sigma * d2u) / (1.0 + du)
    };
    let original = FnSde::new(
        1,
        "manufactured-ou",
        move |_t, x: &[f64], out: &mut [f64]| out[0] = b1(x[0]) - x[0],
        move |_t, _x: &[f64], out: &mut [f64]| out[0] = sigma,
    );
    let space = SpaceGrid::new(1, 10.0, 20001).unwrap();
    let u = GridFunction::from_fn(space, None, |_t, x| vec![a * (w * x[0]).sin()]).unwrap();
    let phi = build_phi(u, lambda, 0.5).unwrap();
    let mut spec = SingularModelSpec::ornstein_uhlenbeck(1, sigma, 1.0);
    spec.sigma = MatrixFieldSpec::ScaledIdentity { scale: sigma };
    let tm = transformed_singular(phi, &spec, lambda).unwrap();
    (original, tm)
}

/// Minimum over all `n!` permutation couplings (Heap's algorithm).
pub fn brute_force(cost: &[f64], n: usize) -> f64 {
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |p: &[usize]| {
        p.iter()
            .enumerate()
            .map(|(i, &j)| cost[i * n + j])
            .sum::<f64>()
            / n as f64
    };
    let mut best = eval(&perm);
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Root of a continuous increasing function on `[lo, hi]` by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// OU `dX = -X dt + dW` on `[0, 1]` pushed through the elliptic pipeline,
/// whose transform is the identity because the singular drift vanishes.
pub fn ou_pipeline() -> (SingularModelSpec, TransformedModel) {
    use zvonkin_lab::zvonkin::{solve_u_elliptic, EllipticConfig};
    let model = SingularModelSpec::ornstein_uhlenbeck(1, 1.0, 1.0);
    let lambda = 1.0;
    let sol = solve_u_elliptic(&model, lambda, &EllipticConfig::default()).unwrap();
    let phi = build_phi(sol.u, lambda, 0.5).unwrap();
    let tm = transformed_singular(phi, &model, lambda).unwrap();
    (model, tm)
}
