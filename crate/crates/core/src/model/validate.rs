//! Sampled assumption checks.
//!
//! Every check reports a *violation* `lhs - rhs` of its inequality, maximised
//! over the validation sample; a check passes iff its violation is `≤ tol`.
//! Points are drawn from a uniform grid plus seeded random samples and
//! evaluated in parallel; the reduction runs in index order so reports are
//! deterministic for a given seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modulus::ModulusReport;
use super::spec::{DiniModelSpec, GrowthTag, ModelSpec, SingularModelSpec};
use crate::error::{Error, Result};
use crate::numerics::{dot, min_eig_gram, norm, operator_norm};
use crate::rng::{NoiseKey, UniformStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Half-width of the sampled box `[-R, R]^d`.
    pub radius: f64,
    /// Grid points per axis.
    pub grid_points: usize,
    /// Random points / pairs / directions.
    pub random_samples: usize,
    /// Time slices in `[0, T]` for time-dependent coefficients.
    pub time_points: usize,
    pub seed: u64,
    pub tol: f64,
    /// Step for finite-difference derivatives.
    pub fd_step: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            radius: 5.0,
            grid_points: 41,
            random_samples: 2000,
            time_points: 5,
            seed: 0,
            tol: 1e-6,
            fd_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub inequality: String,
    /// Worst `lhs - rhs` over the sample.
    pub violation: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model_kind: String,
    pub checks: Vec<AssumptionCheck>,
    pub modulus: Option<ModulusReport>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn validate_model(spec: &ModelSpec, cfg: &ValidationConfig) -> Result<ValidationReport> {
    match spec {
        ModelSpec::Dini(m) => validate_dini(m, cfg),
        ModelSpec::Singular(m) => validate_singular(m, cfg),
    }
}

/// Sample points: the tensor grid on `[-R, R]^d` followed by random points.
fn sample_points(d: usize, cfg: &ValidationConfig) -> Vec<Vec<f64>> {
    let m = cfg.grid_points.max(2);
    let h = 2.0 * cfg.radius / (m - 1) as f64;
    let total = m.pow(d as u32);
    let mut pts = Vec::with_capacity(total + cfg.random_samples);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = vec![0.0; d];
        for xi in x.iter_mut() {
            *xi = -cfg.radius + (rem % m) as f64 * h;
            rem /= m;
        }
        pts.push(x);
    }
    let mut u = UniformStream::new(NoiseKey::new(cfg.seed, 0, 0));
    for _ in 0..cfg.random_samples {
        pts.push(
            (0..d)
                .map(|_| cfg.radius * (2.0 * u.next_uniform() - 1.0))
                .collect(),
        );
    }
    pts
}

/// Random pairs `(x, y)` with `|x - y|` log-uniform in `[1e-8, 1]`.
fn sample_pairs(d: usize, cfg: &ValidationConfig) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut u = UniformStream::new(NoiseKey::new(cfg.seed, 0, 1));
    (0..cfg.random_samples)
        .map(|_| {
            let x: Vec<f64> = (0..d)
                .map(|_| cfg.radius * (2.0 * u.next_uniform() - 1.0))
                .collect();
            let mut dir: Vec<f64> = (0..d).map(|_| 2.0 * u.next_uniform() - 1.0).collect();
            let n = norm(&dir).max(1e-300);
            let r = (8.0 * (u.next_uniform() - 1.0) * std::f64::consts::LN_10).exp();
            dir.iter_mut().for_each(|v| *v *= r / n);
            let y = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
            (x, y)
        })
        .collect()
}

fn unit_directions(d: usize, n: usize, cfg: &ValidationConfig) -> Vec<Vec<f64>> {
    let mut u = UniformStream::new(NoiseKey::new(cfg.seed, 0, 2));
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| 2.0 * u.next_uniform() - 1.0).collect();
            let nv = norm(&v);
            if nv > 1e-3 && nv <= 1.0 {
                break v.iter().map(|a| a / nv).collect();
            }
        })
        .collect()
}

fn time_slices(horizon: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|k| horizon * k as f64 / (n - 1) as f64)
        .collect()
}

fn finite_or_err(name: &str, x: &[f64], vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidCoefficient {
            name: name.to_string(),
            point: x.to_vec(),
        })
    }
}

/// Evaluates `f` over the items in parallel and keeps the worst violation in
/// index order.
fn worst<T: Sync>(
    items: &[T],
    f: impl Fn(&T) -> Result<(f64, Vec<f64>)> + Sync,
) -> Result<(f64, Vec<f64>)> {
    let vals: Vec<Result<(f64, Vec<f64>)>> = items.par_iter().map(&f).collect();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for v in vals {
        let (viol, pt) = v?;
        if viol > best.0 {
            best = (viol, pt);
        }
    }
    Ok(best)
}

fn record(
    name: &str,
    inequality: &str,
    (violation, worst_point): (f64, Vec<f64>),
    tol: f64,
) -> AssumptionCheck {
    AssumptionCheck {
        name: name.into(),
        inequality: inequality.into(),
        violation,
        worst_point,
        passed: violation <= tol,
    }
}

fn scalar_check(name: &str, inequality: &str, violation: f64, tol: f64) -> AssumptionCheck {
    record(name, inequality, (violation, Vec::new()), tol)
}

/// Central-difference partial derivative `∂_k F(x)` of a flattened field.
fn partial(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], k: usize, eps: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] += eps;
    xm[k] -= eps;
    let (a, b) = (f(&xp), f(&xm));
    a.iter()
        .zip(&b)
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect()
}

pub fn validate_dini(m: &DiniModelSpec, cfg: &ValidationConfig) -> Result<ValidationReport> {
    let d = m.dim;
    let pts = sample_points(d, cfg);
    let times = time_slices(m.horizon, cfg.time_points);
    let tx: Vec<(f64, Vec<f64>)> = times
        .iter()
        .flat_map(|&t| pts.iter().map(move |x| (t, x.clone())))
        .collect();
    let eps = cfg.fd_step;
    let bnd = &m.bounds;
    let mut checks = Vec::new();

    let positive = [
        bnd.dini_sup,
        bnd.grad_regular,
        bnd.sigma,
        bnd.grad_sigma,
        bnd.hess_sigma,
        bnd.sigma_sigma_inv,
    ];
    let bad = positive
        .iter()
        .map(|v| if v.is_finite() && *v >= 0.0 { 0.0 } else { 1.0 })
        .sum::<f64>();
    let bad = bad
        + if m.horizon > 0.0 && m.horizon.is_finite() {
            0.0
        } else {
            1.0
        };
    checks.push(scalar_check(
        "declared_constants",
        "declared bounds finite and nonnegative, T > 0",
        bad,
        cfg.tol,
    ));

    let nondeg = worst(&tx, |(t, x)| {
        let s = m.sigma.eval_vec(*t, x);
        finite_or_err("sigma", x, &s)?;
        Ok((1.0 / bnd.sigma_sigma_inv - min_eig_gram(&s, d), x.clone()))
    })?;
    checks.push(record(
        "sigma_nondegenerate",
        "1/‖(σσ*)^{-1}‖ - λ_min(σσ*) ≤ 0",
        nondeg,
        cfg.tol,
    ));

    let sig = worst(&tx, |(t, x)| {
        let s = m.sigma.eval_vec(*t, x);
        Ok((operator_norm(&s, d) - bnd.sigma, x.clone()))
    })?;
    checks.push(record("sigma_bound", "‖σ‖ - declared ≤ 0", sig, cfg.tol));

    let grad_sig = worst(&tx, |(t, x)| {
        let f = |y: &[f64]| m.sigma.eval_vec(*t, y);
        let g = (0..d)
            .map(|k| operator_norm(&partial(&f, x, k, eps), d))
            .fold(0.0, f64::max);
        finite_or_err("grad_sigma", x, &[g])?;
        Ok((g - bnd.grad_sigma, x.clone()))
    })?;
    checks.push(record(
        "grad_sigma_bound",
        "max_k ‖∂_k σ‖ - declared ≤ 0",
        grad_sig,
        cfg.tol,
    ));

    let hess_eps = eps.sqrt() * 0.1;
    let hess_sig = worst(&tx, |(t, x)| {
        let f = |y: &[f64]| m.sigma.eval_vec(*t, y);
        let mut g: f64 = 0.0;
        for k in 0..d {
            for l in 0..d {
                let fk = |y: &[f64]| partial(&f, y, k, hess_eps);
                g = g.max(operator_norm(&partial(&fk, x, l, hess_eps), d));
            }
        }
        Ok((g - bnd.hess_sigma, x.clone()))
    })?;
    checks.push(record(
        "hess_sigma_bound",
        "max_kl ‖∂_k∂_l σ‖ - declared ≤ 0",
        hess_sig,
        cfg.tol.max(1e-4),
    ));

    let grad_b = worst(&tx, |(t, x)| {
        let f = |y: &[f64]| m.regular_drift.eval_vec(*t, y);
        finite_or_err("regular_drift", x, &f(x))?;
        let mut jac = vec![0.0; d * d];
        for k in 0..d {
            let col = partial(&f, x, k, eps);
            for i in 0..d {
                jac[i * d + k] = col[i];
            }
        }
        Ok((operator_norm(&jac, d) - bnd.grad_regular, x.clone()))
    })?;
    checks.push(record(
        "regular_drift_lipschitz",
        "‖∇B‖ - declared ≤ 0",
        grad_b,
        cfg.tol,
    ));

    let sup_b = worst(&tx, |(t, x)| {
        let b = m.dini_drift.eval_vec(*t, x);
        finite_or_err("dini_drift", x, &b)?;
        Ok((norm(&b) - bnd.dini_sup, x.clone()))
    })?;
    checks.push(record(
        "dini_drift_bound",
        "|b| - ‖b‖_{T,∞} ≤ 0",
        sup_b,
        cfg.tol,
    ));

    let pairs = sample_pairs(d, cfg);
    let tpairs: Vec<(f64, &(Vec<f64>, Vec<f64>))> = times
        .iter()
        .flat_map(|&t| pairs.iter().map(move |p| (t, p)))
        .collect();
    let incr = worst(&tpairs, |(t, (x, y))| {
        let bx = m.dini_drift.eval_vec(*t, x);
        let by = m.dini_drift.eval_vec(*t, y);
        let diff: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| a - b).collect();
        let dist: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let phi = m.modulus.eval(norm(&dist));
        Ok((norm(&diff) - phi * (1.0 + cfg.tol), x.clone()))
    })?;
    checks.push(record(
        "dini_drift_modulus",
        "|b(x) - b(y)| - φ(|x-y|)(1+tol) ≤ 0",
        incr,
        0.0,
    ));

    let report = m.modulus.class_d_report(cfg.grid_points.max(1000));
    checks.push(scalar_check(
        "modulus_zero_at_origin",
        "φ(0) = 0",
        report.value_at_zero.abs(),
        0.0,
    ));
    checks.push(scalar_check(
        "modulus_monotone",
        "-min increment of φ ≤ 0",
        -report.min_increment,
        super::modulus::MONOTONE_TOL,
    ));
    checks.push(scalar_check(
        "modulus_square_concave",
        "max second difference of φ² ≤ 0",
        report.max_square_second_difference,
        super::modulus::CONCAVITY_TOL,
    ));
    checks.push(scalar_check(
        "modulus_dini",
        "tail of ∫ φ(s)/s ds ≤ tolerance",
        if report.dini.finite {
            0.0
        } else {
            report.dini.tail.max(f64::MIN_POSITIVE)
        },
        0.0,
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        model_kind: "dini".into(),
        checks,
        modulus: Some(report),
        passed,
    })
}

pub fn validate_singular(
    m: &SingularModelSpec,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    let d = m.dim;
    let pts = sample_points(d, cfg);
    let mut checks = Vec::new();

    let mut bad = 0.0;
    if !(m.c0 >= 1.0) {
        bad += 1.0;
    }
    if !(m.beta > 0.0 && m.beta < 1.0) {
        bad += 1.0;
    }
    if !(m.horizon > 0.0 && m.horizon.is_finite()) {
        bad += 1.0;
    }
    match m.growth {
        GrowthTag::Dissipative {
            r,
            kappa1,
            kappa2,
            kappa3,
        } => {
            if !(r > -1.0 && kappa1 > 0.0 && kappa2 >= 0.0 && kappa3 > 0.0) {
                bad += 1.0;
            }
        }
        GrowthTag::Linear { kappa4 } => {
            if !(kappa4 >= 0.0) {
                bad += 1.0;
            }
        }
    }
    checks.push(scalar_check(
        "declared_constants",
        "c₀ ≥ 1, β ∈ (0,1), κ's admissible",
        bad,
        0.0,
    ));

    checks.push(scalar_check(
        "integrability_exponent",
        "d - p < 0",
        d as f64 - m.p,
        0.0,
    ));
    let lp = if m.singular_drift.is_zero() {
        Some(0.0)
    } else {
        m.singular_drift.lp_norm(m.p, d)
    };
    let lp_violation = match lp {
        Some(v) if v.is_finite() => 0.0,
        Some(_) => f64::INFINITY,
        // no closed form: treated as bounded data on a compact set
        None => 0.0,
    };
    checks.push(scalar_check(
        "singular_drift_integrable",
        "‖b₁‖_{L^p} < ∞",
        lp_violation,
        0.0,
    ));

    match m.growth {
        GrowthTag::Dissipative {
            r,
            kappa1,
            kappa2,
            kappa3,
        } => {
            let dis = worst(&pts, |x| {
                let b = m.growth_drift.eval_vec(0.0, x);
                finite_or_err("growth_drift", x, &b)?;
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Ok((
                    dot(x, &b) + kappa1 * r2.powf(1.0 + 0.5 * r) - kappa2,
                    x.clone(),
                ))
            })?;
            checks.push(record(
                "dissipativity",
                "⟨x,b₂⟩ + κ₁|x|^{2+r} - κ₂ ≤ 0",
                dis,
                cfg.tol,
            ));
            let growth = worst(&pts, |x| {
                let b = m.growth_drift.eval_vec(0.0, x);
                Ok((norm(&b) - kappa3 * (1.0 + norm(x).powf(1.0 + r)), x.clone()))
            })?;
            checks.push(record(
                "growth",
                "|b₂| - κ₃(1+|x|^{1+r}) ≤ 0",
                growth,
                cfg.tol,
            ));
        }
        GrowthTag::Linear { kappa4 } => {
            let growth = worst(&pts, |x| {
                let b = m.growth_drift.eval_vec(0.0, x);
                finite_or_err("growth_drift", x, &b)?;
                Ok((norm(&b) - kappa4 * (1.0 + norm(x)), x.clone()))
            })?;
            checks.push(record(
                "linear_growth",
                "|b₂| - κ₄(1+|x|) ≤ 0",
                growth,
                cfg.tol,
            ));
        }
    }

    let dirs = unit_directions(d, pts.len(), cfg);
    let xi: Vec<(Vec<f64>, Vec<f64>)> = pts.iter().cloned().zip(dirs).collect();
    let lower = worst(&xi, |(x, v)| {
        let s = m.sigma.eval_vec(0.0, x);
        finite_or_err("sigma", x, &s)?;
        let st = crate::numerics::mat_t_vec(&s, v);
        Ok((1.0 / m.c0 - dot(&st, &st), x.clone()))
    })?;
    checks.push(record(
        "ellipticity_lower",
        "c₀^{-1}|ξ|² - |σ*ξ|² ≤ 0",
        lower,
        cfg.tol,
    ));
    let upper = worst(&xi, |(x, v)| {
        let s = m.sigma.eval_vec(0.0, x);
        let st = crate::numerics::mat_t_vec(&s, v);
        Ok((dot(&st, &st) - m.c0, x.clone()))
    })?;
    checks.push(record(
        "ellipticity_upper",
        "|σ*ξ|² - c₀|ξ|² ≤ 0",
        upper,
        cfg.tol,
    ));

    let pairs = sample_pairs(d, cfg);
    let holder = worst(&pairs, |(x, y)| {
        let sx = m.sigma.eval_vec(0.0, x);
        let sy = m.sigma.eval_vec(0.0, y);
        let diff: Vec<f64> = sx.iter().zip(&sy).map(|(a, b)| a - b).collect();
        let dist: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        Ok((
            operator_norm(&diff, d) - m.c0 * norm(&dist).powf(m.beta),
            x.clone(),
        ))
    })?;
    checks.push(record(
        "sigma_holder",
        "‖σ(x)-σ(y)‖ - c₀|x-y|^β ≤ 0",
        holder,
        cfg.tol,
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        model_kind: "singular".into(),
        checks,
        modulus: None,
        passed,
    })
}
