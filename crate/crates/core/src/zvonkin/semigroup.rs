//! Monte Carlo spot checks of the reference semigroup `P⁰_{s,t} f(x) = E f(Z^x_{s,t})`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_log_slope, mean_stderr};
use crate::rng::NoiseKey;
use crate::simulate::{brownian_increments_keyed, integrate, Scheme, Sde, TimeGrid};

/// Monte Carlo estimate of `P⁰_{s,t} f(x)` with `n` Euler paths of
/// `steps` steps each. Returns `(value, stderr)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_p0<M: Sde + ?Sized>(
    reference: &M,
    f: impl Fn(&[f64]) -> f64 + Sync,
    s: f64,
    t: f64,
    x: &[f64],
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(t > s) || n == 0 {
        return Err(Error::InvalidInput(format!(
            "need t > s and n > 0 (s={s}, t={t}, n={n})"
        )));
    }
    let grid = TimeGrid::span(s, t, steps.max(1));
    let d = reference.dim();
    let vals: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let inc = brownian_increments_keyed(NoiseKey::new(seed, i, 0), &grid, d);
            integrate(reference, x, &grid, &inc, Scheme::EulerMaruyama, i).map(|p| f(p.terminal()))
        })
        .collect::<Result<_>>()?;
    Ok(mean_stderr(&vals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRow {
    pub tau: f64,
    /// `|∇P⁰_{s,s+τ} f|(x)`.
    pub gradient: f64,
    pub stderr: f64,
    /// `P⁰_{s,s+τ} f²(x)`.
    pub p0_f2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub rows: Vec<GradientRow>,
    /// Fitted exponent of `|∇P⁰f|` in `τ`; `None` when every gradient vanishes.
    pub exponent: Option<f64>,
    /// `ĉ = max_τ τ |∇P⁰f|² / P⁰f²`.
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientCheckConfig {
    pub samples: usize,
    pub steps: usize,
    /// Difference step is `bump · √τ`.
    pub bump: f64,
    pub seed: u64,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        Self {
            samples: 200_000,
            steps: 16,
            bump: 0.1,
            seed: 0,
        }
    }
}

/// Central differences of `P⁰_{s,s+τ} f` at `x` with common random numbers,
/// over a sweep of `τ`, and a log-log fit of the gradient against `τ`.
pub fn check_gradient_estimate<M: Sde + ?Sized>(
    reference: &M,
    f: impl Fn(&[f64]) -> f64 + Sync,
    s: f64,
    x: &[f64],
    taus: &[f64],
    cfg: &GradientCheckConfig,
) -> Result<GradientReport> {
    let d = reference.dim();
    let mut rows = Vec::with_capacity(taus.len());
    for (level, &tau) in taus.iter().enumerate() {
        let grid = TimeGrid::span(s, s + tau, cfg.steps.max(1));
        let eps = cfg.bump * tau.sqrt();
        let samples: Vec<(Vec<f64>, f64)> = (0..cfg.samples as u64)
            .into_par_iter()
            .map(|i| {
                let key = NoiseKey::new(cfg.seed.wrapping_add(level as u64), i, 0);
                let inc = brownian_increments_keyed(key, &grid, d);
                let base = integrate(reference, x, &grid, &inc, Scheme::EulerMaruyama, i)?;
                let fx = f(base.terminal());
                let mut g = vec![0.0; d];
                for a in 0..d {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[a] += eps;
                    xm[a] -= eps;
                    let p = integrate(reference, &xp, &grid, &inc, Scheme::EulerMaruyama, i)?;
                    let m = integrate(reference, &xm, &grid, &inc, Scheme::EulerMaruyama, i)?;
                    g[a] = (f(p.terminal()) - f(m.terminal())) / (2.0 * eps);
                }
                Ok((g, fx * fx))
            })
            .collect::<Result<_>>()?;
        let mut comps = Vec::with_capacity(d);
        let mut var = 0.0;
        for a in 0..d {
            let col: Vec<f64> = samples.iter().map(|(g, _)| g[a]).collect();
            let (m, se) = mean_stderr(&col);
            comps.push(m);
            var += se * se;
        }
        let f2: Vec<f64> = samples.iter().map(|(_, v)| *v).collect();
        let gradient = comps.iter().map(|v| v * v).sum::<f64>().sqrt();
        let stderr = var.sqrt();
        if stderr > 0.0 && gradient < 2.0 * stderr {
            return Err(Error::InconclusiveEstimate {
                value: gradient,
                stderr,
            });
        }
        rows.push(GradientRow {
            tau,
            gradient,
            stderr,
            p0_f2: mean_stderr(&f2).0,
        });
    }
    let positive = rows.iter().all(|r| r.gradient > 0.0);
    let exponent = if positive && rows.len() >= 2 {
        let t: Vec<f64> = rows.iter().map(|r| r.tau).collect();
        let g: Vec<f64> = rows.iter().map(|r| r.gradient).collect();
        Some(log_log_slope(&t, &g))
    } else {
        None
    };
    let constant = rows
        .iter()
        .map(|r| {
            if r.p0_f2 > 0.0 {
                r.tau * r.gradient * r.gradient / r.p0_f2
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(GradientReport {
        rows,
        exponent,
        constant,
    })
}
