//! Pathwise check that `Φ_t(X_t)` follows the transformed equation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transformed::TransformedModel;
use crate::error::{Error, Result};
use crate::numerics::{log_log_slope, mean_stderr, norm};
use crate::rng::NoiseKey;
use crate::simulate::{
    brownian_increments_keyed, coarsen_increments, integrate, Scheme, Sde, TimeGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyConfig {
    /// Steps on the coarsest grid.
    pub coarse_steps: usize,
    /// Number of mesh halvings.
    pub refinements: usize,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            coarse_steps: 16,
            refinements: 4,
            paths: 400,
            seed: 0,
            scheme: Scheme::EulerMaruyama,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub h: f64,
    pub n_steps: usize,
    /// Monte Carlo mean of `sup_t |Φ_t(X_t) - Y_t|`.
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    /// Fitted exponent of `error ~ h^rate`, when all errors are positive.
    pub rate: Option<f64>,
    pub monotone: bool,
}

/// Simulates `X` from `original` and `Y` from `tm` started at `Φ_0(x0)` on
/// the same Brownian path, at each mesh of the sweep.
///
/// Fails with [`Error::ConsistencyFailure`] when the error does not decrease
/// over three consecutive refinements (an identically zero table passes).
pub fn pathwise_consistency<M: Sde + ?Sized>(
    original: &M,
    tm: &TransformedModel,
    x0: &[f64],
    cfg: &ConsistencyConfig,
) -> Result<ConsistencyReport> {
    let d = original.dim();
    if tm.dim() != d || x0.len() != d {
        return Err(Error::InvalidInput(
            "dimension mismatch between models and x0".into(),
        ));
    }
    let levels = cfg.refinements + 1;
    let fine_steps = cfg.coarse_steps << cfg.refinements;
    let fine = TimeGrid::new(tm.horizon, fine_steps);
    let y0 = tm.phi.phi(0.0, x0)?;
    let per_path: Vec<Result<Vec<f64>>> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|path| {
            let inc = brownian_increments_keyed(NoiseKey::new(cfg.seed, path, 0), &fine, d);
            (0..levels)
                .map(|level| {
                    let factor = 1usize << (cfg.refinements - level);
                    let grid = fine.coarsen(factor)?;
                    let coarse = coarsen_increments(&inc, d, factor);
                    let x = integrate(original, x0, &grid, &coarse, cfg.scheme, path)?;
                    let y = integrate(tm, &y0, &grid, &coarse, cfg.scheme, path)?;
                    let mut worst: f64 = 0.0;
                    for k in 0..grid.n_nodes() {
                        let px = tm.phi.phi(grid.t(k), x.state(k))?;
                        let diff: Vec<f64> =
                            px.iter().zip(y.state(k)).map(|(a, b)| a - b).collect();
                        worst = worst.max(norm(&diff));
                    }
                    Ok(worst)
                })
                .collect()
        })
        .collect();
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_>>()?;

    let rows: Vec<ConsistencyRow> = (0..levels)
        .map(|level| {
            let errs: Vec<f64> = per_path.iter().map(|p| p[level]).collect();
            let (error, stderr) = mean_stderr(&errs);
            let n_steps = cfg.coarse_steps << level;
            ConsistencyRow {
                h: tm.horizon / n_steps as f64,
                n_steps,
                error,
                stderr,
            }
        })
        .collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    if errors.iter().any(|e| *e > 0.0) {
        let mut run = 0;
        for w in errors.windows(2) {
            if w[1] >= w[0] {
                run += 1;
                if run >= 3 {
                    return Err(Error::ConsistencyFailure { errors });
                }
            } else {
                run = 0;
            }
        }
    }
    let rate = if errors.iter().all(|e| *e > 0.0) && errors.len() >= 2 {
        let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
        Some(log_log_slope(&h, &errors))
    } else {
        None
    };
    Ok(ConsistencyReport {
        monotone: errors.windows(2).all(|w| w[1] <= w[0]),
        rows,
        rate,
    })
}
