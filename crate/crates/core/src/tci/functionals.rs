use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{plug_in_exp_mean, ExpEstimate};
use crate::error::{Error, Result};
use crate::numerics::{norm, trapezoid};
use crate::simulate::{map_independent_pairs, PathSample, Scheme, Sde, TimeGrid};
use crate::transport::sup_metric;

/// `E exp{λ ∫₀^T |Y_t|^q dt}` over an ensemble, time integral by trapezoid.
pub fn exp_functional_estimate(paths: &[PathSample], lambda: f64, q: f64) -> Result<ExpEstimate> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let integrals = path_integrals(paths, q);
    Ok(plug_in_exp_mean(
        &integrals.iter().map(|v| lambda * v).collect::<Vec<_>>(),
    ))
}

/// `∫₀^T |Y_t|^q dt` per path.
pub fn path_integrals(paths: &[PathSample], q: f64) -> Vec<f64> {
    paths
        .par_iter()
        .map(|p| {
            let vals: Vec<f64> = (0..p.n_nodes()).map(|k| norm(p.state(k)).powf(q)).collect();
            trapezoid(&vals, p.grid.step())
        })
        .collect()
}

/// Squared sup-distances `ρ_T(X, X')²` of independent pairs from `y0`.
pub fn pair_sup_squares<M: Sde + ?Sized>(
    model: &M,
    y0: &[f64],
    grid: &TimeGrid,
    seed: u64,
    n_pairs: usize,
    scheme: Scheme,
) -> Result<Vec<f64>> {
    map_independent_pairs(model, y0, grid, seed, n_pairs, scheme, |a, b| {
        sup_metric(a, b).map(|r| r * r)
    })?
    .into_iter()
    .collect()
}

/// `E exp{δ ρ_T(X, X')²}` from precomputed squared distances.
pub fn gaussian_tail_from_squares(squares: &[f64], delta: f64) -> Result<ExpEstimate> {
    if squares.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "delta must be nonnegative, got {delta}"
        )));
    }
    Ok(plug_in_exp_mean(
        &squares.iter().map(|s| delta * s).collect::<Vec<_>>(),
    ))
}

/// `E exp{δ sup_t |X_t - X'_t|²}` for independent copies started at `y0`.
///
/// The sup runs over grid nodes only, so the estimate is biased low.
pub fn gaussian_tail_estimate<M: Sde + ?Sized>(
    model: &M,
    y0: &[f64],
    delta: f64,
    n_pairs: usize,
    grid: &TimeGrid,
    seed: u64,
    scheme: Scheme,
) -> Result<ExpEstimate> {
    let sq = pair_sup_squares(model, y0, grid, seed, n_pairs, scheme)?;
    gaussian_tail_from_squares(&sq, delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSweepRow {
    pub delta: f64,
    /// Ensemble size the row was computed on (a prefix of the largest).
    pub n: usize,
    pub below_threshold: bool,
    pub result: ExpEstimate,
}

/// Tail estimates for every `δ` and every ensemble size in `sizes`, all
/// from prefixes of one ensemble of `max(sizes)` pairs.
pub fn gaussian_tail_sweep<M: Sde + ?Sized>(
    model: &M,
    y0: &[f64],
    deltas: &[f64],
    sizes: &[usize],
    threshold: f64,
    grid: &TimeGrid,
    seed: u64,
    scheme: Scheme,
) -> Result<Vec<TailSweepRow>> {
    let n = sizes
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::InvalidInput("no ensemble sizes".into()))?;
    let sq = pair_sup_squares(model, y0, grid, seed, n, scheme)?;
    let mut rows = Vec::new();
    for &delta in deltas {
        for &k in sizes {
            rows.push(TailSweepRow {
                delta,
                n: k,
                below_threshold: delta < threshold,
                result: gaussian_tail_from_squares(&sq[..k], delta)?,
            });
        }
    }
    Ok(rows)
}
