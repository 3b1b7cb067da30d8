use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{mean_stderr, solve_small, trapezoid};
use crate::simulate::{PathSample, Sde};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub paths: usize,
}

/// `H(ℚ|ℙ) = ½ E_ℚ ∫₀^T |σ⁻¹ h(t, X_t)|² dt` from paths simulated under `ℚ`,
/// where `ℚ` has drift `b_ℙ + h` and `σ` is read from `model_p`.
pub fn girsanov_entropy<M, H>(
    model_p: &M,
    shift: H,
    q_paths: &[PathSample],
) -> Result<EntropyEstimate>
where
    M: Sde + ?Sized,
    H: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    if q_paths.is_empty() {
        return Err(Error::InvalidInput("no paths".into()));
    }
    let d = model_p.dim();
    let per_path: Vec<Result<f64>> = q_paths
        .par_iter()
        .map(|path| {
            if path.dim != d {
                return Err(Error::GridMismatch(format!(
                    "path dimension {} vs model {d}",
                    path.dim
                )));
            }
            let grid = path.grid;
            let mut drift = vec![0.0; d];
            let mut sigma = vec![0.0; d * d];
            let mut h = vec![0.0; d];
            let mut integrand = Vec::with_capacity(grid.n_nodes());
            for k in 0..grid.n_nodes() {
                let (t, x) = (grid.t(k), path.state(k));
                model_p.coefficients(t, x, grid.step(), &mut drift, &mut sigma)?;
                shift(t, x, &mut h);
                let z = solve_small(&sigma, &h).ok_or_else(|| Error::InvalidCoefficient {
                    name: "sigma_inverse".into(),
                    point: x.to_vec(),
                })?;
                integrand.push(z.iter().map(|v| v * v).sum::<f64>());
            }
            Ok(0.5 * trapezoid(&integrand, grid.step()))
        })
        .collect();
    let values = per_path.into_iter().collect::<Result<Vec<f64>>>()?;
    let (value, stderr) = mean_stderr(&values);
    Ok(EntropyEstimate {
        value,
        stderr,
        paths: values.len(),
    })
}
