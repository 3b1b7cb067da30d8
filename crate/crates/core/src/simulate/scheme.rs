use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{PathEnsemble, PathSample, TimeGrid};
use super::sde::Sde;
use crate::error::{Error, Result};
use crate::rng::{NoiseKey, NormalStream};

/// Above this magnitude a state counts as overflowed.
pub const BLOWUP_LEVEL: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    /// Drift increment `b h / (1 + h |b|)`.
    Tamed,
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::Tamed => "tamed",
        }
    }
}

/// `N(0, h I_d)` increments for every step, node-major, from one keyed stream.
pub fn brownian_increments_keyed(key: NoiseKey, grid: &TimeGrid, d: usize) -> Vec<f64> {
    let sh = grid.step().sqrt();
    let mut out = vec![0.0; grid.n_steps * d];
    NormalStream::new(key).fill(&mut out);
    out.iter_mut().for_each(|v| *v *= sh);
    out
}

/// Increments of the default stream `(seed, path 0, lane 0)`.
pub fn brownian_increments(seed: u64, grid: &TimeGrid, d: usize) -> Vec<f64> {
    brownian_increments_keyed(NoiseKey::new(seed, 0, 0), grid, d)
}

/// Sums blocks of `factor` consecutive increments (same Brownian path on a
/// coarser grid).
pub fn coarsen_increments(increments: &[f64], d: usize, factor: usize) -> Vec<f64> {
    let n = increments.len() / d;
    assert!(
        factor > 0 && n % factor == 0,
        "{n} steps not divisible by {factor}"
    );
    let mut out = vec![0.0; (n / factor) * d];
    for k in 0..n {
        for i in 0..d {
            out[(k / factor) * d + i] += increments[k * d + i];
        }
    }
    out
}

/// Runs the scheme on given increments.
pub fn integrate<M: Sde + ?Sized>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    increments: &[f64],
    scheme: Scheme,
    seed_id: u64,
) -> Result<PathSample> {
    let d = model.dim();
    if x0.len() != d || increments.len() != grid.n_steps * d {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: model {d}, x0 {}, increments {} for {} steps",
            x0.len(),
            increments.len(),
            grid.n_steps
        )));
    }
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.n_nodes() * d);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; d];
    let mut diff = vec![0.0; d * d];
    for k in 0..grid.n_steps {
        match model.coefficients(grid.t(k), &x, h, &mut drift, &mut diff) {
            Ok(()) => {}
            Err(Error::InvalidCoefficient { .. }) => return Err(Error::Blowup { step: k + 1 }),
            Err(e) => return Err(e),
        }
        let scale = match scheme {
            Scheme::EulerMaruyama => h,
            Scheme::Tamed => h / (1.0 + h * drift.iter().map(|v| v * v).sum::<f64>().sqrt()),
        };
        let dw = &increments[k * d..(k + 1) * d];
        for i in 0..d {
            let mut noise = 0.0;
            for j in 0..d {
                noise += diff[i * d + j] * dw[j];
            }
            x[i] += drift[i] * scale + noise;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_LEVEL) {
            return Err(Error::Blowup { step: k + 1 });
        }
        states.extend_from_slice(&x);
    }
    Ok(PathSample {
        grid: *grid,
        dim: d,
        states,
        seed_id,
    })
}

/// One path driven by the stream `key`; its `seed_id` is the stream id.
pub fn simulate_keyed<M: Sde + ?Sized>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    key: NoiseKey,
    scheme: Scheme,
) -> Result<PathSample> {
    let inc = brownian_increments_keyed(key, grid, model.dim());
    integrate(model, x0, grid, &inc, scheme, key.stream_id())
}

pub fn simulate_em<M: Sde + ?Sized>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    seed: u64,
) -> Result<PathSample> {
    simulate_keyed(
        model,
        x0,
        grid,
        NoiseKey::new(seed, 0, 0),
        Scheme::EulerMaruyama,
    )
}

pub fn simulate_tamed<M: Sde + ?Sized>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    seed: u64,
) -> Result<PathSample> {
    simulate_keyed(model, x0, grid, NoiseKey::new(seed, 0, 0), Scheme::Tamed)
}

/// Synchronous coupling: both paths use the same increments.
pub fn simulate_coupled_keyed<M: Sde + ?Sized>(
    model: &M,
    x0: &[f64],
    y0: &[f64],
    grid: &TimeGrid,
    key: NoiseKey,
    scheme: Scheme,
) -> Result<(PathSample, PathSample)> {
    let inc = brownian_increments_keyed(key, grid, model.dim());
    let a = integrate(model, x0, grid, &inc, scheme, key.stream_id())?;
    let b = integrate(model, y0, grid, &inc, scheme, key.stream_id())?;
    Ok((a, b))
}

pub fn simulate_coupled<M: Sde + ?Sized>(
    model: &M,
    x0: &[f64],
    y0: &[f64],
    grid: &TimeGrid,
    seed: u64,
    scheme: Scheme,
) -> Result<(PathSample, PathSample)> {
    simulate_coupled_keyed(model, x0, y0, grid, NoiseKey::new(seed, 0, 0), scheme)
}

/// Two paths from `y0` driven by lanes 0 and 1 of path id `path`.
pub fn simulate_pair_keyed<M: Sde + ?Sized>(
    model: &M,
    y0: &[f64],
    grid: &TimeGrid,
    seed: u64,
    path: u64,
    scheme: Scheme,
) -> Result<(PathSample, PathSample)> {
    let a = simulate_keyed(model, y0, grid, NoiseKey::new(seed, path, 0), scheme)?;
    let b = simulate_keyed(model, y0, grid, NoiseKey::new(seed, path, 1), scheme)?;
    Ok((a, b))
}

pub fn simulate_pair_independent<M: Sde + ?Sized>(
    model: &M,
    y0: &[f64],
    grid: &TimeGrid,
    seed: u64,
    scheme: Scheme,
) -> Result<(PathSample, PathSample)> {
    simulate_pair_keyed(model, y0, grid, seed, 0, scheme)
}

/// `f` applied to paths `0..n` (stream `(seed, i, 0)`), in path order.
pub fn map_paths<M, T, F>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    seed: u64,
    n: usize,
    scheme: Scheme,
    f: F,
) -> Result<Vec<T>>
where
    M: Sde + ?Sized,
    T: Send,
    F: Fn(&PathSample) -> T + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_keyed(model, x0, grid, NoiseKey::new(seed, i, 0), scheme).map(|p| f(&p)))
        .collect()
}

/// `f` applied to independent pairs `0..n`, in pair order.
pub fn map_independent_pairs<M, T, F>(
    model: &M,
    y0: &[f64],
    grid: &TimeGrid,
    seed: u64,
    n: usize,
    scheme: Scheme,
    f: F,
) -> Result<Vec<T>>
where
    M: Sde + ?Sized,
    T: Send,
    F: Fn(&PathSample, &PathSample) -> T + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_pair_keyed(model, y0, grid, seed, i, scheme).map(|(a, b)| f(&a, &b)))
        .collect()
}

pub fn simulate_ensemble<M: Sde + ?Sized>(
    model: &M,
    x0: &[f64],
    grid: &TimeGrid,
    seed: u64,
    n: usize,
    scheme: Scheme,
) -> Result<PathEnsemble> {
    let paths = map_paths(model, x0, grid, seed, n, scheme, |p| p.clone())?;
    Ok(PathEnsemble {
        grid: *grid,
        dim: model.dim(),
        paths,
        fingerprint: model.fingerprint(),
        scheme,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::sde::{unit_diffusion, FnSde};

    fn brownian(
        d: usize,
    ) -> FnSde<impl Fn(f64, &[f64], &mut [f64]) + Sync, fn(f64, &[f64], &mut [f64])> {
        FnSde::new(
            d,
            "bm",
            |_t, _x: &[f64], out: &mut [f64]| out.fill(0.0),
            unit_diffusion,
        )
    }

    #[test]
    fn zero_drift_path_is_partial_sum() {
        let grid = TimeGrid::new(1.0, 10);
        let p = simulate_em(&brownian(1), &[0.0], &grid, 5).unwrap();
        let inc = brownian_increments(5, &grid, 1);
        let mut s = 0.0;
        for k in 0..10 {
            s += inc[k];
            assert_eq!(p.state(k + 1)[0].to_bits(), s.to_bits());
        }
    }

    #[test]
    fn coarsening_preserves_sums() {
        let grid = TimeGrid::new(1.0, 8);
        let inc = brownian_increments(1, &grid, 2);
        let c = coarsen_increments(&inc, 2, 4);
        assert_eq!(c.len(), 4);
        assert!((c[0] - (inc[0] + inc[2] + inc[4] + inc[6])).abs() < 1e-15);
        assert!((c[3] - (inc[9] + inc[11] + inc[13] + inc[15])).abs() < 1e-15);
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = TimeGrid::new(0.3, 7);
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(7), 0.3);
        assert!((1..=7).all(|k| g.t(k) > g.t(k - 1)));
    }
}
