use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VectorFieldSpec;
use crate::numerics::{log_log_slope, mean_stderr};
use crate::rng::NoiseKey;
use crate::simulate::{
    map_paths, simulate_coupled_keyed, PathSample, Perturbed, Scheme, Sde, TimeGrid,
};
use crate::transport::{
    exact_wp, girsanov_entropy, sinkhorn_wp, sup_metric, EmpiricalMeasure, SinkhornConfig,
    EXACT_ATOM_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Config {
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Also bracket `W₂` on the full ensemble when it exceeds the exact cutoff.
    pub sinkhorn: SinkhornConfig,
}

impl Default for T2Config {
    fn default() -> Self {
        Self {
            n_paths: 512,
            seed: 0,
            scheme: Scheme::EulerMaruyama,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Row {
    pub shift: VectorFieldSpec,
    pub entropy: f64,
    pub entropy_stderr: f64,
    /// Exact `W₂` on the first `min(n, 512)` paths of each ensemble.
    pub w2_exact: f64,
    /// Exact `W₂` on half as many paths.
    pub w2_exact_half: f64,
    pub subsample: usize,
    /// Sinkhorn bracket on the full ensembles, when larger than the cutoff.
    pub w2_bracket: Option<(f64, f64)>,
    /// `W₂²/H`, absent when the entropy is indistinguishable from zero.
    pub ratio: Option<f64>,
    pub ratio_half: Option<f64>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Section {
    pub rows: Vec<T2Row>,
    /// `Ĉ₂ = max W₂²/H` over the perturbations.
    pub c2_hat: Option<f64>,
    /// Every ratio moved less than 10% between the half and full subsample.
    pub stable: bool,
    pub n_paths: usize,
    pub seed: u64,
    pub grid: String,
}

fn w2_paths(a: &[PathSample], b: &[PathSample]) -> Result<f64> {
    let mu = EmpiricalMeasure::uniform(a.to_vec())?;
    let nu = EmpiricalMeasure::uniform(b.to_vec())?;
    Ok(exact_wp(&mu, &nu, 2.0, sup_metric)?.value)
}

/// Empirical `W₂(ℚ_h, ℙ^x)² / H(ℚ_h | ℙ^x)` for drift perturbations `h`.
///
/// Both ensembles are driven by the same Brownian paths, so the path-space
/// distance reflects the perturbation rather than sampling noise between
/// independent clouds.
pub fn t2_check<M: Sde + ?Sized>(
    model_p: &M,
    x0: &[f64],
    shifts: &[VectorFieldSpec],
    grid: &TimeGrid,
    cfg: &T2Config,
) -> Result<T2Section> {
    if cfg.n_paths < 2 {
        return Err(Error::InvalidInput(
            "t2 check needs at least two paths".into(),
        ));
    }
    let p_paths = map_paths(model_p, x0, grid, cfg.seed, cfg.n_paths, cfg.scheme, |p| {
        p.clone()
    })?;
    let sub = cfg.n_paths.min(EXACT_ATOM_LIMIT);
    let mut rows = Vec::with_capacity(shifts.len());
    for shift in shifts {
        let h = |t: f64, x: &[f64], out: &mut [f64]| shift.eval(t, x, out);
        let q = Perturbed {
            base: model_p,
            shift: h,
            label: "shift".into(),
        };
        let q_paths = map_paths(&q, x0, grid, cfg.seed, cfg.n_paths, cfg.scheme, |p| {
            p.clone()
        })?;
        let ent = girsanov_entropy(model_p, h, &q_paths)?;
        let w2_exact = w2_paths(&q_paths[..sub], &p_paths[..sub])?;
        let w2_exact_half = w2_paths(&q_paths[..sub / 2], &p_paths[..sub / 2])?;
        let w2_bracket = if cfg.n_paths > EXACT_ATOM_LIMIT {
            let mu = EmpiricalMeasure::uniform(q_paths.clone())?;
            let nu = EmpiricalMeasure::uniform(p_paths.clone())?;
            let b = sinkhorn_wp(&mu, &nu, 2.0, sup_metric, &cfg.sinkhorn)?;
            Some((b.lower, b.upper))
        } else {
            None
        };
        let skipped = !(ent.value > 1e-12 && ent.value > 3.0 * ent.stderr);
        let (ratio, ratio_half) = if skipped {
            (None, None)
        } else {
            (
                Some(w2_exact * w2_exact / ent.value),
                Some(w2_exact_half * w2_exact_half / ent.value),
            )
        };
        rows.push(T2Row {
            shift: shift.clone(),
            entropy: ent.value,
            entropy_stderr: ent.stderr,
            w2_exact,
            w2_exact_half,
            subsample: sub,
            w2_bracket,
            ratio,
            ratio_half,
            skipped,
        });
    }
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let c2_hat = ratios.iter().copied().reduce(f64::max);
    let stable = rows.iter().all(|r| match (r.ratio, r.ratio_half) {
        (Some(a), Some(b)) => a.is_finite() && (a - b).abs() < 0.1 * a,
        _ => true,
    });
    Ok(T2Section {
        rows,
        c2_hat,
        stable,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        grid: grid.tag(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub distance: f64,
    /// `E sup_t |X^x_t - X^y_t|²`.
    pub mean_sup_sq: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub rows: Vec<CouplingRow>,
    /// Log-log slope of the mean against `|x - y|`; `None` with fewer than two
    /// positive rows.
    pub slope: Option<f64>,
    /// `max E sup|ΔX|² / |x - y|²`.
    pub prefactor: f64,
}

/// Synchronous-coupling estimate of `E sup_t |X^x_t - X^y_t|²` over pairs.
pub fn coupling_lipschitz_check<M: Sde + ?Sized>(
    model: &M,
    pairs: &[(Vec<f64>, Vec<f64>)],
    n: usize,
    grid: &TimeGrid,
    seed: u64,
    scheme: Scheme,
) -> Result<CouplingReport> {
    let mut rows = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let distance = crate::transport::euclidean(x, y);
        let vals: Vec<Result<f64>> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let (a, b) =
                    simulate_coupled_keyed(model, x, y, grid, NoiseKey::new(seed, i, 0), scheme)?;
                sup_metric(&a, &b).map(|r| r * r)
            })
            .collect();
        let vals = vals.into_iter().collect::<Result<Vec<f64>>>()?;
        let (mean, stderr) = mean_stderr(&vals);
        rows.push(CouplingRow {
            distance,
            mean_sup_sq: mean,
            stderr,
        });
    }
    let pos: Vec<&CouplingRow> = rows
        .iter()
        .filter(|r| r.distance > 0.0 && r.mean_sup_sq > 0.0)
        .collect();
    let slope = (pos.len() >= 2).then(|| {
        log_log_slope(
            &pos.iter().map(|r| r.distance).collect::<Vec<_>>(),
            &pos.iter().map(|r| r.mean_sup_sq).collect::<Vec<_>>(),
        )
    });
    let prefactor = pos
        .iter()
        .map(|r| r.mean_sup_sq / (r.distance * r.distance))
        .fold(0.0, f64::max);
    Ok(CouplingReport {
        rows,
        slope,
        prefactor,
    })
}
