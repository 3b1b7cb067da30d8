//! Runs a configured set of checks against an original equation and its
//! transform and assembles a [`TciReport`].

use serde::{Deserialize, Serialize};

use super::diagnostics::Verdict;
use super::functionals::{exp_functional_estimate, gaussian_tail_sweep};
use super::invariance::{invariance_suite, InvarianceReport};
use super::report::{CheckRecord, CheckVerdict, Provenance, TciReport};
use super::t2::{coupling_lipschitz_check, t2_check, T2Config};
use super::thresholds::{t1_constant, ThresholdSet};
use crate::model::{GrowthTag, VectorFieldSpec};
use crate::simulate::{map_paths, Scheme, Sde, TimeGrid};
use crate::transport::SinkhornConfig;
use crate::zvonkin::{verify_tilde_conditions, TildeGridConfig, TransformedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpFunctionalCheck {
    pub n_paths: usize,
    /// Values of `λ` as multiples of the threshold.
    pub multiples: Vec<f64>,
}

impl Default for ExpFunctionalCheck {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            multiples: vec![0.0, 0.5, 0.9, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailCheck {
    /// Ensemble sizes; all are prefixes of the largest.
    pub sizes: Vec<usize>,
    /// Values of `δ` as multiples of the threshold, unless `deltas` is set.
    pub multiples: Vec<f64>,
    pub deltas: Option<Vec<f64>>,
}

impl Default for TailCheck {
    fn default() -> Self {
        Self {
            sizes: vec![2_500, 10_000, 40_000],
            multiples: vec![0.0, 0.5, 0.8, 160.0],
            deltas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T2Check {
    pub n_paths: usize,
    /// Constant drift perturbations, applied along every coordinate.
    pub shifts: Vec<f64>,
    pub sinkhorn: SinkhornConfig,
}

impl Default for T2Check {
    fn default() -> Self {
        Self {
            n_paths: 512,
            shifts: vec![0.1, 0.2, 0.4],
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingCheck {
    pub n_pairs: usize,
    /// `|x - y|` values; `y` is `x0` moved along the first axis.
    pub distances: Vec<f64>,
}

impl Default for CouplingCheck {
    fn default() -> Self {
        Self {
            n_pairs: 2_000,
            distances: vec![0.25, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceCheck {
    pub trials: usize,
    pub sizes: Vec<usize>,
}

impl Default for InvarianceCheck {
    fn default() -> Self {
        Self {
            trials: 1_000,
            sizes: vec![2, 3, 4, 5, 6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TciConfig {
    pub seed: u64,
    /// Starting point in original coordinates; the origin when empty.
    pub x0: Vec<f64>,
    pub time_steps: usize,
    pub scheme: Scheme,
    pub tilde: TildeGridConfig,
    pub exp_functional: Option<ExpFunctionalCheck>,
    pub gaussian_tail: Option<TailCheck>,
    pub t2: Option<T2Check>,
    pub coupling: Option<CouplingCheck>,
    pub invariance: Option<InvarianceCheck>,
}

impl Default for TciConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            x0: Vec::new(),
            time_steps: 64,
            scheme: Scheme::EulerMaruyama,
            tilde: TildeGridConfig::default(),
            exp_functional: None,
            gaussian_tail: None,
            t2: None,
            coupling: None,
            invariance: None,
        }
    }
}

impl TciConfig {
    /// Every check with its defaults.
    pub fn all_checks() -> Self {
        Self {
            exp_functional: Some(ExpFunctionalCheck::default()),
            gaussian_tail: Some(TailCheck::default()),
            t2: Some(T2Check::default()),
            coupling: Some(CouplingCheck::default()),
            invariance: Some(InvarianceCheck::default()),
            ..Self::default()
        }
    }
}

fn error_record(name: &str, prov: Provenance, e: impl std::fmt::Display) -> CheckRecord {
    CheckRecord::new(name, CheckVerdict::Error, prov).with_note(e.to_string())
}

/// Runs every configured check. A failing check is recorded with verdict
/// `Error` and the run continues.
pub fn run_tci<M: Sde + ?Sized>(original: &M, tm: &TransformedModel, cfg: &TciConfig) -> TciReport {
    let d = tm.dim();
    let x0 = if cfg.x0.is_empty() {
        vec![0.0; d]
    } else {
        cfg.x0.clone()
    };
    let grid = TimeGrid::new(tm.horizon, cfg.time_steps);
    let prov = |seed: u64, n: usize| Provenance {
        seed,
        n,
        grid: grid.tag(),
    };
    let mut report = TciReport {
        seed: cfg.seed,
        caveats: vec![
            "sup-distances are taken over grid nodes only, so tail estimates are lower bounds"
                .into(),
            "T2 ratios are W2^2/H without a factor-2 normalisation".into(),
        ],
        ..Default::default()
    };

    let thresholds = verify_tilde_conditions(tm, &cfg.tilde)
        .and_then(|fit| ThresholdSet::from_fit(&fit, tm.horizon));
    match &thresholds {
        Ok(th) => {
            for (name, value) in [
                ("threshold.lambda", th.lambda_max.value),
                ("threshold.delta", th.delta_max),
            ] {
                report.records.push(CheckRecord {
                    threshold: Some(value),
                    ..CheckRecord::new(name, CheckVerdict::Pass, prov(cfg.seed, 0))
                });
            }
        }
        Err(e) => report
            .records
            .push(error_record("thresholds", prov(cfg.seed, 0), e)),
    }
    let thresholds = thresholds.ok();
    report.thresholds = thresholds.clone();
    let y0 = tm.phi.phi(0.0, &x0);

    if let Some(check) = &cfg.exp_functional {
        let seed = cfg.seed.wrapping_add(1);
        match (&thresholds, &y0) {
            (Some(th), Ok(y0)) => {
                let q = match th.tag {
                    GrowthTag::Dissipative { r, .. } => 2.0 * r + 2.0,
                    GrowthTag::Linear { .. } => 2.0,
                };
                let run = map_paths(tm, y0, &grid, seed, check.n_paths, cfg.scheme, |p| {
                    p.clone()
                });
                match run {
                    Ok(paths) => {
                        for m in &check.multiples {
                            let lambda = m * th.lambda_max.value;
                            let name = format!("exp_functional lambda={lambda:.6e}");
                            let rec = match exp_functional_estimate(&paths, lambda, q) {
                                Ok(est) => CheckRecord::from_exp(
                                    name,
                                    lambda,
                                    th.lambda_max.value,
                                    th.lambda_max.admits(lambda),
                                    &est,
                                    prov(seed, check.n_paths),
                                ),
                                Err(e) => error_record(&name, prov(seed, check.n_paths), e),
                            };
                            report.records.push(rec);
                        }
                    }
                    Err(e) => report.records.push(error_record(
                        "exp_functional",
                        prov(seed, check.n_paths),
                        e,
                    )),
                }
            }
            (_, Err(e)) => report
                .records
                .push(error_record("exp_functional", prov(seed, 0), e)),
            (None, _) => report.records.push(error_record(
                "exp_functional",
                prov(seed, 0),
                "no thresholds",
            )),
        }
    }

    if let Some(check) = &cfg.gaussian_tail {
        let seed = cfg.seed.wrapping_add(2);
        let delta_max = thresholds.as_ref().map(|t| t.delta_max);
        let deltas = match (&check.deltas, delta_max) {
            (Some(ds), _) => Some(ds.clone()),
            (None, Some(dm)) => Some(check.multiples.iter().map(|m| m * dm).collect()),
            (None, None) => None,
        };
        let n_max = check.sizes.iter().copied().max().unwrap_or(0);
        match (deltas, &y0) {
            (Some(deltas), Ok(y0)) => {
                let threshold = delta_max.unwrap_or(f64::NAN);
                match gaussian_tail_sweep(
                    tm,
                    y0,
                    &deltas,
                    &check.sizes,
                    threshold,
                    &grid,
                    seed,
                    cfg.scheme,
                ) {
                    Ok(rows) => {
                        for r in &rows {
                            report.records.push(CheckRecord::from_exp(
                                format!("gaussian_tail delta={:.6e} n={}", r.delta, r.n),
                                r.delta,
                                threshold,
                                r.below_threshold,
                                &r.result,
                                prov(seed, r.n),
                            ));
                        }
                        // largest admissible δ that is stable at every size
                        let certified = deltas
                            .iter()
                            .copied()
                            .filter(|&dl| dl > 0.0 && dl < threshold)
                            .filter(|&dl| {
                                rows.iter()
                                    .filter(|r| r.delta == dl)
                                    .all(|r| r.result.diagnostics.verdict == Verdict::Stable)
                            })
                            .reduce(f64::max);
                        if let Some(dl) = certified {
                            if let Ok(c) = t1_constant(dl) {
                                report.records.push(CheckRecord {
                                    threshold: Some(dl),
                                    estimate: Some(c.original),
                                    ..CheckRecord::new(
                                        "t1_constant",
                                        CheckVerdict::Pass,
                                        prov(seed, n_max),
                                    )
                                });
                                report.constants.t1 = Some(c);
                            }
                        }
                        report.tail_sweep = rows;
                    }
                    Err(e) => {
                        report
                            .records
                            .push(error_record("gaussian_tail", prov(seed, n_max), e))
                    }
                }
            }
            (_, Err(e)) => report
                .records
                .push(error_record("gaussian_tail", prov(seed, n_max), e)),
            (None, _) => report.records.push(error_record(
                "gaussian_tail",
                prov(seed, n_max),
                "no thresholds",
            )),
        }
    }

    if let Some(check) = &cfg.t2 {
        let seed = cfg.seed.wrapping_add(3);
        let shifts: Vec<VectorFieldSpec> = check
            .shifts
            .iter()
            .map(|&c| VectorFieldSpec::Constant { value: vec![c; d] })
            .collect();
        let t2cfg = T2Config {
            n_paths: check.n_paths,
            seed,
            scheme: cfg.scheme,
            sinkhorn: check.sinkhorn,
        };
        match t2_check(original, &x0, &shifts, &grid, &t2cfg) {
            Ok(sec) => {
                for (row, c) in sec.rows.iter().zip(&check.shifts) {
                    let name = format!("t2 shift={c:.6e}");
                    let rec = match (row.ratio, row.ratio_half) {
                        (Some(a), Some(b)) => {
                            let change = (a - b).abs() / a;
                            CheckRecord {
                                estimate: Some(a),
                                stderr: Some(row.entropy_stderr),
                                margin: Some(0.1 - change),
                                ..CheckRecord::new(
                                    name,
                                    if a.is_finite() && change < 0.1 {
                                        CheckVerdict::Pass
                                    } else {
                                        CheckVerdict::Fail
                                    },
                                    prov(seed, check.n_paths),
                                )
                            }
                        }
                        _ => {
                            CheckRecord::new(name, CheckVerdict::Skipped, prov(seed, check.n_paths))
                                .with_note("entropy indistinguishable from zero")
                        }
                    };
                    report.records.push(rec);
                }
                report.constants.c2_hat = sec.c2_hat;
                report.t2 = Some(sec);
            }
            Err(e) => report
                .records
                .push(error_record("t2", prov(seed, check.n_paths), e)),
        }
    }

    if let Some(check) = &cfg.coupling {
        let seed = cfg.seed.wrapping_add(4);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = check
            .distances
            .iter()
            .map(|&r| {
                let mut y = x0.clone();
                y[0] += r;
                (x0.clone(), y)
            })
            .collect();
        match coupling_lipschitz_check(original, &pairs, check.n_pairs, &grid, seed, cfg.scheme) {
            Ok(rep) => {
                let rec = match rep.slope {
                    Some(s) => CheckRecord {
                        threshold: Some(2.0),
                        estimate: Some(s),
                        margin: Some(0.2 - (s - 2.0).abs()),
                        ..CheckRecord::new(
                            "coupling slope",
                            if (s - 2.0).abs() <= 0.2 {
                                CheckVerdict::Pass
                            } else {
                                CheckVerdict::Fail
                            },
                            prov(seed, check.n_pairs),
                        )
                    },
                    None => CheckRecord::new(
                        "coupling slope",
                        CheckVerdict::Skipped,
                        prov(seed, check.n_pairs),
                    )
                    .with_note("fewer than two positive distances"),
                };
                report.records.push(rec);
                report.constants.coupling_c2 = Some(rep.prefactor);
                report.coupling = Some(rep);
            }
            Err(e) => {
                report
                    .records
                    .push(error_record("coupling slope", prov(seed, check.n_pairs), e))
            }
        }
    }

    if let Some(check) = &cfg.invariance {
        let seed = cfg.seed.wrapping_add(5);
        report.records.push(invariance_record(check, seed).0);
    }
    report
}

fn invariance_record(
    check: &InvarianceCheck,
    seed: u64,
) -> (CheckRecord, Option<InvarianceReport>) {
    let prov = Provenance {
        seed,
        n: check.trials,
        grid: String::new(),
    };
    match invariance_suite(&check.sizes, check.trials, seed) {
        Ok(inv) => {
            let failures = inv.failures.len() as f64;
            let verdict = if inv.passed() {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            };
            let rec = CheckRecord {
                estimate: Some(failures),
                threshold: Some(0.0),
                margin: Some(-failures),
                ..CheckRecord::new("invariance", verdict, prov)
            };
            (rec, Some(inv))
        }
        Err(e) => (error_record("invariance", prov, e), None),
    }
}

/// The invariance suite on its own; the full trial report is returned
/// alongside for counterexample dumps.
pub fn run_invariance(check: &InvarianceCheck, seed: u64) -> (TciReport, Option<InvarianceReport>) {
    let (record, inv) = invariance_record(check, seed);
    (
        TciReport {
            seed,
            records: vec![record],
            ..Default::default()
        },
        inv,
    )
}
