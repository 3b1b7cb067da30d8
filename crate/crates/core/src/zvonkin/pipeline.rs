use serde::{Deserialize, Serialize};

use super::elliptic::{solve_u_elliptic, EllipticConfig};
use super::parabolic::{
    solve_u_parabolic, solve_u_parabolic_auto, IterationRecord, LambdaAttempt, LambdaStrategy,
    ParabolicConfig,
};
use super::phi::build_phi;
use super::transformed::{transformed_dini, transformed_singular, TransformedModel};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    /// Fixed `λ`; doubled from `strategy.initial` when absent.
    pub lambda: Option<f64>,
    pub strategy: LambdaStrategy,
    pub parabolic: ParabolicConfig,
    /// Defaults to [`EllipticConfig::for_dim`].
    pub elliptic: Option<EllipticConfig>,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            strategy: LambdaStrategy::default(),
            parabolic: ParabolicConfig::default(),
            elliptic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformBuild {
    pub model: TransformedModel,
    pub lambda: f64,
    /// Every `λ` tried, in order.
    pub trace: Vec<LambdaAttempt>,
    /// Picard history at the accepted `λ`.
    pub history: Vec<IterationRecord>,
    pub u_sup: f64,
    pub grad_sup: f64,
}

/// A failed build with the `λ` values tried before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildFailure {
    pub error: Error,
    pub trace: Vec<LambdaAttempt>,
}

impl From<Error> for BuildFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            trace: Vec::new(),
        }
    }
}

fn attempt(lambda: f64, outcome: &str, iterations: usize, grad: Option<f64>) -> LambdaAttempt {
    LambdaAttempt {
        lambda,
        outcome: outcome.into(),
        iterations,
        grad_bound: grad,
    }
}

/// Solves for `u`, builds `Φ` and the transformed equation for either
/// model family.
pub fn build_transform(
    model: &ModelSpec,
    cfg: &TransformConfig,
) -> std::result::Result<TransformBuild, BuildFailure> {
    let threshold = cfg.strategy.grad_threshold;
    match model {
        ModelSpec::Dini(m) => {
            let (sol, trace) = match cfg.lambda {
                Some(lambda) => {
                    let sol =
                        solve_u_parabolic(m, lambda, &cfg.parabolic).map_err(|e| BuildFailure {
                            trace: vec![attempt(lambda, "failed", 0, None)],
                            error: e,
                        })?;
                    let t = vec![attempt(
                        lambda,
                        "fixed",
                        sol.history.len(),
                        Some(sol.grad_sup),
                    )];
                    (sol, t)
                }
                None => {
                    let auto = solve_u_parabolic_auto(m, &cfg.strategy, &cfg.parabolic)
                        .map_err(|(error, trace)| BuildFailure { error, trace })?;
                    (auto.solution, auto.trace)
                }
            };
            let (lambda, history, u_sup, grad_sup) =
                (sol.lambda, sol.history, sol.u_sup, sol.grad_sup);
            let phi = build_phi(sol.u, lambda, threshold).map_err(|error| BuildFailure {
                error,
                trace: trace.clone(),
            })?;
            let model = transformed_dini(phi, m, lambda)?;
            Ok(TransformBuild {
                model,
                lambda,
                trace,
                history,
                u_sup,
                grad_sup,
            })
        }
        ModelSpec::Singular(m) => {
            let ecfg = cfg
                .elliptic
                .unwrap_or_else(|| EllipticConfig::for_dim(m.dim));
            let lambdas: Vec<f64> = match cfg.lambda {
                Some(l) => vec![l],
                None => (0..=cfg.strategy.max_doublings)
                    .map(|k| cfg.strategy.initial * 2f64.powi(k as i32))
                    .collect(),
            };
            let mut trace = Vec::new();
            let mut last = Error::InvalidInput("no lambda attempted".into());
            for lambda in lambdas {
                let sol = solve_u_elliptic(m, lambda, &ecfg).map_err(|error| BuildFailure {
                    error,
                    trace: trace.clone(),
                })?;
                let ok = sol.converged && sol.grad_sup < threshold;
                let outcome = if ok {
                    "accepted"
                } else if !sol.converged {
                    "not converged"
                } else {
                    "gradient too large"
                };
                trace.push(attempt(
                    lambda,
                    outcome,
                    sol.history.len(),
                    Some(sol.grad_sup),
                ));
                if !ok {
                    last = if sol.converged {
                        Error::GradientTooLarge {
                            grad_bound: sol.grad_sup,
                            threshold,
                        }
                    } else {
                        Error::NotContractive {
                            lambda,
                            ratios: sol.history.iter().filter_map(|r| r.ratio).collect(),
                        }
                    };
                    continue;
                }
                let (history, u_sup, grad_sup) = (sol.history, sol.u_sup, sol.grad_sup);
                let phi = build_phi(sol.u, lambda, threshold).map_err(|error| BuildFailure {
                    error,
                    trace: trace.clone(),
                })?;
                let model = transformed_singular(phi, m, lambda)?;
                return Ok(TransformBuild {
                    model,
                    lambda,
                    trace,
                    history,
                    u_sup,
                    grad_sup,
                });
            }
            Err(BuildFailure { error: last, trace })
        }
    }
}

/// Shorthand when the trace is not needed.
pub fn transform_model(model: &ModelSpec, cfg: &TransformConfig) -> Result<TransformBuild> {
    build_transform(model, cfg).map_err(|f| f.error)
}
