//! The equation satisfied by `Y_t = Φ_t(X_t)`.
//!
//! For the Dini model `b̃ = (λu + B)∘Φ⁻¹`; for the singular model
//! `b̃ = (λu + ∇Φ·b₂)∘Φ⁻¹`. In both cases `σ̃ = (∇Φ σ)∘Φ⁻¹`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::phi::Homeomorphism;
use crate::error::{Error, Result};
use crate::model::{
    DiniModelSpec, GrowthTag, MatrixFieldSpec, ModelSpec, SingularModelSpec, VectorFieldSpec,
};
use crate::numerics::{dot, norm, operator_norm};
use crate::simulate::{fingerprint_of, Sde};

/// Which drift survives the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// `λu + B`: the regular drift sits inside the generator of `u`.
    Parabolic,
    /// `λu + ∇Φ·b₂`.
    Elliptic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedModel {
    pub phi: Homeomorphism,
    pub lambda: f64,
    pub kind: TransformKind,
    /// `B` (parabolic) or `b₂` (elliptic), in original coordinates.
    pub kept_drift: VectorFieldSpec,
    pub sigma: MatrixFieldSpec,
    /// Growth tag of the original model, if it carries one.
    pub growth: Option<GrowthTag>,
    pub horizon: f64,
}

pub fn transformed_model(
    phi: Homeomorphism,
    model: &ModelSpec,
    lambda: f64,
) -> Result<TransformedModel> {
    match model {
        ModelSpec::Dini(m) => transformed_dini(phi, m, lambda),
        ModelSpec::Singular(m) => transformed_singular(phi, m, lambda),
    }
}

fn check_dim(phi: &Homeomorphism, dim: usize) -> Result<()> {
    if phi.dim() != dim {
        return Err(Error::GridMismatch(format!(
            "transform has dimension {}, model {dim}",
            phi.dim()
        )));
    }
    Ok(())
}

pub fn transformed_dini(
    phi: Homeomorphism,
    model: &DiniModelSpec,
    lambda: f64,
) -> Result<TransformedModel> {
    check_dim(&phi, model.dim)?;
    Ok(TransformedModel {
        phi,
        lambda,
        kind: TransformKind::Parabolic,
        kept_drift: model.regular_drift.clone(),
        sigma: model.sigma.clone(),
        growth: None,
        horizon: model.horizon,
    })
}

pub fn transformed_singular(
    phi: Homeomorphism,
    model: &SingularModelSpec,
    lambda: f64,
) -> Result<TransformedModel> {
    check_dim(&phi, model.dim)?;
    Ok(TransformedModel {
        phi,
        lambda,
        kind: TransformKind::Elliptic,
        kept_drift: model.growth_drift.clone(),
        sigma: model.sigma.clone(),
        growth: Some(model.growth),
        horizon: model.horizon,
    })
}

/// `(b̃_t(y), σ̃_t(y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedCoefficients {
    pub drift: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `Φ_t⁻¹(y)`.
    pub preimage: Vec<f64>,
}

impl TransformedModel {
    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    pub fn at(&self, t: f64, y: &[f64]) -> Result<TransformedCoefficients> {
        let d = self.dim();
        let x = self.phi.invert(t, y)?;
        let u = self.phi.u.eval_vec(t, &x)?;
        let jac = self.phi.jacobian(t, &x)?;
        let kept = self.kept_drift.eval_vec(t, &x);
        let s = self.sigma.eval_vec(t, &x);
        if kept.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCoefficient {
                name: "transformed".into(),
                point: x,
            });
        }
        let mut drift: Vec<f64> = u.iter().map(|v| self.lambda * v).collect();
        match self.kind {
            TransformKind::Parabolic => drift.iter_mut().zip(&kept).for_each(|(a, b)| *a += b),
            TransformKind::Elliptic => {
                for i in 0..d {
                    drift[i] += (0..d).map(|k| jac[i * d + k] * kept[k]).sum::<f64>();
                }
            }
        }
        let mut sigma = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                sigma[i * d + j] = (0..d).map(|k| jac[i * d + k] * s[k * d + j]).sum();
            }
        }
        Ok(TransformedCoefficients {
            drift,
            sigma,
            preimage: x,
        })
    }
}

impl Sde for TransformedModel {
    fn dim(&self) -> usize {
        self.phi.dim()
    }

    fn coefficients(
        &self,
        t: f64,
        x: &[f64],
        _h: f64,
        drift: &mut [f64],
        diffusion: &mut [f64],
    ) -> Result<()> {
        let c = self.at(t, x)?;
        drift.copy_from_slice(&c.drift);
        diffusion.copy_from_slice(&c.sigma);
        Ok(())
    }

    fn fingerprint(&self) -> String {
        fingerprint_of(
            "transformed",
            &(
                &self.kept_drift,
                &self.sigma,
                self.kind,
                self.lambda,
                self.phi.grad_bound,
                self.phi.u.values.len(),
            ),
        )
    }
}

/// Measured constants of the transformed drift on a radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TildeConstants {
    /// Fitted tag: dissipative if the original model is, otherwise linear.
    pub tag: GrowthTag,
    /// `max |b̃(y)| / max(1, |y|)`, always measured.
    pub kappa4: f64,
    /// Smallest grid radius beyond which `⟨y, b̃(y)⟩ < 0` holds throughout.
    pub negative_radius: Option<f64>,
    /// `max ‖σ̃‖` on the grid.
    pub sigma_sup: f64,
    /// `max ‖σ‖` at the preimages.
    pub sigma_orig_sup: f64,
    pub radius: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TildeGridConfig {
    /// Fraction of `R - ‖u‖_∞` covered by the grid.
    pub coverage: f64,
    pub radii: usize,
    pub angles: usize,
    pub time_points: usize,
}

impl Default for TildeGridConfig {
    fn default() -> Self {
        Self {
            coverage: 0.9,
            radii: 200,
            angles: 64,
            time_points: 5,
        }
    }
}

struct Sample {
    y: Vec<f64>,
    t: f64,
    inner: f64,
    drift_norm: f64,
    sigma: f64,
    sigma_orig: f64,
}

fn radial_points(d: usize, radius: f64, radii: usize, angles: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]];
    for i in 1..=radii {
        let r = radius * i as f64 / radii as f64;
        if d == 1 {
            pts.push(vec![r]);
            pts.push(vec![-r]);
        } else {
            for k in 0..angles {
                let th = 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
                pts.push(vec![r * th.cos(), r * th.sin()]);
            }
        }
    }
    pts
}

/// Fits the tightest growth constants of `b̃` on a radial grid inside the
/// region where `Φ⁻¹` stays in the box. Normalisations use `max(1, |y|^q)`,
/// which dominates the stated forms `1 + |y|^q`.
pub fn verify_tilde_conditions(
    tm: &TransformedModel,
    cfg: &TildeGridConfig,
) -> Result<TildeConstants> {
    let d = tm.dim();
    let radius = cfg.coverage * (tm.phi.radius() - tm.phi.u.sup_norm());
    if !(radius > 1.0) {
        return Err(Error::FitFailure {
            point: vec![radius],
            reason: "grid box too small to reach |y| ≥ 1 after inversion".into(),
        });
    }
    let pts = radial_points(d, radius, cfg.radii, cfg.angles);
    let times: Vec<f64> = if tm.phi.u.times.is_some() && cfg.time_points > 1 {
        (0..cfg.time_points)
            .map(|k| tm.horizon * k as f64 / (cfg.time_points - 1) as f64)
            .collect()
    } else {
        vec![0.0]
    };
    let jobs: Vec<(f64, &Vec<f64>)> = times
        .iter()
        .flat_map(|&t| pts.iter().map(move |y| (t, y)))
        .collect();
    let samples: Vec<Result<Sample>> = jobs
        .par_iter()
        .map(|&(t, y)| {
            let c = tm.at(t, y)?;
            let s = tm.sigma.eval_vec(t, &c.preimage);
            Ok(Sample {
                y: y.clone(),
                t,
                inner: dot(y, &c.drift),
                drift_norm: norm(&c.drift),
                sigma: operator_norm(&c.sigma, d),
                sigma_orig: operator_norm(&s, d),
            })
        })
        .collect();
    let samples: Vec<Sample> = samples.into_iter().collect::<Result<_>>()?;

    let mut kappa4: f64 = 0.0;
    let mut sigma_sup: f64 = 0.0;
    let mut sigma_orig_sup: f64 = 0.0;
    for s in &samples {
        kappa4 = kappa4.max(s.drift_norm / norm(&s.y).max(1.0));
        sigma_sup = sigma_sup.max(s.sigma);
        sigma_orig_sup = sigma_orig_sup.max(s.sigma_orig);
    }
    if !(kappa4.is_finite() && sigma_sup.is_finite()) {
        return Err(Error::FitFailure {
            point: vec![],
            reason: "non-finite transformed coefficients".into(),
        });
    }

    // smallest radius beyond which every sample has ⟨y, b̃⟩ < 0
    let mut by_radius: Vec<(f64, f64)> = samples.iter().map(|s| (norm(&s.y), s.inner)).collect();
    by_radius.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut negative_radius = None;
    for (r, inner) in by_radius.iter().rev() {
        if *r == 0.0 || *inner >= 0.0 {
            break;
        }
        negative_radius = Some(*r);
    }

    let tag = match tm.growth {
        Some(GrowthTag::Dissipative { r, .. }) => {
            let q = 2.0 + r;
            let mut kappa1 = f64::INFINITY;
            let mut worst: Option<&Sample> = None;
            for s in samples.iter() {
                let ny = norm(&s.y);
                if ny < 1.0 {
                    continue;
                }
                let k = -s.inner / ny.powf(q);
                if k < kappa1 {
                    kappa1 = k;
                    worst = Some(s);
                }
            }
            if !(kappa1 > 0.0 && kappa1.is_finite()) {
                let mut point = worst.map(|s| s.y.clone()).unwrap_or_default();
                if let Some(s) = worst {
                    point.push(s.t);
                }
                return Err(Error::FitFailure {
                    point,
                    reason: format!("no positive dissipativity constant (best {kappa1:e})"),
                });
            }
            let kappa2 = samples
                .iter()
                .map(|s| s.inner + kappa1 * norm(&s.y).powf(q))
                .fold(0.0, f64::max);
            let kappa3 = samples
                .iter()
                .map(|s| s.drift_norm / norm(&s.y).powf(1.0 + r).max(1.0))
                .fold(0.0, f64::max);
            GrowthTag::Dissipative {
                r,
                kappa1,
                kappa2,
                kappa3,
            }
        }
        _ => GrowthTag::Linear { kappa4 },
    };
    Ok(TildeConstants {
        tag,
        kappa4,
        negative_radius,
        sigma_sup,
        sigma_orig_sup,
        radius,
        n_points: samples.len(),
    })
}
