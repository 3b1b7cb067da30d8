//! Closed-form thresholds for the exponential-moment and Gaussian-tail
//! conditions of the transformed equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GrowthTag;
use crate::zvonkin::TildeConstants;

/// Negative part `(x)⁻ = max(-x, 0)`.
fn neg_part(x: f64) -> f64 {
    (-x).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaThreshold {
    pub value: f64,
    /// Whether the admissible range is `λ < value` (else `λ ≤ value`).
    pub strict: bool,
}

impl LambdaThreshold {
    pub fn admits(&self, lambda: f64) -> bool {
        if self.strict {
            lambda < self.value
        } else {
            lambda <= self.value
        }
    }
}

/// Largest `λ` with `E exp{λ∫₀^T |Y_t|^{2r+2} dt} < ∞` guaranteed:
/// `e^{-(2+3κ̃₄T)}/(2‖σ̃‖²)` (linear) or `2^{-(r-1)⁻} κ̃₁² / ‖σ̃‖²` (dissipative,
/// strict only when `r > 0`).
pub fn lambda_threshold(tag: &GrowthTag, sigma_sup: f64, horizon: f64) -> LambdaThreshold {
    let s2 = sigma_sup * sigma_sup;
    match *tag {
        GrowthTag::Linear { kappa4 } => LambdaThreshold {
            value: (-(2.0 + 3.0 * kappa4 * horizon)).exp() / (2.0 * s2),
            strict: false,
        },
        GrowthTag::Dissipative { r, kappa1, .. } => LambdaThreshold {
            value: 2f64.powf(-neg_part(r - 1.0)) * kappa1 * kappa1 / s2,
            strict: r > 0.0,
        },
    }
}

/// Largest `δ` with `E exp{δ sup_t |Z_t|²} < ∞` guaranteed (strict):
/// `1/(4‖σ̃‖²T(2 + κ̃₃²κ̃₁⁻²2^{(r-1)⁻}))` or `1/(8‖σ̃‖²T(1 + κ̃₄²e^{2+3κ̃₄T}))`.
pub fn delta_threshold(tag: &GrowthTag, sigma_sup: f64, horizon: f64) -> f64 {
    let s2 = sigma_sup * sigma_sup;
    match *tag {
        GrowthTag::Linear { kappa4 } => {
            1.0 / (8.0
                * s2
                * horizon
                * (1.0 + kappa4 * kappa4 * (2.0 + 3.0 * kappa4 * horizon).exp()))
        }
        GrowthTag::Dissipative {
            r, kappa1, kappa3, ..
        } => {
            let ratio = kappa3 * kappa3 / (kappa1 * kappa1);
            1.0 / (4.0 * s2 * horizon * (2.0 + ratio * 2f64.powf(neg_part(r - 1.0))))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub tag: GrowthTag,
    pub sigma_sup: f64,
    pub horizon: f64,
    pub lambda_max: LambdaThreshold,
    pub delta_max: f64,
}

impl ThresholdSet {
    pub fn new(tag: GrowthTag, sigma_sup: f64, horizon: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = positive(sigma_sup)
            && positive(horizon)
            && match tag {
                GrowthTag::Linear { kappa4 } => kappa4.is_finite() && kappa4 >= 0.0,
                GrowthTag::Dissipative { kappa1, kappa3, .. } => {
                    positive(kappa1) && kappa3.is_finite()
                }
            };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "threshold inputs out of range: {tag:?}, σ̃ {sigma_sup}, T {horizon}"
            )));
        }
        Ok(Self {
            tag,
            sigma_sup,
            horizon,
            lambda_max: lambda_threshold(&tag, sigma_sup, horizon),
            delta_max: delta_threshold(&tag, sigma_sup, horizon),
        })
    }

    /// Thresholds from constants measured on the transformed drift.
    pub fn from_fit(fit: &TildeConstants, horizon: f64) -> Result<Self> {
        Self::new(fit.tag, fit.sigma_sup, horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Constant {
    pub delta: f64,
    /// `C̃ = 1/(4δ)` for the transformed law.
    pub transformed: f64,
    /// `4C̃`, accounting for the bi-Lipschitz factor of `Φ⁻¹`.
    pub original: f64,
}

pub fn t1_constant(delta: f64) -> Result<T1Constant> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "certified delta must be positive, got {delta}"
        )));
    }
    let transformed = 1.0 / (4.0 * delta);
    Ok(T1Constant {
        delta,
        transformed,
        original: 4.0 * transformed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const OU: GrowthTag = GrowthTag::Dissipative {
        r: 0.0,
        kappa1: 1.0,
        kappa2: 0.0,
        kappa3: 1.0,
    };

    #[test]
    fn reference_values() {
        let lin = lambda_threshold(&GrowthTag::Linear { kappa4: 1.0 }, 1.0, 1.0);
        assert_eq!(lin.value, (-5.0f64).exp() / 2.0);
        assert!((lin.value - 0.003369).abs() < 1e-6);
        assert_eq!(
            lambda_threshold(&OU, 1.0, 1.0),
            LambdaThreshold {
                value: 0.5,
                strict: false
            }
        );
        assert_eq!(delta_threshold(&OU, 1.0, 1.0), 0.0625);
        assert_eq!(
            delta_threshold(&GrowthTag::Linear { kappa4: 0.0 }, 1.0, 1.0),
            0.125
        );
    }

    #[test]
    fn strictness_follows_r() {
        let t = GrowthTag::Dissipative {
            r: 0.5,
            kappa1: 1.0,
            kappa2: 0.0,
            kappa3: 1.0,
        };
        let l = lambda_threshold(&t, 1.0, 1.0);
        assert!(l.strict && !l.admits(l.value));
        let t = GrowthTag::Dissipative {
            r: -0.5,
            kappa1: 1.0,
            kappa2: 0.0,
            kappa3: 1.0,
        };
        let l = lambda_threshold(&t, 1.0, 1.0);
        assert!(!l.strict && l.admits(l.value));
    }

    #[test]
    fn t1_arithmetic() {
        assert_eq!(
            t1_constant(0.0625).unwrap(),
            T1Constant {
                delta: 0.0625,
                transformed: 4.0,
                original: 16.0
            }
        );
        assert_eq!(t1_constant(0.125).unwrap().original, 8.0);
        assert!(t1_constant(0.0).is_err());
    }
}
