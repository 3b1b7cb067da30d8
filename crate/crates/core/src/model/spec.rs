use serde::{Deserialize, Serialize};

use super::fields::{MatrixFieldSpec, VectorFieldSpec};
use super::modulus::ModulusSpec;

/// Declared bounds for the Dini model; all finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiniBounds {
    /// `‖b‖_{T,∞}`.
    pub dini_sup: f64,
    /// `‖∇B‖_{T,∞}`.
    pub grad_regular: f64,
    pub sigma: f64,
    pub grad_sigma: f64,
    pub hess_sigma: f64,
    /// `‖(σσ*)^{-1}‖_{T,∞}`.
    pub sigma_sigma_inv: f64,
}

/// `dX = {B_t(X) + b_t(X)} dt + σ_t(X) dW` with Lipschitz `B` and Dini `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiniModelSpec {
    pub dim: usize,
    pub horizon: f64,
    /// Lipschitz part `B`.
    pub regular_drift: VectorFieldSpec,
    /// Bounded Dini-continuous part `b`.
    pub dini_drift: VectorFieldSpec,
    /// Modulus `φ` with `|b_t(x) - b_t(y)| ≤ φ(|x - y|)`.
    pub modulus: ModulusSpec,
    pub sigma: MatrixFieldSpec,
    pub bounds: DiniBounds,
}

/// Growth condition declared for the locally bounded drift `b₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrowthTag {
    /// `⟨x, b₂(x)⟩ ≤ -κ₁|x|^{2+r} + κ₂` and `|b₂(x)| ≤ κ₃(1 + |x|^{1+r})`.
    Dissipative {
        r: f64,
        kappa1: f64,
        kappa2: f64,
        kappa3: f64,
    },
    /// `|b₂(x)| ≤ κ₄(1 + |x|)`.
    Linear { kappa4: f64 },
}

/// Cap applied to the singular drift at mesh `h`: `|b₁| ≤ scale · h^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftCap {
    pub scale: f64,
    pub exponent: f64,
}

impl Default for DriftCap {
    fn default() -> Self {
        Self {
            scale: 1.0,
            exponent: 0.25,
        }
    }
}

impl DriftCap {
    pub fn level(&self, h: f64) -> f64 {
        if h <= 0.0 {
            f64::INFINITY
        } else {
            self.scale * h.powf(-self.exponent)
        }
    }
}

/// `dX = {b₁(X) + b₂(X)} dt + σ(X) dW` with `b₁ ∈ L^p`, `p > d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularModelSpec {
    pub dim: usize,
    pub horizon: f64,
    /// Singular part `b₁`.
    pub singular_drift: VectorFieldSpec,
    pub p: f64,
    /// Locally bounded part `b₂`.
    pub growth_drift: VectorFieldSpec,
    pub growth: GrowthTag,
    pub sigma: MatrixFieldSpec,
    pub c0: f64,
    pub beta: f64,
    #[serde(default)]
    pub cap: DriftCap,
}

/// Either model family, tagged by `kind` in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Dini(DiniModelSpec),
    Singular(SingularModelSpec),
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Dini(m) => m.dim,
            ModelSpec::Singular(m) => m.dim,
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            ModelSpec::Dini(m) => m.horizon,
            ModelSpec::Singular(m) => m.horizon,
        }
    }
}

impl SingularModelSpec {
    /// `dX = -X dt + σ dW` in dimension `dim`, tagged dissipative with
    /// `r = 0, κ = (1, 0, 1)`.
    pub fn ornstein_uhlenbeck(dim: usize, sigma: f64, horizon: f64) -> Self {
        Self {
            dim,
            horizon,
            singular_drift: VectorFieldSpec::Zero,
            p: 2.0 * dim as f64 + 2.0,
            growth_drift: VectorFieldSpec::RadialPower {
                coeff: -1.0,
                power: 0.0,
            },
            growth: GrowthTag::Dissipative {
                r: 0.0,
                kappa1: 1.0,
                kappa2: 0.0,
                kappa3: 1.0,
            },
            sigma: MatrixFieldSpec::ScaledIdentity { scale: sigma },
            c0: (sigma * sigma).max(1.0 / (sigma * sigma)),
            beta: 0.5,
            cap: DriftCap::default(),
        }
    }
}

impl DiniModelSpec {
    /// One-dimensional benchmark: `B = 0`, `σ = 1`, `b = sgn(x) φ(|x|)/φ(1)`
    /// with the log-square modulus, so `‖b‖_∞ = 1`.
    pub fn log_square_benchmark() -> Self {
        let modulus = ModulusSpec::log_square();
        Self {
            dim: 1,
            horizon: 1.0,
            regular_drift: VectorFieldSpec::Zero,
            dini_drift: VectorFieldSpec::ModulusProfile {
                amplitude: 1.0,
                modulus: modulus.clone(),
            },
            // sgn(x)ψ(|x|) with concave ψ, ψ(0)=0 has modulus 2ψ; ψ = 9φ here.
            modulus: ModulusSpec::LogSquare {
                scale: 18.0,
                knee: 3.0,
            },
            sigma: MatrixFieldSpec::identity(),
            bounds: DiniBounds {
                dini_sup: 1.0,
                grad_regular: 0.0,
                sigma: 1.0,
                grad_sigma: 0.0,
                hess_sigma: 0.0,
                sigma_sigma_inv: 1.0,
            },
        }
    }

    /// Ornstein-Uhlenbeck written as a Dini model: `B(x) = -x`, `b = 0`.
    pub fn ornstein_uhlenbeck(dim: usize, horizon: f64) -> Self {
        Self {
            dim,
            horizon,
            regular_drift: VectorFieldSpec::RadialPower {
                coeff: -1.0,
                power: 0.0,
            },
            dini_drift: VectorFieldSpec::Zero,
            modulus: ModulusSpec::Holder {
                alpha: 0.5,
                constant: 1.0,
            },
            sigma: MatrixFieldSpec::identity(),
            bounds: DiniBounds {
                dini_sup: 0.0,
                grad_regular: 1.0,
                sigma: 1.0,
                grad_sigma: 0.0,
                hess_sigma: 0.0,
                sigma_sigma_inv: 1.0,
            },
        }
    }
}
