//! Coefficient families for drifts and diffusion matrices.
//!
//! Every family is plain data so model specs round-trip through config files.

use serde::{Deserialize, Serialize};

use super::modulus::ModulusSpec;
use crate::numerics::norm;

/// A (possibly time-dependent) vector field `ℝ^d → ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorFieldSpec {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `x ↦ A x + c`.
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Vec<f64>,
    },
    /// `x ↦ coeff · |x|^power · x`; `coeff = -1, power = r` is the model
    /// dissipative drift with growth exponent `1 + r`.
    RadialPower {
        coeff: f64,
        power: f64,
    },
    /// Componentwise `amplitude · sgn(x_i) · φ(min(|x_i|, 1)) / φ(1)`: bounded by
    /// `amplitude`, with the regularity of `φ` at the origin.
    ModulusProfile {
        amplitude: f64,
        modulus: ModulusSpec,
    },
    /// `coeff · |x|^{-gamma} · direction` on `0 < |x| ≤ 1`, zero elsewhere.
    /// Lies in `L^p` whenever `gamma · p < d`.
    SingularPower {
        coeff: f64,
        gamma: f64,
        direction: Vec<f64>,
    },
    /// `value · 1_{|x| ≤ radius}`.
    Indicator {
        value: Vec<f64>,
        radius: f64,
    },
    /// Componentwise `amplitude · sin(frequency · x_i)`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
    },
    /// Componentwise `|x_i|`.
    Abs,
    Sum {
        terms: Vec<VectorFieldSpec>,
    },
    /// `(1 + amplitude · sin(omega · t)) · inner(x)`.
    TimeModulated {
        inner: Box<VectorFieldSpec>,
        amplitude: f64,
        omega: f64,
    },
}

impl VectorFieldSpec {
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            VectorFieldSpec::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            VectorFieldSpec::Constant { value } => out.copy_from_slice(&value[..d]),
            VectorFieldSpec::Linear { matrix, offset } => {
                for i in 0..d {
                    let mut s = offset.get(i).copied().unwrap_or(0.0);
                    for j in 0..d {
                        s += matrix[i][j] * x[j];
                    }
                    out[i] = s;
                }
            }
            VectorFieldSpec::RadialPower { coeff, power } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let f = if *power == 0.0 {
                    *coeff
                } else {
                    coeff * r2.powf(0.5 * power)
                };
                for i in 0..d {
                    out[i] = f * x[i];
                }
            }
            VectorFieldSpec::ModulusProfile { amplitude, modulus } => {
                let top = modulus.sup_unit();
                for i in 0..d {
                    let s = x[i].abs().min(1.0);
                    let sign = if x[i] > 0.0 {
                        1.0
                    } else if x[i] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    out[i] = amplitude * sign * modulus.eval(s) / top;
                }
            }
            VectorFieldSpec::SingularPower {
                coeff,
                gamma,
                direction,
            } => {
                let r = norm(x);
                let f = if r > 0.0 && r <= 1.0 {
                    coeff * r.powf(-gamma)
                } else {
                    0.0
                };
                for i in 0..d {
                    out[i] = f * direction[i];
                }
            }
            VectorFieldSpec::Indicator { value, radius } => {
                let inside = norm(x) <= *radius;
                for i in 0..d {
                    out[i] = if inside { value[i] } else { 0.0 };
                }
            }
            VectorFieldSpec::Sinusoid {
                amplitude,
                frequency,
            } => {
                for i in 0..d {
                    out[i] = amplitude * (frequency * x[i]).sin();
                }
            }
            VectorFieldSpec::Abs => {
                for i in 0..d {
                    out[i] = x[i].abs();
                }
            }
            VectorFieldSpec::Sum { terms } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut tmp = vec![0.0; d];
                for term in terms {
                    term.eval(t, x, &mut tmp);
                    for i in 0..d {
                        out[i] += tmp[i];
                    }
                }
            }
            VectorFieldSpec::TimeModulated {
                inner,
                amplitude,
                omega,
            } => {
                inner.eval(t, x, out);
                let f = 1.0 + amplitude * (omega * t).sin();
                out.iter_mut().for_each(|o| *o *= f);
            }
        }
    }

    pub fn eval_vec(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval(t, x, &mut out);
        out
    }

    pub fn is_zero(&self) -> bool {
        match self {
            VectorFieldSpec::Zero => true,
            VectorFieldSpec::Sum { terms } => terms.iter().all(|t| t.is_zero()),
            VectorFieldSpec::Constant { value } => value.iter().all(|v| *v == 0.0),
            _ => false,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        match self {
            VectorFieldSpec::TimeModulated {
                amplitude, omega, ..
            } => *amplitude != 0.0 && *omega != 0.0,
            VectorFieldSpec::Sum { terms } => terms.iter().any(|t| t.is_time_dependent()),
            _ => false,
        }
    }

    /// Closed-form `‖·‖_{L^p}` for the families with compact singular support.
    pub fn lp_norm(&self, p: f64, d: usize) -> Option<f64> {
        let sphere = match d {
            1 => 2.0,
            2 => 2.0 * std::f64::consts::PI,
            3 => 4.0 * std::f64::consts::PI,
            _ => return None,
        };
        match self {
            VectorFieldSpec::Zero => Some(0.0),
            VectorFieldSpec::SingularPower {
                coeff,
                gamma,
                direction,
            } => {
                let exponent = d as f64 - gamma * p;
                if exponent <= 0.0 {
                    return Some(f64::INFINITY);
                }
                let dir = norm(direction);
                Some(((coeff.abs() * dir).powf(p) * sphere / exponent).powf(1.0 / p))
            }
            VectorFieldSpec::Indicator { value, radius } => {
                let vol = sphere * radius.powi(d as i32) / d as f64;
                Some(norm(value) * vol.powf(1.0 / p))
            }
            _ => None,
        }
    }
}

/// A (possibly time-dependent) matrix field `ℝ^d → ℝ^{d×d}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixFieldSpec {
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    ScaledIdentity {
        scale: f64,
    },
    /// `diag(base + amplitude · sin(frequency · x_i))`.
    DiagonalSinusoid {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl MatrixFieldSpec {
    pub fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            MatrixFieldSpec::Constant { matrix } => {
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = matrix[i][j];
                    }
                }
            }
            MatrixFieldSpec::ScaledIdentity { scale } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..d {
                    out[i * d + i] = *scale;
                }
            }
            MatrixFieldSpec::DiagonalSinusoid {
                base,
                amplitude,
                frequency,
            } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..d {
                    out[i * d + i] = base + amplitude * (frequency * x[i]).sin();
                }
            }
        }
    }

    pub fn eval_vec(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut out = vec![0.0; d * d];
        self.eval(t, x, &mut out);
        out
    }

    pub fn identity() -> Self {
        MatrixFieldSpec::ScaledIdentity { scale: 1.0 }
    }

    /// True when the field does not depend on the state.
    pub fn is_constant(&self) -> bool {
        !matches!(self, MatrixFieldSpec::DiagonalSinusoid { amplitude, .. } if *amplitude != 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_power_cubic() {
        let f = VectorFieldSpec::RadialPower {
            coeff: -1.0,
            power: 2.0,
        };
        assert_eq!(f.eval_vec(0.0, &[2.0]), vec![-8.0]);
        let v = f.eval_vec(0.0, &[3.0, 4.0]);
        assert!((v[0] + 75.0).abs() < 1e-12 && (v[1] + 100.0).abs() < 1e-12);
    }

    #[test]
    fn modulus_profile_is_bounded_by_amplitude() {
        let f = VectorFieldSpec::ModulusProfile {
            amplitude: 1.0,
            modulus: ModulusSpec::log_square(),
        };
        assert_eq!(f.eval_vec(0.0, &[0.0]), vec![0.0]);
        assert_eq!(f.eval_vec(0.0, &[5.0]), vec![1.0]);
        assert_eq!(f.eval_vec(0.0, &[-0.2]), vec![-1.0]);
        let v = f.eval_vec(0.0, &[1e-3])[0];
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn singular_power_lp_norm() {
        let f = VectorFieldSpec::SingularPower {
            coeff: 1.0,
            gamma: 0.2,
            direction: vec![1.0],
        };
        // ∫_{-1}^{1} |x|^{-0.8} dx = 2 / 0.2 = 10
        let n = f.lp_norm(4.0, 1).unwrap();
        assert!((n - 10f64.powf(0.25)).abs() < 1e-12);
        let g = VectorFieldSpec::SingularPower {
            coeff: 1.0,
            gamma: 0.3,
            direction: vec![1.0],
        };
        assert_eq!(g.lp_norm(4.0, 1), Some(f64::INFINITY));
        assert_eq!(f.eval_vec(0.0, &[0.0]), vec![0.0]);
        assert_eq!(f.eval_vec(0.0, &[1.5]), vec![0.0]);
    }

    #[test]
    fn config_roundtrip() {
        let f = VectorFieldSpec::Sum {
            terms: vec![
                VectorFieldSpec::RadialPower {
                    coeff: -1.0,
                    power: 0.0,
                },
                VectorFieldSpec::ModulusProfile {
                    amplitude: 1.0,
                    modulus: ModulusSpec::log_square(),
                },
            ],
        };
        let s = serde_json::to_string(&f).unwrap();
        let back: VectorFieldSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
    }
}
