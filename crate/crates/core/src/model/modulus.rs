//! Moduli of continuity and the class-𝒟 checks (monotone, concave square,
//! finite Dini integral).

use serde::{Deserialize, Serialize};

use crate::numerics::gauss_legendre;

/// A modulus of continuity `φ: [0, ∞) → [0, ∞)` from a named family.
///
/// Hölder and Lipschitz bounds are represented by their class-𝒟 envelope:
/// `s^{2α}` is convex for `α > 1/2`, so the exponent is capped at `1/2`
/// (which dominates `s^α` on `[0, 1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulusSpec {
    Holder {
        alpha: f64,
        constant: f64,
    },
    /// `scale · (ln s)^{-2}` on `(0, e^{-knee})`, `0` at `0`, constant beyond.
    LogSquare {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "default_knee")]
        knee: f64,
    },
    Lipschitz {
        constant: f64,
    },
    /// Piecewise-linear through sorted samples, linear to the origin below the
    /// first sample and constant beyond the last.
    CustomTable {
        s: Vec<f64>,
        phi: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn default_knee() -> f64 {
    3.0
}

impl ModulusSpec {
    pub fn log_square() -> Self {
        ModulusSpec::LogSquare {
            scale: 1.0,
            knee: 3.0,
        }
    }

    fn effective_exponent(&self) -> Option<f64> {
        match self {
            ModulusSpec::Holder { alpha, .. } => Some(alpha.min(0.5)),
            ModulusSpec::Lipschitz { .. } => Some(0.5),
            _ => None,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return match self {
                ModulusSpec::CustomTable { s: xs, phi } if xs.first() == Some(&0.0) => phi[0],
                _ => 0.0,
            };
        }
        match self {
            ModulusSpec::Holder { constant, .. } | ModulusSpec::Lipschitz { constant } => {
                constant * s.powf(self.effective_exponent().unwrap())
            }
            ModulusSpec::LogSquare { scale, knee } => {
                if s < (-knee).exp() {
                    scale / (s.ln() * s.ln())
                } else {
                    scale / (knee * knee)
                }
            }
            ModulusSpec::CustomTable { s: xs, phi } => table_eval(xs, phi, s),
        }
    }

    /// `ln φ(e^{-v})`, evaluated without underflow for the analytic families.
    pub fn ln_eval_log(&self, v: f64) -> f64 {
        match self {
            ModulusSpec::Holder { constant, .. } | ModulusSpec::Lipschitz { constant } => {
                constant.ln() - self.effective_exponent().unwrap() * v
            }
            ModulusSpec::LogSquare { scale, knee } => {
                if v > *knee {
                    scale.ln() - 2.0 * v.ln()
                } else {
                    scale.ln() - 2.0 * knee.ln()
                }
            }
            ModulusSpec::CustomTable { .. } => self.eval((-v).exp()).ln(),
        }
    }

    /// Supremum of `φ` over `[0, 1]`.
    pub fn sup_unit(&self) -> f64 {
        self.eval(1.0)
    }

    /// Runs the class-𝒟 checks on a uniform grid of `samples` points in `[0, 1]`.
    pub fn class_d_report(&self, samples: usize) -> ModulusReport {
        let n = samples.max(1000);
        let h = 1.0 / (n - 1) as f64;
        let vals: Vec<f64> = (0..n).map(|i| self.eval(i as f64 * h)).collect();
        let min_increment = vals
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let (mut worst, mut worst_at) = (f64::NEG_INFINITY, 0.0);
        for (i, w) in sq.windows(3).enumerate() {
            let d2 = w[0] - 2.0 * w[1] + w[2];
            if d2 > worst {
                worst = d2;
                worst_at = (i + 1) as f64 * h;
            }
        }
        let dini = dini_check(|v| self.ln_eval_log(v).exp());
        ModulusReport {
            value_at_zero: self.eval(0.0),
            min_increment,
            max_square_second_difference: worst,
            worst_concavity_point: worst_at,
            dini,
        }
    }

    /// Smallest `L` with `φ(s) ≤ L s^α` for all sampled `s ∈ (0, 1]`, or `None`
    /// if the ratio `φ(s)/s^α` grows without bound as `s ↓ 0`.
    pub fn holder_fit(&self, alpha: f64) -> Option<f64> {
        // work in v = -ln s on [0, 2^20]
        let v_max = 2f64.powi(20);
        let n = 4096;
        let mut head = f64::NEG_INFINITY;
        let mut tail = f64::NEG_INFINITY;
        for i in 0..=n {
            let v = v_max * (i as f64 / n as f64).powi(3);
            let g = self.ln_eval_log(v) + alpha * v;
            if v <= v_max / 2.0 {
                head = head.max(g);
            } else {
                tail = tail.max(g);
            }
        }
        if tail > head + 1e-9 * head.abs().max(1.0) {
            None
        } else {
            Some(head.max(tail).exp())
        }
    }
}

fn table_eval(xs: &[f64], phi: &[f64], s: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if s <= xs[0] {
        return if xs[0] > 0.0 {
            phi[0] * s / xs[0]
        } else {
            phi[0]
        };
    }
    if s >= xs[xs.len() - 1] {
        return phi[phi.len() - 1];
    }
    let k = xs.partition_point(|&x| x <= s) - 1;
    let t = (s - xs[k]) / (xs[k + 1] - xs[k]);
    phi[k] + t * (phi[k + 1] - phi[k])
}

/// Outcome of the Dini-integral check `∫_ε^1 φ(s)/s ds` as `ε ↓ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiniCheck {
    /// Partial integrals `∫_0^{V_k} φ(e^{-v}) dv` for `V_k = 2^k`.
    pub partial_integrals: Vec<f64>,
    /// Last doubling increment, a proxy for the remaining tail.
    pub tail: f64,
    pub finite: bool,
}

pub const DINI_TAIL_TOL: f64 = 1e-4;

/// Dini check for `g(v) = φ(e^{-v})`: the partial integrals over `v ∈ [0, 2^k]`
/// must form a Cauchy sequence with the last doubling below [`DINI_TAIL_TOL`].
pub fn dini_check(g: impl Fn(f64) -> f64) -> DiniCheck {
    let (nodes, weights) = gauss_legendre(8);
    let panel = |a: f64, b: f64, panels: usize| -> f64 {
        let w = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * w;
            for (x, wt) in nodes.iter().zip(&weights) {
                acc += wt * g(lo + 0.5 * w * (x + 1.0)) * 0.5 * w;
            }
        }
        acc
    };
    let mut partial = Vec::with_capacity(25);
    let mut acc = panel(0.0, 1.0, 16);
    partial.push(acc);
    let mut increments = Vec::new();
    for k in 1..=24 {
        let a = 2f64.powi(k - 1);
        let inc = panel(a, 2.0 * a, 32);
        increments.push(inc);
        acc += inc;
        partial.push(acc);
    }
    let tail = *increments.last().unwrap();
    let settled = increments[increments.len() - 6..]
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    DiniCheck {
        partial_integrals: partial,
        tail,
        finite: acc.is_finite() && tail <= DINI_TAIL_TOL && settled,
    }
}

/// Class-𝒟 membership diagnostics of a modulus on its sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub value_at_zero: f64,
    /// Smallest consecutive increment; negative means not monotone.
    pub min_increment: f64,
    /// Largest second difference of `φ²`; positive beyond tolerance means not concave.
    pub max_square_second_difference: f64,
    pub worst_concavity_point: f64,
    pub dini: DiniCheck,
}

pub const CONCAVITY_TOL: f64 = 1e-9;
pub const MONOTONE_TOL: f64 = 1e-12;

impl ModulusReport {
    pub fn zero_at_origin(&self) -> bool {
        self.value_at_zero == 0.0
    }

    pub fn monotone(&self) -> bool {
        self.min_increment >= -MONOTONE_TOL
    }

    pub fn square_concave(&self) -> bool {
        self.max_square_second_difference <= CONCAVITY_TOL
    }

    pub fn in_class_d(&self) -> bool {
        self.zero_at_origin() && self.monotone() && self.square_concave() && self.dini.finite
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_family_is_in_class_d() {
        for &(alpha, c) in &[(0.1, 1.0), (0.5, 2.0), (0.8, 0.5), (1.0, 3.0)] {
            let m = ModulusSpec::Holder { alpha, constant: c };
            let r = m.class_d_report(2000);
            assert!(r.in_class_d(), "holder({alpha},{c}) rejected: {r:?}");
        }
    }

    #[test]
    fn log_square_is_dini_but_not_holder() {
        let m = ModulusSpec::log_square();
        let r = m.class_d_report(2000);
        assert!(r.dini.finite);
        assert!(r.zero_at_origin() && r.monotone());
        // The tail of the Dini integral behaves like 1/V.
        assert!(r.dini.tail < 1e-6);
        for alpha in [1e-3, 0.01, 0.1, 0.5, 1.0] {
            assert_eq!(m.holder_fit(alpha), None, "alpha = {alpha}");
        }
    }

    #[test]
    fn log_square_square_is_convex_below_default_knee() {
        // (ln s)^{-4} has second derivative 4 s^{-2} L^{-6} (5 - L), L = -ln s,
        // so it is convex on (e^{-5}, e^{-3}).
        let r = ModulusSpec::log_square().class_d_report(2000);
        assert!(!r.square_concave());
        assert!(r.worst_concavity_point > (-5f64).exp() && r.worst_concavity_point < (-3f64).exp());
        let r5 = ModulusSpec::LogSquare {
            scale: 1.0,
            knee: 5.0,
        }
        .class_d_report(2000);
        assert!(r5.in_class_d(), "{r5:?}");
    }

    #[test]
    fn holder_fit_recovers_constant() {
        let m = ModulusSpec::Holder {
            alpha: 0.3,
            constant: 2.0,
        };
        let l = m.holder_fit(0.3).unwrap();
        assert!((l - 2.0).abs() < 1e-9);
        assert_eq!(m.holder_fit(0.4), None);
    }

    #[test]
    fn negative_increments_rejected() {
        let m = ModulusSpec::CustomTable {
            s: vec![0.0, 0.5, 1.0],
            phi: vec![0.0, 1.0, 0.5],
        };
        let r = m.class_d_report(1000);
        assert!(!r.monotone());
        assert!(!r.in_class_d());
    }

    #[test]
    fn non_dini_integrand_detected() {
        // φ(s) = 1/|ln s| near zero: ∫ dv / v diverges logarithmically.
        let c = dini_check(|v| 1.0 / v.max(1.0));
        assert!(!c.finite);
        assert!((c.tail - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn table_interpolates() {
        let m = ModulusSpec::CustomTable {
            s: vec![0.1, 0.2],
            phi: vec![1.0, 2.0],
        };
        assert_eq!(m.eval(0.0), 0.0);
        assert!((m.eval(0.05) - 0.5).abs() < 1e-15);
        assert!((m.eval(0.15) - 1.5).abs() < 1e-15);
        assert_eq!(m.eval(7.0), 2.0);
    }
}
