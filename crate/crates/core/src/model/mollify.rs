//! Smooth/Lipschitz splitting `B = B̄ + B̂` by convolution with a bump kernel.
//!
//! The kernel is `r(y) = c_d (1 - |y|²)³` on the unit ball, with `c_d` fixed
//! once by quadrature so that `∫ r = 1`. `B̄ = B * r_w` with
//! `r_w(y) = w^{-d} r(y/w)`, and `B̂ = B - B̄` satisfies `‖B̂‖ ≤ ‖∇B‖ w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, norm, operator_norm};

const GL_ORDER: usize = 4;

fn profile(rho2: f64) -> f64 {
    if rho2 >= 1.0 {
        0.0
    } else {
        let s = 1.0 - rho2;
        s * s * s
    }
}

/// Quadrature rule `(offsets, weights)` for `∫ f(y) (1 - |y|²)³ dy` over the
/// unit ball (unnormalised).
#[derive(Debug, Clone)]
struct BallRule {
    offsets: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn raw_ball_rule(dim: usize, panels: usize) -> Result<BallRule> {
    let (gx, gw) = gauss_legendre(GL_ORDER);
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            let h = 2.0 / panels as f64;
            for p in 0..panels {
                let lo = -1.0 + p as f64 * h;
                for (x, w) in gx.iter().zip(&gw) {
                    let y = lo + 0.5 * h * (x + 1.0);
                    offsets.push(vec![y]);
                    weights.push(0.5 * h * w * profile(y * y));
                }
            }
        }
        2 => {
            // polar: ρ by composite Gauss-Legendre, θ by the midpoint rule
            let h = 1.0 / panels as f64;
            let n_theta = 4 * panels;
            for p in 0..panels {
                let lo = p as f64 * h;
                for (x, w) in gx.iter().zip(&gw) {
                    let rho = lo + 0.5 * h * (x + 1.0);
                    let radial = 0.5 * h * w * rho * profile(rho * rho);
                    for k in 0..n_theta {
                        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_theta as f64;
                        offsets.push(vec![rho * th.cos(), rho * th.sin()]);
                        weights.push(radial * 2.0 * std::f64::consts::PI / n_theta as f64);
                    }
                }
            }
        }
        _ => {
            return Err(Error::UnsupportedDimension {
                dim,
                reason: "mollifier quadrature implemented for d ≤ 2".into(),
            })
        }
    }
    Ok(BallRule { offsets, weights })
}

/// Unit-mass rule: weights scaled by the kernel constant.
fn ball_rule(dim: usize, panels: usize) -> Result<BallRule> {
    let c = kernel_constant(dim)?;
    let mut rule = raw_ball_rule(dim, panels)?;
    rule.weights.iter_mut().for_each(|w| *w *= c);
    Ok(rule)
}

/// Normalisation constant `c_d = 1 / ∫_{|y|≤1} (1 - |y|²)³ dy`.
pub fn kernel_constant(dim: usize) -> Result<f64> {
    let rule = raw_ball_rule(dim, 16)?;
    Ok(1.0 / rule.weights.iter().sum::<f64>())
}

/// Default panel counts per dimension (coarse rule; the check uses twice as many).
fn default_panels(dim: usize) -> usize {
    if dim == 1 {
        1024
    } else {
        48
    }
}

/// A drift split into a smooth part `B̄ = B * r_w` and remainder `B̂ = B - B̄`.
pub struct SmoothSplit<F> {
    field: F,
    dim: usize,
    width: f64,
    coarse: BallRule,
    fine: BallRule,
    /// Relative gap between coarse and fine rules that triggers [`Error::Mollifier`].
    pub quad_tol: f64,
}

pub fn smooth_split<F>(field: F, dim: usize, width: f64) -> Result<SmoothSplit<F>>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + Sync,
{
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "mollifier width must be positive, got {width}"
        )));
    }
    let p = default_panels(dim);
    Ok(SmoothSplit {
        field,
        dim,
        width,
        coarse: ball_rule(dim, p)?,
        fine: ball_rule(dim, 2 * p)?,
        quad_tol: 1e-6,
    })
}

impl<F> SmoothSplit<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + Sync,
{
    pub fn width(&self) -> f64 {
        self.width
    }

    fn convolve(&self, rule: &BallRule, t: f64, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let mut z = vec![0.0; self.dim];
        for (off, w) in rule.offsets.iter().zip(&rule.weights) {
            if *w == 0.0 {
                continue;
            }
            for i in 0..self.dim {
                z[i] = x[i] - self.width * off[i];
            }
            let v = (self.field)(t, &z);
            for i in 0..self.dim {
                acc[i] += w * v[i];
            }
        }
        acc
    }

    /// `B̄_t(x)`; fails if doubling the quadrature panels moves the value by
    /// more than `quad_tol · (1 + |B̄|)`.
    pub fn smooth(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let a = self.convolve(&self.coarse, t, x);
        let b = self.convolve(&self.fine, t, x);
        let gap = norm(&a.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
        if !(gap <= self.quad_tol * (1.0 + norm(&b))) {
            return Err(Error::Mollifier { gap });
        }
        Ok(b)
    }

    /// `B̂_t(x) = B_t(x) - B̄_t(x)`.
    pub fn remainder(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let s = self.smooth(t, x)?;
        let v = (self.field)(t, x);
        Ok(v.iter().zip(&s).map(|(a, b)| a - b).collect())
    }

    /// Measures `‖∇B̄‖`, `‖∇B̂‖`, `‖B̂‖` and the reconstruction error on the
    /// given points by central differences with step `eps`.
    pub fn norms(&self, t: f64, points: &[Vec<f64>], eps: f64) -> Result<SplitNorms> {
        use rayon::prelude::*;
        let d = self.dim;
        let rows: Vec<Result<[f64; 4]>> = points
            .par_iter()
            .map(|x| {
                let s = self.smooth(t, x)?;
                let v = (self.field)(t, x);
                let rem: Vec<f64> = v.iter().zip(&s).map(|(a, b)| a - b).collect();
                let recon = norm(
                    &v.iter()
                        .zip(&s)
                        .zip(&rem)
                        .map(|((a, b), c)| a - (b + c))
                        .collect::<Vec<_>>(),
                );
                let mut js = vec![0.0; d * d];
                let mut jr = vec![0.0; d * d];
                for k in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += eps;
                    xm[k] -= eps;
                    let (sp, sm) = (self.smooth(t, &xp)?, self.smooth(t, &xm)?);
                    let (vp, vm) = ((self.field)(t, &xp), (self.field)(t, &xm));
                    for i in 0..d {
                        let ds = (sp[i] - sm[i]) / (2.0 * eps);
                        let dv = (vp[i] - vm[i]) / (2.0 * eps);
                        js[i * d + k] = ds;
                        jr[i * d + k] = dv - ds;
                    }
                }
                Ok([
                    operator_norm(&js, d),
                    operator_norm(&jr, d),
                    norm(&rem),
                    recon,
                ])
            })
            .collect();
        let mut out = SplitNorms::default();
        for r in rows {
            let [a, b, c, e] = r?;
            out.grad_smooth = out.grad_smooth.max(a);
            out.grad_remainder = out.grad_remainder.max(b);
            out.remainder_sup = out.remainder_sup.max(c);
            out.reconstruction_error = out.reconstruction_error.max(e);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitNorms {
    pub grad_smooth: f64,
    /// Finite-difference value; large across a kink of `B` even when `B̂` is
    /// Lipschitz, so compare only away from kinks.
    pub grad_remainder: f64,
    pub remainder_sup: f64,
    pub reconstruction_error: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_constants_match_closed_forms() {
        // ∫_{-1}^{1} (1-y²)³ = 32/35; 2π ∫_0^1 (1-ρ²)³ ρ dρ = π/4
        assert!((kernel_constant(1).unwrap() - 35.0 / 32.0).abs() < 1e-13);
        assert!((kernel_constant(2).unwrap() - 4.0 / std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn linear_field_is_preserved() {
        let split = smooth_split(
            |_t, x: &[f64]| vec![2.0 * x[0] - x[1] + 0.5, 0.3 * x[0]],
            2,
            0.7,
        )
        .unwrap();
        let r = split.remainder(0.0, &[0.4, -1.3]).unwrap();
        assert!(norm(&r) < 1e-13, "{r:?}");
    }

    #[test]
    fn abs_split_at_origin() {
        let split = smooth_split(|_t, x: &[f64]| vec![x[0].abs()], 1, 1.0).unwrap();
        let bar = split.smooth(0.0, &[0.0]).unwrap()[0];
        // 2 · (35/32) ∫_0^1 y(1-y²)³ dy = (35/16)(1/8)
        assert!((bar - 35.0 / 128.0).abs() < 1e-12);
        let hat = split.remainder(0.0, &[0.0]).unwrap()[0];
        assert!((hat + bar).abs() < 1e-15);
    }

    #[test]
    fn unsupported_dimension() {
        assert!(matches!(
            smooth_split(|_t, x: &[f64]| x.to_vec(), 3, 1.0),
            Err(Error::UnsupportedDimension { dim: 3, .. })
        ));
    }
}
