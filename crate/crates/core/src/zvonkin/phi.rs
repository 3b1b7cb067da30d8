//! `Φ_t = id + u_t` with a certified gradient bound and its inverse.

use serde::{Deserialize, Serialize};

use super::grid::GridFunction;
use crate::error::{Error, Result};
use crate::numerics::norm;

/// An accepted transform: `grad_bound < threshold < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Homeomorphism {
    pub u: GridFunction,
    /// Lipschitz constant of the interpolated `u`.
    pub grad_bound: f64,
    pub lambda: f64,
    pub threshold: f64,
}

/// Result of a fixed-point inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub x: Vec<f64>,
    /// `|x_{k+1} - x_k|` per iteration.
    pub steps: Vec<f64>,
}

pub const INVERT_TOL: f64 = 1e-12;
const INVERT_MAX_ITER: usize = 500;

/// Accepts `u` iff its gradient bound is below `threshold`.
pub fn build_phi(u: GridFunction, lambda: f64, threshold: f64) -> Result<Homeomorphism> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "gradient threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let grad_bound = u.grad_bound();
    if !(grad_bound < threshold) {
        return Err(Error::GradientTooLarge {
            grad_bound,
            threshold,
        });
    }
    Ok(Homeomorphism {
        u,
        grad_bound,
        lambda,
        threshold,
    })
}

impl Homeomorphism {
    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn radius(&self) -> f64 {
        self.u.space.radius
    }

    pub fn phi(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.u.eval_vec(t, x)?;
        v.iter_mut().zip(x).for_each(|(a, b)| *a += b);
        Ok(v)
    }

    /// `∇Φ_t(x) = I + ∇u_t(x)`, row-major.
    pub fn jacobian(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut j = vec![0.0; d * d];
        self.u.jacobian(t, x, &mut j)?;
        for i in 0..d {
            j[i * d + i] += 1.0;
        }
        Ok(j)
    }

    /// Solves `x + u_t(x) = y` by `x_{k+1} = y - u_t(x_k)` from `x_0 = y`,
    /// stopping once a step is at most `tol`.
    pub fn invert_with_history(&self, t: f64, y: &[f64], tol: f64) -> Result<Inversion> {
        let d = self.dim();
        let mut x = y.to_vec();
        let mut u = vec![0.0; d];
        let mut steps = Vec::new();
        for _ in 0..INVERT_MAX_ITER {
            self.u.eval(t, &x, &mut u)?;
            let next: Vec<f64> = y.iter().zip(&u).map(|(a, b)| a - b).collect();
            let step = norm(&next.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
            steps.push(step);
            x = next;
            if step <= tol {
                if !self.u.space.contains(&x) {
                    return Err(Error::OutOfDomain {
                        point: x,
                        radius: self.radius(),
                    });
                }
                return Ok(Inversion { x, steps });
            }
        }
        let ratios = steps
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        Err(Error::NotContractive {
            lambda: self.lambda,
            ratios,
        })
    }

    pub fn invert(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.invert_with_history(t, y, INVERT_TOL).map(|r| r.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zvonkin::grid::SpaceGrid;

    fn sine(amp: f64, points: usize) -> GridFunction {
        let sp = SpaceGrid::new(1, 4.0, points).unwrap();
        GridFunction::from_fn(sp, None, |_t, x| vec![amp * x[0].sin()]).unwrap()
    }

    #[test]
    fn zero_map_is_identity() {
        let sp = SpaceGrid::new(2, 3.0, 31).unwrap();
        let phi = build_phi(GridFunction::zeros(sp, None), 1.0, 0.5).unwrap();
        assert_eq!(phi.grad_bound, 0.0);
        assert_eq!(phi.phi(0.0, &[0.3, -1.2]).unwrap(), vec![0.3, -1.2]);
        assert_eq!(phi.invert(0.0, &[0.3, -1.2]).unwrap(), vec![0.3, -1.2]);
    }

    #[test]
    fn steep_map_rejected() {
        let sp = SpaceGrid::new(1, 3.0, 61).unwrap();
        let u = GridFunction::from_fn(sp, None, |_t, x| vec![0.9 * x[0]]).unwrap();
        match build_phi(u, 1.0, 0.5) {
            Err(Error::GradientTooLarge { grad_bound, .. }) => {
                assert!((grad_bound - 0.9).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn leaving_the_box_is_reported() {
        let phi = build_phi(sine(0.4, 801), 1.0, 0.5).unwrap();
        assert!(matches!(
            phi.invert(0.0, &[9.0]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn inversion_contracts_at_rate_below_bound() {
        let phi = build_phi(sine(0.4, 8001), 1.0, 0.5).unwrap();
        assert!(phi.grad_bound <= 0.4 + 1e-12);
        let inv = phi.invert_with_history(0.0, &[1.0], 1e-13).unwrap();
        for w in inv.steps.windows(2).filter(|w| w[0] > 1e-10) {
            assert!(w[1] / w[0] <= phi.grad_bound + 1e-6, "{:?}", inv.steps);
        }
        let back = phi.phi(0.0, &inv.x).unwrap()[0];
        assert!((back - 1.0).abs() < 1e-12);
    }
}
