//! Iteration `u_{k+1} = (λ - ℒ₂^σ)^{-1}(b₁ + ∇_{b₁}u_k)` for the resolvent
//! equation `(∇_{b₁} + ℒ₂^σ - λ)u = -b₁`, on a box with zero far-field data.
//!
//! The operator is factorised once (banded LU); `b₁` enters through cell
//! averages so integrable singularities at nodes are handled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{GridFunction, SpaceGrid};
use super::parabolic::IterationRecord;
use crate::error::{Error, Result};
use crate::model::SingularModelSpec;
use crate::numerics::{gauss_legendre, log_log_slope, BandedLu};

const MAX_FACTOR_BYTES: f64 = 2e9;

/// Grid and iteration settings. The defaults suit `d = 1`; in `d = 2` the
/// banded factor grows like `points³`, see [`EllipticConfig::planar`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipticConfig {
    pub radius: f64,
    pub points: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Gauss-Legendre nodes per axis for the cell averages of `b₁`.
    pub quad_nodes: usize,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self {
            radius: 8.0,
            points: 1601,
            tol: 1e-10,
            max_iter: 200,
            quad_nodes: 4,
        }
    }
}

impl EllipticConfig {
    /// Settings sized for `d = 2`.
    pub fn planar() -> Self {
        Self {
            radius: 6.0,
            points: 121,
            ..Self::default()
        }
    }

    pub fn for_dim(dim: usize) -> Self {
        if dim == 1 {
            Self::default()
        } else {
            Self::planar()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticSolution {
    pub u: GridFunction,
    pub lambda: f64,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub u_sup: f64,
    pub grad_sup: f64,
}

fn cell_averages(model: &SingularModelSpec, space: &SpaceGrid, q: usize) -> Result<Vec<f64>> {
    let d = space.dim;
    let dx = space.spacing();
    let (gx, gw) = gauss_legendre(q.max(1));
    let rows: Vec<Result<Vec<f64>>> = (0..space.n_nodes())
        .into_par_iter()
        .map(|node| {
            let x = space.node(node);
            let mut acc = vec![0.0; d];
            let mut y = x.clone();
            let mut v = vec![0.0; d];
            let combos = q.pow(d as u32);
            for c in 0..combos {
                let mut w = 1.0;
                let mut rem = c;
                for a in 0..d {
                    let k = rem % q;
                    rem /= q;
                    y[a] = x[a] + 0.5 * dx * gx[k];
                    w *= 0.5 * gw[k];
                }
                model.singular_drift.eval(0.0, &y, &mut v);
                if v.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidCoefficient {
                        name: "singular_drift".into(),
                        point: y.clone(),
                    });
                }
                for a in 0..d {
                    acc[a] += w * v[a];
                }
            }
            Ok(acc)
        })
        .collect();
    let mut out = Vec::with_capacity(space.n_nodes() * d);
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Assembles and factors `λ - ℒ₂^σ` with identity rows on the boundary.
fn assemble(model: &SingularModelSpec, space: &SpaceGrid, lambda: f64) -> Result<BandedLu> {
    let (d, m, dx) = (space.dim, space.points, space.spacing());
    let dx2 = dx * dx;
    let n = space.n_nodes();
    let bw = if d == 1 { 1 } else { m + 1 };
    let bytes = n as f64 * (3 * bw + 1) as f64 * 8.0;
    if bytes > MAX_FACTOR_BYTES {
        return Err(Error::InvalidInput(format!(
            "banded factor would need {:.1} GB; reduce points per axis ({m})",
            bytes / 1e9
        )));
    }
    let mut lu = BandedLu::new(n, bw);
    for node in 0..n {
        let ix = space.multi_index(node);
        if ix[..d].iter().any(|&i| i == 0 || i == m - 1) {
            lu.add(node, node, 1.0);
            continue;
        }
        let x = space.node(node);
        let s = model.sigma.eval_vec(0.0, &x);
        let a = |i: usize, j: usize| (0..d).map(|k| s[i * d + k] * s[j * d + k]).sum::<f64>();
        lu.add(node, node, lambda);
        for ax in 0..d {
            let st = if ax == 0 { 1 } else { m };
            let c = 0.5 * a(ax, ax) / dx2;
            lu.add(node, node, 2.0 * c);
            lu.add(node, node - st, -c);
            lu.add(node, node + st, -c);
        }
        if d == 2 {
            // -½ · 2 a₁₂ ∂₁∂₂
            let c = a(0, 1) / (4.0 * dx2);
            lu.add(node, node + 1 + m, -c);
            lu.add(node, node - 1 - m, -c);
            lu.add(node, node + 1 - m, c);
            lu.add(node, node - 1 + m, c);
        }
    }
    lu.factor().map_err(Error::EllipticSolver)?;
    Ok(lu)
}

pub fn solve_u_elliptic(
    model: &SingularModelSpec,
    lambda: f64,
    cfg: &EllipticConfig,
) -> Result<EllipticSolution> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let space = SpaceGrid::new(model.dim, cfg.radius, cfg.points)?;
    let (d, m, n) = (space.dim, space.points, space.n_nodes());
    let b1 = cell_averages(model, &space, cfg.quad_nodes)?;
    let lu = assemble(model, &space, lambda)?;
    let boundary: Vec<bool> = (0..n)
        .map(|node| {
            space.multi_index(node)[..d]
                .iter()
                .any(|&i| i == 0 || i == m - 1)
        })
        .collect();

    let mut u = GridFunction::zeros(space, None);
    let mut history = Vec::new();
    let mut prev_h: Option<f64> = None;
    let mut converged = false;
    for iteration in 1..=cfg.max_iter {
        let mut values = vec![0.0; n * d];
        for c in 0..d {
            let mut rhs = vec![0.0; n];
            for node in 0..n {
                if boundary[node] {
                    continue;
                }
                let jac = u.nodal_jacobian(0, node);
                let grad_b: f64 = (0..d).map(|a| jac[c * d + a] * b1[node * d + a]).sum();
                rhs[node] = b1[node * d + c] + grad_b;
            }
            lu.solve(&mut rhs);
            for node in 0..n {
                values[node * d + c] = rhs[node];
            }
        }
        let next = GridFunction::from_values(space, None, values)
            .map_err(|e| Error::EllipticSolver(format!("non-finite iterate: {e}")))?;
        let diff: Vec<f64> = next
            .values
            .iter()
            .zip(&u.values)
            .map(|(a, b)| a - b)
            .collect();
        let dg = GridFunction::from_values(space, None, diff)?;
        let sup_change = dg.sup_norm();
        let h_change = sup_change + dg.nodal_grad_sup();
        let ratio = prev_h.filter(|p| *p > 0.0).map(|p| h_change / p);
        history.push(IterationRecord {
            iteration,
            sup_change,
            h_change,
            ratio,
            grad_bound: next.grad_bound(),
        });
        u = next;
        prev_h = Some(h_change);
        if sup_change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(EllipticSolution {
        lambda,
        history,
        converged,
        u_sup: u.sup_norm(),
        grad_sup: u.grad_bound(),
        u,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticSweepRow {
    pub lambda: f64,
    pub u_sup: f64,
    pub grad_sup: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticSweep {
    pub rows: Vec<EllipticSweepRow>,
    /// Log-log slope of `‖u‖_∞` against `λ`.
    pub slope_u: f64,
    /// Log-log slope of `‖u‖_∞ + ‖∇u‖_∞` against `λ`.
    pub slope_total: f64,
    /// `(d/p - 1)/2`.
    pub predicted: f64,
    /// `‖u‖_∞ + ‖∇u‖_∞` strictly decreasing along the sweep.
    pub decays: bool,
}

pub fn elliptic_lambda_sweep(
    model: &SingularModelSpec,
    lambdas: &[f64],
    cfg: &EllipticConfig,
) -> Result<EllipticSweep> {
    let rows: Vec<EllipticSweepRow> = lambdas
        .iter()
        .map(|&lambda| {
            let s = solve_u_elliptic(model, lambda, cfg)?;
            Ok(EllipticSweepRow {
                lambda,
                u_sup: s.u_sup,
                grad_sup: s.grad_sup,
                converged: s.converged,
            })
        })
        .collect::<Result<_>>()?;
    let l: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let u: Vec<f64> = rows.iter().map(|r| r.u_sup).collect();
    let tot: Vec<f64> = rows.iter().map(|r| r.u_sup + r.grad_sup).collect();
    let positive = u.iter().all(|v| *v > 0.0) && rows.len() >= 2;
    let (slope_u, slope_total) = if positive {
        (log_log_slope(&l, &u), log_log_slope(&l, &tot))
    } else {
        (0.0, 0.0)
    };
    Ok(EllipticSweep {
        decays: tot.windows(2).all(|w| w[1] < w[0]),
        rows,
        slope_u,
        slope_total,
        predicted: 0.5 * (model.dim as f64 / model.p - 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VectorFieldSpec;

    #[test]
    fn zero_singular_drift_gives_zero() {
        let m = SingularModelSpec::ornstein_uhlenbeck(1, 1.0, 1.0);
        let s = solve_u_elliptic(
            &m,
            4.0,
            &EllipticConfig {
                points: 201,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.converged);
        assert_eq!(s.u_sup, 0.0);
    }

    #[test]
    fn two_dimensional_solve_is_symmetric() {
        let mut m = SingularModelSpec::ornstein_uhlenbeck(2, 1.0, 1.0);
        m.singular_drift = VectorFieldSpec::Indicator {
            value: vec![1.0, 1.0],
            radius: 1.0,
        };
        let cfg = EllipticConfig {
            radius: 4.0,
            points: 41,
            max_iter: 1,
            ..Default::default()
        };
        let s = solve_u_elliptic(&m, 4.0, &cfg).unwrap();
        let a = s.u.eval_vec(0.0, &[0.5, -0.3]).unwrap();
        let b = s.u.eval_vec(0.0, &[-0.3, 0.5]).unwrap();
        assert!((a[0] - b[1]).abs() < 1e-12 && (a[1] - b[0]).abs() < 1e-12);
        assert!(a[0] > 0.0);
    }
}
