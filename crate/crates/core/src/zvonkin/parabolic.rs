//! Picard iteration for `u_s = ∫_s^T e^{-λ(t-s)} P⁰_{s,t}{∇_{b_t}u_t + b_t} dt`.
//!
//! `P⁰` is realised by a θ-scheme finite-difference solver for the backward
//! equation `∂_s w + L̃_s w = 0` with `L̃ = ½ tr(σσ*∇²) + ∇_B` (Douglas ADI with
//! an explicit cross term in two dimensions, Neumann boundaries). The time
//! integral uses linear interpolation of the integrand with the exponential
//! weight integrated exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{stride, GridFunction, SpaceGrid};
use crate::error::{Error, Result};
use crate::model::DiniModelSpec;
use crate::numerics::solve_tridiagonal;
use crate::simulate::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParabolicConfig {
    pub radius: f64,
    pub points: usize,
    pub time_steps: usize,
    /// 0.5 is Crank-Nicolson, 1 is backward Euler.
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ParabolicConfig {
    fn default() -> Self {
        Self {
            radius: 6.0,
            points: 601,
            time_steps: 200,
            theta: 0.5,
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

/// Per-node finite-difference stencils of `L̃` along each axis plus the
/// mixed-derivative weight.
pub(crate) struct DiffOp {
    dim: usize,
    m: usize,
    axis: [Vec<[f64; 3]>; 2],
    cross: Vec<f64>,
}

impl DiffOp {
    /// Stencils for `½ Σ a_ij ∂_i∂_j + Σ B_i ∂_i`, where `a(x)` is row-major
    /// `σσ*` and `drift(x)` is `B`.
    pub(crate) fn new(
        space: &SpaceGrid,
        coeff: impl Fn(&[f64]) -> (Vec<f64>, Vec<f64>) + Sync,
    ) -> Self {
        let (d, m, dx) = (space.dim, space.points, space.spacing());
        let dx2 = dx * dx;
        let per_node: Vec<([[f64; 3]; 2], f64)> = (0..space.n_nodes())
            .into_par_iter()
            .map(|node| {
                let x = space.node(node);
                let ix = space.multi_index(node);
                let (a, b) = coeff(&x);
                let mut st = [[0.0; 3]; 2];
                for ax in 0..d {
                    let aa = 0.5 * a[ax * d + ax];
                    let bb = b[ax];
                    st[ax] = if ix[ax] == 0 {
                        [0.0, -2.0 * aa / dx2, 2.0 * aa / dx2]
                    } else if ix[ax] == m - 1 {
                        [2.0 * aa / dx2, -2.0 * aa / dx2, 0.0]
                    } else {
                        [
                            aa / dx2 - bb / (2.0 * dx),
                            -2.0 * aa / dx2,
                            aa / dx2 + bb / (2.0 * dx),
                        ]
                    };
                }
                let interior = ix[..d].iter().all(|&i| i > 0 && i < m - 1);
                let cross = if d == 2 && interior {
                    0.5 * (a[1] + a[2]) / (4.0 * dx2)
                } else {
                    0.0
                };
                (st, cross)
            })
            .collect();
        let mut axis = [Vec::with_capacity(per_node.len()), Vec::new()];
        if d == 2 {
            axis[1].reserve(per_node.len());
        }
        let mut cross = Vec::with_capacity(per_node.len());
        for (st, c) in per_node {
            axis[0].push(st[0]);
            if d == 2 {
                axis[1].push(st[1]);
            }
            cross.push(c);
        }
        Self {
            dim: d,
            m,
            axis,
            cross,
        }
    }

    fn apply_axis(&self, ax: usize, w: &[f64], out: &mut [f64]) {
        let s = stride(self.m, ax);
        for (node, st) in self.axis[ax].iter().enumerate() {
            let mut v = st[1] * w[node];
            if st[0] != 0.0 {
                v += st[0] * w[node - s];
            }
            if st[2] != 0.0 {
                v += st[2] * w[node + s];
            }
            out[node] = v;
        }
    }

    fn apply_cross(&self, w: &[f64], out: &mut [f64]) {
        let m = self.m;
        for (node, c) in self.cross.iter().enumerate() {
            out[node] = if *c == 0.0 {
                0.0
            } else {
                2.0 * c * (w[node + 1 + m] - w[node + 1 - m] - w[node - 1 + m] + w[node - 1 - m])
            };
        }
    }

    /// Solves `(I - k L_ax) y = rhs` line by line in place.
    fn solve_axis(&self, ax: usize, k: f64, rhs: &mut [f64]) -> Result<()> {
        let m = self.m;
        let lines = if self.dim == 1 { 1 } else { m };
        let s = stride(m, ax);
        let start = |line: usize| if ax == 0 { line * m } else { line };
        let solved: Vec<Option<Vec<f64>>> = (0..lines)
            .into_par_iter()
            .map(|line| {
                let base = start(line);
                let mut lower = vec![0.0; m];
                let mut diag = vec![0.0; m];
                let mut upper = vec![0.0; m];
                let mut r = vec![0.0; m];
                for i in 0..m {
                    let node = base + i * s;
                    let st = self.axis[ax][node];
                    lower[i] = -k * st[0];
                    diag[i] = 1.0 - k * st[1];
                    upper[i] = -k * st[2];
                    r[i] = rhs[node];
                }
                solve_tridiagonal(&lower, &diag, &upper, &mut r).map(|_| r)
            })
            .collect();
        for (line, sol) in solved.into_iter().enumerate() {
            let sol = sol.ok_or_else(|| Error::InvalidInput("singular implicit step".into()))?;
            let base = start(line);
            for (i, v) in sol.into_iter().enumerate() {
                rhs[base + i * s] = v;
            }
        }
        Ok(())
    }

    /// One backward step `w ↦ P⁰_{t, t+dt} w` (Douglas θ-scheme).
    pub(crate) fn step(&self, w: &[f64], dt: f64, theta: f64) -> Result<Vec<f64>> {
        let n = w.len();
        let mut lw = vec![vec![0.0; n]; self.dim];
        for ax in 0..self.dim {
            self.apply_axis(ax, w, &mut lw[ax]);
        }
        let mut y: Vec<f64> = (0..n)
            .map(|i| w[i] + dt * lw.iter().map(|l| l[i]).sum::<f64>())
            .collect();
        if self.dim == 2 {
            let mut c = vec![0.0; n];
            self.apply_cross(w, &mut c);
            y.iter_mut().zip(&c).for_each(|(a, b)| *a += dt * b);
        }
        for ax in 0..self.dim {
            for i in 0..n {
                y[i] -= theta * dt * lw[ax][i];
            }
            self.solve_axis(ax, theta * dt, &mut y)?;
        }
        Ok(y)
    }
}

/// `(α₀, α₁)` with `∫_0^Δ e^{-λτ} g(τ) dτ ≈ α₀ g(0) + α₁ g(Δ)` for linear `g`.
pub fn exponential_trapezoid_weights(lambda: f64, dt: f64) -> (f64, f64) {
    let x = lambda * dt;
    let total = if x == 0.0 {
        dt
    } else {
        -(-x).exp_m1() / lambda
    };
    let a1 = if x < 1e-3 {
        dt * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0)
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (lambda * x)
    };
    (total - a1, a1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖u_{k+1} - u_k‖_∞`.
    pub sup_change: f64,
    /// `‖u_{k+1} - u_k‖_∞ + ‖∇(u_{k+1} - u_k)‖_∞`.
    pub h_change: f64,
    pub ratio: Option<f64>,
    pub grad_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicSolution {
    pub u: GridFunction,
    pub lambda: f64,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    /// `‖Γ(u*) - u*‖_∞` at the returned iterate.
    pub residual: f64,
    pub u_sup: f64,
    pub grad_sup: f64,
    /// `‖b‖_{T,∞} (‖∇u‖ + 1) / λ`.
    pub resolvent_bound: f64,
}

struct Context<'a> {
    model: &'a DiniModelSpec,
    space: SpaceGrid,
    times: TimeGrid,
    lambda: f64,
    theta: f64,
    ops: Vec<DiffOp>,
    /// `b` at nodes, one entry per slice (or one if autonomous).
    drift: Vec<Vec<f64>>,
}

impl<'a> Context<'a> {
    fn new(model: &'a DiniModelSpec, lambda: f64, cfg: &ParabolicConfig) -> Result<Self> {
        let space = SpaceGrid::new(model.dim, cfg.radius, cfg.points)?;
        let times = TimeGrid::new(model.horizon, cfg.time_steps);
        let d = model.dim;
        let op_at = |t: f64| {
            DiffOp::new(&space, |x| {
                let s = model.sigma.eval_vec(t, x);
                let mut a = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        a[i * d + j] = (0..d).map(|k| s[i * d + k] * s[j * d + k]).sum();
                    }
                }
                (a, model.regular_drift.eval_vec(t, x))
            })
        };
        let ops = if model.regular_drift.is_time_dependent() {
            (0..times.n_steps)
                .map(|k| op_at(0.5 * (times.t(k) + times.t(k + 1))))
                .collect()
        } else {
            vec![op_at(0.0)]
        };
        let drift_at = |t: f64| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(space.n_nodes() * d);
            for node in 0..space.n_nodes() {
                let x = space.node(node);
                let v = model.dini_drift.eval_vec(t, &x);
                if v.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidCoefficient {
                        name: "dini_drift".into(),
                        point: x,
                    });
                }
                out.extend(v);
            }
            Ok(out)
        };
        let drift = if model.dini_drift.is_time_dependent() {
            (0..=times.n_steps)
                .map(|k| drift_at(times.t(k)))
                .collect::<Result<_>>()?
        } else {
            vec![drift_at(0.0)?]
        };
        Ok(Self {
            model,
            space,
            times,
            lambda,
            theta: cfg.theta,
            ops,
            drift,
        })
    }

    fn op(&self, k: usize) -> &DiffOp {
        &self.ops[k.min(self.ops.len() - 1)]
    }

    fn source(&self, u: &GridFunction, k: usize) -> Vec<f64> {
        let d = self.model.dim;
        let b = &self.drift[k.min(self.drift.len() - 1)];
        let mut g = b.clone();
        for node in 0..self.space.n_nodes() {
            let jac = u.nodal_jacobian(k, node);
            for c in 0..d {
                g[node * d + c] += (0..d)
                    .map(|a| jac[c * d + a] * b[node * d + a])
                    .sum::<f64>();
            }
        }
        g
    }

    /// The discretised Picard map `Γ`.
    fn gamma(&self, u: &GridFunction) -> Result<GridFunction> {
        let (d, nodes, n) = (self.model.dim, self.space.n_nodes(), self.times.n_steps);
        let dt = self.times.step();
        let decay = (-self.lambda * dt).exp();
        let (a0, a1) = exponential_trapezoid_weights(self.lambda, dt);
        let slice_len = nodes * d;
        let mut out = vec![0.0; (n + 1) * slice_len];
        let mut g_next = self.source(u, n);
        let mut f = vec![0.0; nodes];
        for k in (0..n).rev() {
            let g_k = self.source(u, k);
            let (head, tail) = out.split_at_mut((k + 1) * slice_len);
            let next = &tail[..slice_len];
            let cur = &mut head[k * slice_len..];
            for c in 0..d {
                for node in 0..nodes {
                    f[node] = decay * next[node * d + c] + a1 * g_next[node * d + c];
                }
                let w = self.op(k).step(&f, dt, self.theta)?;
                for node in 0..nodes {
                    cur[node * d + c] = w[node] + a0 * g_k[node * d + c];
                }
            }
            g_next = g_k;
        }
        GridFunction::from_values(self.space, Some(self.times), out)
    }
}

fn h_distance(a: &GridFunction, b: &GridFunction) -> Result<(f64, f64)> {
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let g = GridFunction::from_values(a.space, a.times, diff)?;
    let sup = g.sup_norm();
    Ok((sup, sup + g.nodal_grad_sup()))
}

/// Solves for `u` by Picard iteration at fixed `λ`.
///
/// Fails with [`Error::NotContractive`] once three consecutive contraction
/// ratios (in `‖·‖_∞ + ‖∇·‖_∞`) are `≥ 1`.
pub fn solve_u_parabolic(
    model: &DiniModelSpec,
    lambda: f64,
    cfg: &ParabolicConfig,
) -> Result<ParabolicSolution> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let ctx = Context::new(model, lambda, cfg)?;
    let mut u = GridFunction::zeros(ctx.space, Some(ctx.times));
    let mut history = Vec::new();
    let mut prev_h: Option<f64> = None;
    let mut bad = 0;
    let mut converged = false;
    for iteration in 1..=cfg.max_iter {
        let next = ctx.gamma(&u)?;
        let (sup_change, h_change) = h_distance(&next, &u)?;
        let ratio = prev_h.filter(|p| *p > 0.0).map(|p| h_change / p);
        history.push(IterationRecord {
            iteration,
            sup_change,
            h_change,
            ratio,
            grad_bound: next.grad_bound(),
        });
        u = next;
        if sup_change < cfg.tol {
            converged = true;
            break;
        }
        if ratio.is_some_and(|r| r >= 1.0) {
            bad += 1;
            if bad >= 3 {
                return Err(Error::NotContractive {
                    lambda,
                    ratios: history.iter().filter_map(|r| r.ratio).collect(),
                });
            }
        } else {
            bad = 0;
        }
        prev_h = Some(h_change);
    }
    let residual = ctx.gamma(&u)?.sup_distance(&u)?;
    let grad_sup = u.grad_bound();
    let u_sup = u.sup_norm();
    Ok(ParabolicSolution {
        lambda,
        history,
        converged,
        residual,
        u_sup,
        grad_sup,
        resolvent_bound: model.bounds.dini_sup * (grad_sup + 1.0) / lambda,
        u,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaStrategy {
    pub initial: f64,
    pub max_doublings: usize,
    pub grad_threshold: f64,
}

impl Default for LambdaStrategy {
    fn default() -> Self {
        Self {
            initial: 1.0,
            max_doublings: 16,
            grad_threshold: super::DINI_GRAD_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaAttempt {
    pub lambda: f64,
    pub outcome: String,
    pub iterations: usize,
    pub grad_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoLambda {
    pub solution: ParabolicSolution,
    pub trace: Vec<LambdaAttempt>,
}

/// Doubles `λ` from `strategy.initial` until the iteration contracts,
/// converges and `grad_bound < strategy.grad_threshold`.
pub fn solve_u_parabolic_auto(
    model: &DiniModelSpec,
    strategy: &LambdaStrategy,
    cfg: &ParabolicConfig,
) -> std::result::Result<AutoLambda, (Error, Vec<LambdaAttempt>)> {
    let mut trace = Vec::new();
    let mut last_err = Error::InvalidInput("no lambda attempted".into());
    for k in 0..=strategy.max_doublings {
        let lambda = strategy.initial * 2f64.powi(k as i32);
        match solve_u_parabolic(model, lambda, cfg) {
            Ok(sol) => {
                let ok = sol.converged && sol.grad_sup < strategy.grad_threshold;
                trace.push(LambdaAttempt {
                    lambda,
                    outcome: if ok {
                        "accepted".into()
                    } else if !sol.converged {
                        "not converged".into()
                    } else {
                        "gradient too large".into()
                    },
                    iterations: sol.history.len(),
                    grad_bound: Some(sol.grad_sup),
                });
                if ok {
                    return Ok(AutoLambda {
                        solution: sol,
                        trace,
                    });
                }
                last_err = Error::GradientTooLarge {
                    grad_bound: sol.grad_sup,
                    threshold: strategy.grad_threshold,
                };
            }
            Err(e @ Error::NotContractive { .. }) => {
                trace.push(LambdaAttempt {
                    lambda,
                    outcome: "not contractive".into(),
                    iterations: 0,
                    grad_bound: None,
                });
                last_err = e;
            }
            Err(e) => return Err((e, trace)),
        }
    }
    Err((last_err, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub u_sup: f64,
    pub grad_sup: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn parabolic_lambda_sweep(
    model: &DiniModelSpec,
    lambdas: &[f64],
    cfg: &ParabolicConfig,
) -> Result<Vec<SweepRow>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let s = solve_u_parabolic(model, lambda, cfg)?;
            Ok(SweepRow {
                lambda,
                u_sup: s.u_sup,
                grad_sup: s.grad_sup,
                iterations: s.history.len(),
                converged: s.converged,
            })
        })
        .collect()
}

/// `max |u_R - u_{2R}|` over nodes with `|x|_∞ ≤ R/2`, solving on the box
/// `[-R, R]^d` and on `[-2R, 2R]^d` at equal spacing.
pub fn boundary_effect(model: &DiniModelSpec, lambda: f64, cfg: &ParabolicConfig) -> Result<f64> {
    let small = solve_u_parabolic(model, lambda, cfg)?;
    let big_cfg = ParabolicConfig {
        radius: 2.0 * cfg.radius,
        points: 2 * cfg.points - 1,
        ..*cfg
    };
    let big = solve_u_parabolic(model, lambda, &big_cfg)?;
    let sp = small.u.space;
    let mut worst: f64 = 0.0;
    for s in 0..small.u.n_slices() {
        let t = small.u.times.map_or(0.0, |tg| tg.t(s));
        for node in 0..sp.n_nodes() {
            let x = sp.node(node);
            if x.iter().all(|v| v.abs() <= 0.5 * cfg.radius) {
                let a = small.u.node_value(s, node);
                let b = big.u.eval_vec(t, &x)?;
                worst = worst.max(
                    a.iter()
                        .zip(&b)
                        .map(|(p, q)| (p - q).abs())
                        .fold(0.0, f64::max),
                );
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_linear_functions_exactly() {
        for &(lambda, dt) in &[(1e-6, 0.1), (3.0, 0.01), (50.0, 0.2)] {
            let (a0, a1) = exponential_trapezoid_weights(lambda, dt);
            // ∫_0^Δ e^{-λτ} dτ and ∫_0^Δ e^{-λτ} τ/Δ dτ by fine midpoint sums
            let n = 200_000;
            let h = dt / n as f64;
            let (mut i0, mut i1) = (0.0, 0.0);
            for k in 0..n {
                let tau = (k as f64 + 0.5) * h;
                let w = (-lambda * tau).exp() * h;
                i0 += w * (1.0 - tau / dt);
                i1 += w * tau / dt;
            }
            assert!(
                (a0 - i0).abs() < 1e-9 * dt.max(1.0),
                "{lambda} {dt}: {a0} vs {i0}"
            );
            assert!(
                (a1 - i1).abs() < 1e-9 * dt.max(1.0),
                "{lambda} {dt}: {a1} vs {i1}"
            );
        }
    }

    #[test]
    fn heat_step_preserves_constants_and_mass_of_gaussian() {
        let sp = SpaceGrid::new(1, 8.0, 801).unwrap();
        let op = DiffOp::new(&sp, |_x| (vec![1.0], vec![0.0]));
        let ones = vec![1.0; sp.n_nodes()];
        let w = op.step(&ones, 0.01, 0.5).unwrap();
        assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-13));
        // P_t x² = x² + t for Brownian motion, away from the boundary
        let sq: Vec<f64> = (0..sp.n_nodes()).map(|i| sp.coord(i).powi(2)).collect();
        let mut w = sq.clone();
        for _ in 0..10 {
            w = op.step(&w, 0.01, 0.5).unwrap();
        }
        let mid = 400;
        assert!((w[mid] - 0.1).abs() < 1e-10, "{}", w[mid]);
    }

    #[test]
    fn zero_drift_gives_zero_after_one_iteration() {
        let mut m = DiniModelSpec::ornstein_uhlenbeck(1, 1.0);
        m.dini_drift = crate::model::VectorFieldSpec::Zero;
        let cfg = ParabolicConfig {
            points: 101,
            time_steps: 20,
            ..Default::default()
        };
        let s = solve_u_parabolic(&m, 1.0, &cfg).unwrap();
        assert_eq!(s.history.len(), 1);
        assert!(s.converged);
        assert_eq!(s.u_sup, 0.0);
        assert_eq!(s.grad_sup, 0.0);
    }
}
