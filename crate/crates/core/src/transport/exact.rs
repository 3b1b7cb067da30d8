//! Exact discrete optimal transport by successive shortest paths with
//! Johnson potentials on the dense bipartite graph.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::measure::EmpiricalMeasure;
use crate::error::{Error, Result};

/// Largest atom count handled by the exact solver.
pub const EXACT_ATOM_LIMIT: usize = 512;
/// Relative duality gap accepted as an optimality certificate.
pub const CERTIFICATE_TOL: f64 = 1e-7;

const MASS_EPS: f64 = 1e-15;

/// A feasible coupling, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// `(i, j, mass)` with positive mass, row-major order.
    pub entries: Vec<(usize, usize, f64)>,
    /// `max_i |Σ_j π_ij - μ_i|`.
    pub row_residual: f64,
    /// `max_j |Σ_i π_ij - ν_j|`.
    pub col_residual: f64,
}

impl TransportPlan {
    fn from_dense(flow: &[f64], rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Self {
        let mut entries = Vec::new();
        let mut col_sum = vec![0.0; cols];
        let mut row_residual: f64 = 0.0;
        for i in 0..rows {
            let mut s = 0.0;
            for j in 0..cols {
                let f = flow[i * cols + j];
                if f > 0.0 {
                    entries.push((i, j, f));
                    s += f;
                    col_sum[j] += f;
                }
            }
            row_residual = row_residual.max((s - a[i]).abs());
        }
        let col_residual = col_sum
            .iter()
            .zip(b)
            .map(|(s, w)| (s - w).abs())
            .fold(0.0, f64::max);
        Self {
            rows,
            cols,
            entries,
            row_residual,
            col_residual,
        }
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.entries
            .iter()
            .find(|e| e.0 == i && e.1 == j)
            .map_or(0.0, |e| e.2)
    }

    /// Sparse triplets `i,j,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "mass"])?;
        for (i, j, m) in &self.entries {
            w.write_record([i.to_string(), j.to_string(), format!("{m:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactOt {
    /// `(Σ π ρ^p)^{1/p}`.
    pub value: f64,
    /// `Σ π ρ^p`.
    pub cost: f64,
    pub plan: TransportPlan,
    /// Primal cost minus the c-transformed dual objective.
    pub certificate_gap: f64,
}

/// `ρ(x_i, y_j)^p` for all pairs, rows in parallel.
pub fn cost_matrix<A: Sync, B: Sync>(
    mu: &[A],
    nu: &[B],
    p: f64,
    metric: impl Fn(&A, &B) -> Result<f64> + Sync,
) -> Result<Vec<f64>> {
    let rows: Vec<Result<Vec<f64>>> = mu
        .par_iter()
        .map(|x| {
            nu.iter()
                .map(|y| {
                    let r = metric(x, y)?;
                    if !(r.is_finite() && r >= 0.0) {
                        return Err(Error::InvalidInput(format!("metric returned {r}")));
                    }
                    Ok(if p == 1.0 { r } else { r.powf(p) })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(mu.len() * nu.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// `W_p` between two discrete measures under `metric`.
pub fn exact_wp<A: Sync, B: Sync>(
    mu: &EmpiricalMeasure<A>,
    nu: &EmpiricalMeasure<B>,
    p: f64,
    metric: impl Fn(&A, &B) -> Result<f64> + Sync,
) -> Result<ExactOt> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "p must be at least 1, got {p}"
        )));
    }
    let atoms = mu.len().max(nu.len());
    if atoms > EXACT_ATOM_LIMIT {
        return Err(Error::UseSinkhorn {
            atoms,
            limit: EXACT_ATOM_LIMIT,
        });
    }
    let cost = cost_matrix(mu.atoms(), nu.atoms(), p, metric)?;
    let ot = solve_transport(&cost, mu.weights(), nu.weights())?;
    Ok(ExactOt {
        value: ot.cost.max(0.0).powf(1.0 / p),
        ..ot
    })
}

/// Minimum-cost coupling of `a` and `b` for the row-major `cost`.
pub fn solve_transport(cost: &[f64], a: &[f64], b: &[f64]) -> Result<ExactOt> {
    let (n, m) = (a.len(), b.len());
    if cost.len() != n * m {
        return Err(Error::InvalidInput(
            "cost matrix shape does not match the marginals".into(),
        ));
    }
    let v = n + m;
    let mut flow = vec![0.0; n * m];
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    // potentials: rows 0..n, cols n..n+m
    let mut pot = vec![0.0; v];
    let mut dist = vec![0.0; v];
    let mut prev = vec![usize::MAX; v];
    let mut done = vec![false; v];

    loop {
        let active = (0..n).any(|i| supply[i] > MASS_EPS);
        if !active || !(0..m).any(|j| demand[j] > MASS_EPS) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if supply[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for node in 0..v {
                if !done[node] && dist[node] < best_d {
                    best_d = dist[node];
                    best = node;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best >= n {
                let j = best - n;
                if demand[j] > MASS_EPS {
                    target = best;
                    break;
                }
                // backward arcs col j -> row i where flow > 0
                for i in 0..n {
                    if !done[i] && flow[i * m + j] > 0.0 {
                        let rc = (-cost[i * m + j] + pot[best] - pot[i]).max(0.0);
                        if best_d + rc < dist[i] {
                            dist[i] = best_d + rc;
                            prev[i] = best;
                        }
                    }
                }
            } else {
                let i = best;
                for j in 0..m {
                    let node = n + j;
                    if !done[node] {
                        let rc = (cost[i * m + j] + pot[i] - pot[node]).max(0.0);
                        if best_d + rc < dist[node] {
                            dist[node] = best_d + rc;
                            prev[node] = i;
                        }
                    }
                }
            }
        }
        if target == usize::MAX {
            return Err(Error::InvalidInput("transport problem infeasible".into()));
        }
        let dt = dist[target];
        for node in 0..v {
            pot[node] += dist[node].min(dt);
        }
        // bottleneck along the path
        let mut amount = demand[target - n];
        let mut node = target;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if node < n {
                // reached row `node` from col `p`: backward arc
                amount = amount.min(flow[node * m + (p - n)]);
            }
            node = p;
        }
        amount = amount.min(supply[node]);
        let source = node;
        let mut node = target;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if node >= n {
                flow[p * m + (node - n)] += amount;
            } else {
                let f = &mut flow[node * m + (p - n)];
                *f -= amount;
                if *f < MASS_EPS {
                    *f = 0.0;
                }
            }
            node = p;
        }
        supply[source] -= amount;
        demand[target - n] -= amount;
    }

    let primal: f64 = flow.iter().zip(cost).map(|(f, c)| f * c).sum();
    // dual: α_i = -π_i, β_j = min_i (c_ij - α_i)
    let alpha: Vec<f64> = (0..n).map(|i| -pot[i]).collect();
    let beta: Vec<f64> = (0..m)
        .map(|j| {
            (0..n)
                .map(|i| cost[i * m + j] - alpha[i])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let dual: f64 = a.iter().zip(&alpha).map(|(w, x)| w * x).sum::<f64>()
        + b.iter().zip(&beta).map(|(w, y)| w * y).sum::<f64>();
    let certificate_gap = primal - dual;
    if certificate_gap.abs() > CERTIFICATE_TOL * (1.0 + primal.abs()) {
        return Err(Error::InvalidInput(format!(
            "optimality certificate failed: gap {certificate_gap:e}"
        )));
    }
    Ok(ExactOt {
        value: primal,
        cost: primal,
        plan: TransportPlan::from_dense(&flow, n, m, a, b),
        certificate_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::measure::euclidean;

    fn line(points: &[f64]) -> EmpiricalMeasure<Vec<f64>> {
        EmpiricalMeasure::uniform(points.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    fn metric(a: &Vec<f64>, b: &Vec<f64>) -> Result<f64> {
        Ok(euclidean(a, b))
    }

    #[test]
    fn two_point_example() {
        let r = exact_wp(&line(&[0.0, 1.0]), &line(&[0.0, 2.0]), 1.0, metric).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert!(r.plan.row_residual < 1e-12 && r.plan.col_residual < 1e-12);
    }

    #[test]
    fn identical_measures_use_the_diagonal() {
        let mu = line(&[0.3, -1.0, 2.5]);
        let r = exact_wp(&mu, &mu, 2.0, metric).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.plan.entries.iter().all(|(i, j, _)| i == j));
    }

    #[test]
    fn unequal_weights_and_sizes() {
        let mu = EmpiricalMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
        let nu =
            EmpiricalMeasure::new(vec![vec![0.0], vec![1.0], vec![3.0]], vec![0.5, 0.25, 0.25])
                .unwrap();
        let r = exact_wp(&mu, &nu, 1.0, metric).unwrap();
        // 1-D W₁ = ∫|F - G|
        let exact = 0.2 * 1.0 + 0.25 * 2.0;
        assert!((r.value - exact).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn size_limit() {
        let big = line(&(0..513).map(|i| i as f64).collect::<Vec<_>>());
        assert!(matches!(
            exact_wp(&big, &big, 1.0, metric),
            Err(Error::UseSinkhorn { atoms: 513, .. })
        ));
    }
}
