use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::operator_norm;
use crate::simulate::TimeGrid;

pub const GRID_FORMAT_VERSION: u32 = 1;

/// Uniform box `[-R, R]^d`, `m` points per axis, axis 0 varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceGrid {
    pub dim: usize,
    pub radius: f64,
    pub points: usize,
}

/// Position of a point inside one grid cell.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub base: [usize; 2],
    pub frac: [f64; 2],
}

impl SpaceGrid {
    pub fn new(dim: usize, radius: f64, points: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension {
                dim,
                reason: "grid solvers support d ≤ 2".into(),
            });
        }
        if points < 3 || !(radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid needs ≥ 3 points and R > 0 (got {points}, {radius})"
            )));
        }
        Ok(Self {
            dim,
            radius,
            points,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.points - 1) as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i == self.points - 1 {
            self.radius
        } else {
            -self.radius + i as f64 * self.spacing()
        }
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        [node % self.points, node / self.points]
    }

    pub fn node_index(&self, ix: [usize; 2]) -> usize {
        ix[0] + self.points * ix[1]
    }

    pub fn node(&self, node: usize) -> Vec<f64> {
        let ix = self.multi_index(node);
        (0..self.dim).map(|a| self.coord(ix[a])).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.radius * (1.0 + 1e-12))
    }

    pub fn locate(&self, x: &[f64]) -> Result<Cell> {
        let dx = self.spacing();
        let mut cell = Cell {
            base: [0; 2],
            frac: [0.0; 2],
        };
        for a in 0..self.dim {
            let mut s = (x[a] + self.radius) / dx;
            let top = (self.points - 1) as f64;
            if !(s >= -1e-9 && s <= top + 1e-9) {
                return Err(Error::OutOfDomain {
                    point: x.to_vec(),
                    radius: self.radius,
                });
            }
            let r = s.round();
            if (s - r).abs() < 1e-9 {
                s = r;
            }
            s = s.clamp(0.0, top);
            let i = (s.floor() as usize).min(self.points - 2);
            cell.base[a] = i;
            cell.frac[a] = s - i as f64;
        }
        Ok(cell)
    }

    /// Corner nodes of a cell with their multilinear weights.
    pub fn corners(&self, cell: &Cell) -> Vec<(usize, f64)> {
        match self.dim {
            1 => {
                let i = cell.base[0];
                let f = cell.frac[0];
                vec![(i, 1.0 - f), (i + 1, f)]
            }
            _ => {
                let [i, j] = cell.base;
                let [f, g] = cell.frac;
                vec![
                    (self.node_index([i, j]), (1.0 - f) * (1.0 - g)),
                    (self.node_index([i + 1, j]), f * (1.0 - g)),
                    (self.node_index([i, j + 1]), (1.0 - f) * g),
                    (self.node_index([i + 1, j + 1]), f * g),
                ]
            }
        }
    }
}

/// `d`-vector values on a space grid, optionally on every node of a time
/// grid, with multilinear interpolation in space and linear in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub format_version: u32,
    pub space: SpaceGrid,
    pub times: Option<TimeGrid>,
    /// `values[(slice · nodes + node) · d + component]`.
    pub values: Vec<f64>,
    /// Nodal central-difference Jacobians, `d × d` row-major per node.
    #[serde(skip)]
    grads: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(space: SpaceGrid, times: Option<TimeGrid>) -> Self {
        let slices = times.map_or(1, |t| t.n_nodes());
        let values = vec![0.0; slices * space.n_nodes() * space.dim];
        Self::from_values(space, times, values).expect("consistent sizes")
    }

    pub fn from_values(
        space: SpaceGrid,
        times: Option<TimeGrid>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let slices = times.map_or(1, |t| t.n_nodes());
        let expect = slices * space.n_nodes() * space.dim;
        if values.len() != expect {
            return Err(Error::GridMismatch(format!(
                "expected {expect} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let node = (i / space.dim) % space.n_nodes();
            return Err(Error::InvalidCoefficient {
                name: "u".into(),
                point: space.node(node),
            });
        }
        let mut g = Self {
            format_version: GRID_FORMAT_VERSION,
            space,
            times,
            values,
            grads: Vec::new(),
        };
        g.grads = g.nodal_gradients();
        Ok(g)
    }

    /// Samples `f(t, x)` at every node (and time slice).
    pub fn from_fn(
        space: SpaceGrid,
        times: Option<TimeGrid>,
        f: impl Fn(f64, &[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let d = space.dim;
        let slices = times.map_or(1, |t| t.n_nodes());
        let mut values = Vec::with_capacity(slices * space.n_nodes() * d);
        for s in 0..slices {
            let t = times.map_or(0.0, |tg| tg.t(s));
            for node in 0..space.n_nodes() {
                let v = f(t, &space.node(node));
                values.extend_from_slice(&v[..d]);
            }
        }
        Self::from_values(space, times, values)
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn n_slices(&self) -> usize {
        self.times.map_or(1, |t| t.n_nodes())
    }

    pub fn slice(&self, s: usize) -> &[f64] {
        let len = self.space.n_nodes() * self.space.dim;
        &self.values[s * len..(s + 1) * len]
    }

    pub fn node_value(&self, slice: usize, node: usize) -> &[f64] {
        let d = self.space.dim;
        let off = (slice * self.space.n_nodes() + node) * d;
        &self.values[off..off + d]
    }

    fn nodal_gradients(&self) -> Vec<f64> {
        let sp = &self.space;
        let (d, m, dx) = (sp.dim, sp.points, sp.spacing());
        let nodes = sp.n_nodes();
        let mut out = vec![0.0; self.n_slices() * nodes * d * d];
        for s in 0..self.n_slices() {
            let vals = self.slice(s);
            for node in 0..nodes {
                let ix = sp.multi_index(node);
                for a in 0..d {
                    let (lo, hi, den) = if ix[a] == 0 {
                        (node, node + stride(m, a), dx)
                    } else if ix[a] == m - 1 {
                        (node - stride(m, a), node, dx)
                    } else {
                        (node - stride(m, a), node + stride(m, a), 2.0 * dx)
                    };
                    for c in 0..d {
                        out[((s * nodes + node) * d + c) * d + a] =
                            (vals[hi * d + c] - vals[lo * d + c]) / den;
                    }
                }
            }
        }
        out
    }

    fn time_weights(&self, t: f64) -> [(usize, f64); 2] {
        match self.times {
            None => [(0, 1.0), (0, 0.0)],
            Some(tg) => {
                let n = tg.n_steps;
                let mut tau = ((t - tg.t0) / tg.step()).clamp(0.0, n as f64);
                let r = tau.round();
                if (tau - r).abs() < 1e-9 {
                    tau = r;
                }
                let k = (tau.floor() as usize).min(n - 1);
                let w = tau - k as f64;
                [(k, 1.0 - w), (k + 1, w)]
            }
        }
    }

    /// Nodal central-difference Jacobian at one slice.
    pub fn nodal_jacobian(&self, slice: usize, node: usize) -> &[f64] {
        let d = self.space.dim;
        let off = (slice * self.space.n_nodes() + node) * d * d;
        &self.grads[off..off + d * d]
    }

    /// `u_t(x)`.
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.space.dim;
        let cell = self.space.locate(x)?;
        let corners = self.space.corners(&cell);
        out[..d].iter_mut().for_each(|v| *v = 0.0);
        let nodes = self.space.n_nodes();
        for (s, ws) in self.time_weights(t) {
            if ws == 0.0 {
                continue;
            }
            for &(node, w) in &corners {
                if w == 0.0 {
                    continue;
                }
                let off = (s * nodes + node) * d;
                for c in 0..d {
                    out[c] += ws * w * self.values[off + c];
                }
            }
        }
        Ok(())
    }

    pub fn eval_vec(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.space.dim];
        self.eval(t, x, &mut out)?;
        Ok(out)
    }

    /// Interpolated nodal Jacobian `∇u_t(x)`, row-major.
    pub fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.space.dim;
        let cell = self.space.locate(x)?;
        let corners = self.space.corners(&cell);
        out[..d * d].iter_mut().for_each(|v| *v = 0.0);
        let nodes = self.space.n_nodes();
        for (s, ws) in self.time_weights(t) {
            if ws == 0.0 {
                continue;
            }
            for &(node, w) in &corners {
                if w == 0.0 {
                    continue;
                }
                let off = (s * nodes + node) * d * d;
                for k in 0..d * d {
                    out[k] += ws * w * self.grads[off + k];
                }
            }
        }
        Ok(())
    }

    /// `max |u|` over all nodes and slices.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.space.dim)
            .map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Lipschitz constant of the interpolant: the largest operator norm of
    /// the cell-edge difference Jacobians at cell corners (the extreme points
    /// of the multilinear interpolant's gradient), over all slices.
    pub fn grad_bound(&self) -> f64 {
        let sp = &self.space;
        let (d, m, dx) = (sp.dim, sp.points, sp.spacing());
        let mut best: f64 = 0.0;
        for s in 0..self.n_slices() {
            let v = self.slice(s);
            match d {
                1 => {
                    for i in 0..m - 1 {
                        best = best.max((v[i + 1] - v[i]).abs() / dx);
                    }
                }
                _ => {
                    for j in 0..m - 1 {
                        for i in 0..m - 1 {
                            for (ci, cj) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                                let mut jac = [0.0; 4];
                                for c in 0..2 {
                                    let a0 = v[sp.node_index([i, cj]) * 2 + c];
                                    let a1 = v[sp.node_index([i + 1, cj]) * 2 + c];
                                    let b0 = v[sp.node_index([ci, j]) * 2 + c];
                                    let b1 = v[sp.node_index([ci, j + 1]) * 2 + c];
                                    jac[c * 2] = (a1 - a0) / dx;
                                    jac[c * 2 + 1] = (b1 - b0) / dx;
                                }
                                best = best.max(operator_norm(&jac, 2));
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// `max ‖∇u‖` over the nodal central-difference Jacobians.
    pub fn nodal_grad_sup(&self) -> f64 {
        let d = self.space.dim;
        self.grads
            .chunks(d * d)
            .map(|j| operator_norm(j, d))
            .fold(0.0, f64::max)
    }

    /// `max |u - v|` over nodes and slices.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.space != other.space || self.times != other.times {
            return Err(Error::GridMismatch(
                "grid functions live on different grids".into(),
            ));
        }
        let d = self.space.dim;
        Ok(self
            .values
            .chunks(d)
            .zip(other.values.chunks(d))
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max))
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let raw: GridFunction = serde_json::from_reader(input)?;
        if raw.format_version != GRID_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported grid format version {}",
                raw.format_version
            )));
        }
        Self::from_values(raw.space, raw.times, raw.values)
    }
}

pub(crate) fn stride(m: usize, axis: usize) -> usize {
    if axis == 0 {
        1
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_nodes() {
        let sp = SpaceGrid::new(2, 2.0, 9).unwrap();
        let g = GridFunction::from_fn(sp, None, |_t, x| vec![x[0] * x[1], x[0].sin()]).unwrap();
        for node in 0..sp.n_nodes() {
            let x = sp.node(node);
            let v = g.eval_vec(0.0, &x).unwrap();
            assert_eq!(v, g.node_value(0, node));
        }
    }

    #[test]
    fn linear_function_is_exact_everywhere() {
        let sp = SpaceGrid::new(2, 1.0, 5).unwrap();
        let g = GridFunction::from_fn(sp, None, |_t, x| vec![0.3 * x[0] - 0.2 * x[1], 0.1 * x[1]])
            .unwrap();
        let v = g.eval_vec(0.0, &[0.37, -0.81]).unwrap();
        assert!((v[0] - (0.3 * 0.37 + 0.2 * 0.81)).abs() < 1e-15);
        assert!((v[1] + 0.081).abs() < 1e-15);
        let mut jac = [0.0; 4];
        g.jacobian(0.0, &[0.37, -0.81], &mut jac).unwrap();
        assert!(
            (jac[0] - 0.3).abs() < 1e-14
                && (jac[1] + 0.2).abs() < 1e-14
                && (jac[3] - 0.1).abs() < 1e-14
        );
        let expect = operator_norm(&[0.3, -0.2, 0.0, 0.1], 2);
        assert!((g.grad_bound() - expect).abs() < 1e-14);
    }

    #[test]
    fn time_interpolation_and_domain() {
        let sp = SpaceGrid::new(1, 1.0, 3).unwrap();
        let tg = TimeGrid::new(1.0, 2);
        let g = GridFunction::from_fn(sp, Some(tg), |t, _x| vec![t]).unwrap();
        assert!((g.eval_vec(0.25, &[0.3]).unwrap()[0] - 0.25).abs() < 1e-15);
        assert!(matches!(
            g.eval_vec(0.0, &[1.5]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn json_roundtrip() {
        let sp = SpaceGrid::new(1, 1.0, 5).unwrap();
        let g = GridFunction::from_fn(sp, None, |_t, x| vec![x[0].cos()]).unwrap();
        let mut buf = Vec::new();
        g.write_json(&mut buf).unwrap();
        let back = GridFunction::read_json(&buf[..]).unwrap();
        assert_eq!(g, back);
    }
}
