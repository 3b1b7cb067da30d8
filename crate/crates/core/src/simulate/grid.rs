use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::error::{Error, Result};

/// Uniform time grid `t_k = t0 + k (T - t0) / n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub t0: f64,
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Self {
        Self::span(0.0, horizon, n_steps)
    }

    pub fn span(t0: f64, horizon: f64, n_steps: usize) -> Self {
        assert!(
            n_steps > 0 && horizon > t0,
            "invalid time grid [{t0}, {horizon}] / {n_steps}"
        );
        Self {
            t0,
            horizon,
            n_steps,
        }
    }

    pub fn step(&self) -> f64 {
        (self.horizon - self.t0) / self.n_steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            self.t0 + k as f64 * self.step()
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    /// The grid with `factor` times fewer steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(Error::GridMismatch(format!(
                "{} steps not divisible by {factor}",
                self.n_steps
            )));
        }
        Ok(Self {
            n_steps: self.n_steps / factor,
            ..*self
        })
    }

    pub fn tag(&self) -> String {
        format!("[{},{}]/{}", self.t0, self.horizon, self.n_steps)
    }
}

/// One discretised path, states flattened node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub dim: usize,
    pub states: Vec<f64>,
    pub seed_id: u64,
}

impl PathSample {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.n_steps)
    }

    pub fn n_nodes(&self) -> usize {
        self.states.len() / self.dim
    }

    /// `max_k |X_{t_k}|`.
    pub fn sup_norm(&self) -> f64 {
        self.states
            .chunks(self.dim)
            .map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Paths sharing one grid, ordered by path id.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub dim: usize,
    pub paths: Vec<PathSample>,
    pub fingerprint: String,
    pub scheme: Scheme,
    pub seed: u64,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Writes `path_id,t,x_1..x_d` rows after `#`-prefixed header lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# model={}", self.fingerprint)?;
        writeln!(out, "# scheme={}", self.scheme.tag())?;
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# grid={}", self.grid.tag())?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path_id".to_string(), "t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for p in &self.paths {
            for k in 0..p.n_nodes() {
                let mut row = vec![p.seed_id.to_string(), format!("{:?}", self.grid.t(k))];
                row.extend(p.state(k).iter().map(|v| format!("{v:?}")));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
