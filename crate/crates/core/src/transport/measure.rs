use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::PathSample;

pub const WEIGHT_TOL: f64 = 1e-12;

/// Finitely many atoms with probability weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure<A> {
    atoms: Vec<A>,
    weights: Vec<f64>,
}

impl<A> EmpiricalMeasure<A> {
    pub fn new(atoms: Vec<A>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput(
                "measure needs at least one atom".into(),
            ));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { atoms, weights })
    }

    pub fn uniform(atoms: Vec<A>) -> Result<Self> {
        let n = atoms.len().max(1);
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn atoms(&self) -> &[A] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `μ∘Φ⁻¹`: atoms mapped one by one, weights unchanged.
    pub fn pushforward<B>(&self, map: impl Fn(&A) -> Result<B>) -> Result<EmpiricalMeasure<B>> {
        let atoms = self.atoms.iter().map(map).collect::<Result<Vec<B>>>()?;
        Ok(EmpiricalMeasure {
            atoms,
            weights: self.weights.clone(),
        })
    }
}

/// `Σ ν_i ln(ν_i / μ_i)` over a shared atom index; `+∞` when `ν` charges a
/// `μ`-null atom.
pub fn relative_entropy_weights(nu: &[f64], mu: &[f64]) -> Result<f64> {
    if nu.len() != mu.len() {
        return Err(Error::GridMismatch(format!(
            "supports of size {} and {}",
            nu.len(),
            mu.len()
        )));
    }
    let mut h = 0.0;
    for (&n, &m) in nu.iter().zip(mu) {
        if n == 0.0 {
            continue;
        }
        if m == 0.0 {
            return Ok(f64::INFINITY);
        }
        h += n * (n / m).ln();
    }
    Ok(h)
}

/// Relative entropy of measures whose atoms are matched by index.
pub fn relative_entropy_discrete<A>(
    nu: &EmpiricalMeasure<A>,
    mu: &EmpiricalMeasure<A>,
) -> Result<f64> {
    relative_entropy_weights(nu.weights(), mu.weights())
}

/// Euclidean distance.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `max_k |a(t_k) - b(t_k)|` on a shared grid.
pub fn sup_metric(a: &PathSample, b: &PathSample) -> Result<f64> {
    if a.grid != b.grid || a.dim != b.dim || a.states.len() != b.states.len() {
        return Err(Error::GridMismatch(format!(
            "paths on {} and {}",
            a.grid.tag(),
            b.grid.tag()
        )));
    }
    Ok(a.states
        .chunks(a.dim)
        .zip(b.states.chunks(b.dim))
        .map(|(x, y)| euclidean(x, y))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_two_term_sum() {
        let h = relative_entropy_weights(&[0.25, 0.75], &[0.5, 0.5]).unwrap();
        let direct = 0.25 * (0.5f64).ln() + 0.75 * (1.5f64).ln();
        assert!((h - direct).abs() < 1e-15);
        assert!((h - 0.1308).abs() < 1e-4);
        assert_eq!(
            relative_entropy_weights(&[0.5, 0.5], &[1.0, 0.0]).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            relative_entropy_weights(&[0.3, 0.7], &[0.3, 0.7]).unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(EmpiricalMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(EmpiricalMeasure::new(vec![0.0], vec![-1.0]).is_err());
        assert!(EmpiricalMeasure::<f64>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn affine_pushforward_doubles_atoms() {
        let mu = EmpiricalMeasure::uniform(vec![vec![0.5], vec![-1.0]]).unwrap();
        let nu = mu.pushforward(|x| Ok(vec![2.0 * x[0]])).unwrap();
        assert_eq!(nu.atoms(), &[vec![1.0], vec![-2.0]]);
        assert_eq!(nu.weights(), mu.weights());
    }
}
