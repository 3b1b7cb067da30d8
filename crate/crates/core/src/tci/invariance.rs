//! Randomised discrete checks that transport distances and relative entropy
//! are preserved by bijections, and sandwiched by bi-Lipschitz maps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{NoiseKey, UniformStream};
use crate::transport::{euclidean, exact_wp, relative_entropy_weights, EmpiricalMeasure};

pub const W_TOL: f64 = 1e-10;
pub const ENTROPY_TOL: f64 = 1e-12;
/// Relative slack on the sandwich inequalities (rounding only).
pub const SANDWICH_TOL: f64 = 1e-12;

/// `x ↦ x + a sin(ω x)` componentwise; bi-Lipschitz with constants
/// `1 ∓ |aω|` when `|aω| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineMap {
    pub amplitude: f64,
    pub frequency: f64,
}

impl SineMap {
    pub fn new(amplitude: f64, frequency: f64) -> Result<Self> {
        if !((amplitude * frequency).abs() < 1.0) {
            return Err(Error::InvalidInput(format!(
                "|aω| = {} must be below 1",
                (amplitude * frequency).abs()
            )));
        }
        Ok(Self {
            amplitude,
            frequency,
        })
    }

    pub fn identity() -> Self {
        Self {
            amplitude: 0.0,
            frequency: 1.0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|v| v + self.amplitude * (self.frequency * v).sin())
            .collect()
    }

    /// Componentwise Newton inverse; `f' ≥ 1 - |aω| > 0` so it is well posed.
    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        let (a, w) = (self.amplitude, self.frequency);
        y.iter()
            .map(|&target| {
                let mut x = target;
                for _ in 0..100 {
                    let step = (x + a * (w * x).sin() - target) / (1.0 + a * w * (w * x).cos());
                    x -= step;
                    if step.abs() <= 1e-16 * (1.0 + x.abs()) {
                        break;
                    }
                }
                x
            })
            .collect()
    }

    /// Theoretical Lipschitz constants `(1 - |aω|, 1 + |aω|)`.
    pub fn bounds(&self) -> (f64, f64) {
        let g = (self.amplitude * self.frequency).abs();
        (1.0 - g, 1.0 + g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// `W_p^{ρ∘Φ⁻¹}(μ∘Φ⁻¹, ν∘Φ⁻¹) = W_p^ρ(μ, ν)`.
    WassersteinPushforward,
    /// `H(ν∘Φ⁻¹ | μ∘Φ⁻¹) = H(ν | μ)` for the smooth map.
    EntropyPushforward,
    /// Same, under a random injective relabelling of the support.
    EntropyRelabel,
    /// `c₁ W ≤ W(μ∘Φ⁻¹, ν∘Φ⁻¹) ≤ c₂ W` under the ambient metric.
    Sandwich,
}

/// Everything needed to replay a failed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: usize,
    pub property: Property,
    pub map: SineMap,
    pub p: f64,
    pub mu: EmpiricalMeasure<Vec<f64>>,
    pub nu: EmpiricalMeasure<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub dim: usize,
    pub atoms: (usize, usize),
    pub p: f64,
    pub map: SineMap,
    pub w: f64,
    pub w_pushforward: f64,
    pub w_image: f64,
    pub c1: f64,
    pub c2: f64,
    pub entropy: f64,
    pub entropy_pushforward: f64,
    pub entropy_relabel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub trials: usize,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub max_w_gap: f64,
    pub max_entropy_gap: f64,
    /// Smallest relative slack in either sandwich inequality (negative on failure).
    pub min_sandwich_slack: f64,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<Counterexample>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// `Ok` when every trial passed, otherwise an error naming the first
    /// counterexample (the full list stays in the report).
    pub fn ensure(&self) -> Result<()> {
        match self.failures.first() {
            None => Ok(()),
            Some(c) => Err(Error::InvalidInput(format!(
                "{} invariance failures; first: trial {} {:?} lhs {} rhs {}",
                self.failures.len(),
                c.trial,
                c.property,
                c.lhs,
                c.rhs
            ))),
        }
    }

    pub fn write_counterexamples<W: std::io::Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.failures)?;
        Ok(())
    }
}

fn random_weights(rng: &mut UniformStream, n: usize, allow_zero: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let u = rng.next_uniform();
            if allow_zero && u < 0.15 {
                0.0
            } else {
                0.05 + u
            }
        })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn random_atoms(rng: &mut UniformStream, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| 6.0 * rng.next_uniform() - 3.0).collect())
        .collect()
}

/// Image measure on sorted distinct labels.
fn relabel<K: Ord + Clone>(weights: &[f64], labels: &[K]) -> Vec<f64> {
    let mut acc: BTreeMap<K, f64> = BTreeMap::new();
    for (w, k) in weights.iter().zip(labels) {
        *acc.entry(k.clone()).or_insert(0.0) += w;
    }
    acc.into_values().collect()
}

fn ordered_bits(x: &[f64]) -> Vec<i64> {
    // total order on the images compatible with f64 ordering
    x.iter()
        .map(|v| {
            let b = v.to_bits() as i64;
            if b < 0 {
                b ^ i64::MAX
            } else {
                b
            }
        })
        .collect()
}

fn run_trial(
    trial: usize,
    sizes: &[usize],
    seed: u64,
) -> Result<(TrialRecord, Vec<Counterexample>)> {
    let mut rng = UniformStream::new(NoiseKey::new(seed, trial as u64, 0));
    let dim = 1 + rng.next_below(2);
    let m = sizes[rng.next_below(sizes.len())];
    let n = sizes[rng.next_below(sizes.len())];
    let p = if rng.next_below(2) == 0 { 1.0 } else { 2.0 };
    let map = if trial == 0 {
        SineMap::identity()
    } else {
        let frequency = 0.5 + 2.5 * rng.next_uniform();
        let g = 0.95 * rng.next_uniform();
        let sign = if rng.next_below(2) == 0 { 1.0 } else { -1.0 };
        SineMap::new(sign * g / frequency, frequency)?
    };

    let mu = EmpiricalMeasure::new(
        random_atoms(&mut rng, m, dim),
        random_weights(&mut rng, m, false),
    )?;
    let nu = EmpiricalMeasure::new(
        random_atoms(&mut rng, n, dim),
        random_weights(&mut rng, n, false),
    )?;
    let metric = |a: &Vec<f64>, b: &Vec<f64>| Ok(euclidean(a, b));
    let w = exact_wp(&mu, &nu, p, metric)?.value;

    let image = |x: &Vec<f64>| Ok(map.apply(x));
    let mu_img = mu.pushforward(image)?;
    let nu_img = nu.pushforward(image)?;
    let pulled = |a: &Vec<f64>, b: &Vec<f64>| Ok(euclidean(&map.invert(a), &map.invert(b)));
    let w_pushforward = exact_wp(&mu_img, &nu_img, p, pulled)?.value;
    let w_image = exact_wp(&mu_img, &nu_img, p, metric)?.value;

    // measured Lipschitz constants over the joint support
    let support: Vec<&Vec<f64>> = mu.atoms().iter().chain(nu.atoms()).collect();
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    for i in 0..support.len() {
        for j in i + 1..support.len() {
            let d = euclidean(support[i], support[j]);
            if d > 0.0 {
                let r = euclidean(&map.apply(support[i]), &map.apply(support[j])) / d;
                c1 = c1.min(r);
                c2 = c2.max(r);
            }
        }
    }
    if !c1.is_finite() {
        c1 = 1.0;
        c2 = 1.0;
    }

    // entropy on a shared support, ν ≪ μ
    let k = m.max(n);
    let common = random_atoms(&mut rng, k, dim);
    let mu_w = random_weights(&mut rng, k, false);
    let nu_w = random_weights(&mut rng, k, true);
    let entropy = relative_entropy_weights(&nu_w, &mu_w)?;
    let keys: Vec<Vec<i64>> = common.iter().map(|x| ordered_bits(&map.apply(x))).collect();
    let entropy_pushforward =
        relative_entropy_weights(&relabel(&nu_w, &keys), &relabel(&mu_w, &keys))?;
    let mut pool: Vec<usize> = (0..3 * k).collect();
    let labels: Vec<usize> = (0..k)
        .map(|_| pool.swap_remove(rng.next_below(pool.len())))
        .collect();
    let entropy_relabel =
        relative_entropy_weights(&relabel(&nu_w, &labels), &relabel(&mu_w, &labels))?;

    let mut failures = Vec::new();
    let mut fail = |property, lhs: f64, rhs: f64, tolerance| {
        failures.push(Counterexample {
            trial,
            property,
            map,
            p,
            mu: mu.clone(),
            nu: nu.clone(),
            lhs,
            rhs,
            tolerance,
        })
    };
    if !((w_pushforward - w).abs() <= W_TOL * w.max(1.0)) {
        fail(Property::WassersteinPushforward, w_pushforward, w, W_TOL);
    }
    if !((entropy_pushforward - entropy).abs() <= ENTROPY_TOL) {
        fail(
            Property::EntropyPushforward,
            entropy_pushforward,
            entropy,
            ENTROPY_TOL,
        );
    }
    if !((entropy_relabel - entropy).abs() <= ENTROPY_TOL) {
        fail(
            Property::EntropyRelabel,
            entropy_relabel,
            entropy,
            ENTROPY_TOL,
        );
    }
    let slack = SANDWICH_TOL * w.max(1e-300);
    if !(c1 * w <= w_image + slack && w_image <= c2 * w + slack) {
        fail(Property::Sandwich, w_image, w, SANDWICH_TOL);
    }

    let record = TrialRecord {
        trial,
        dim,
        atoms: (m, n),
        p,
        map,
        w,
        w_pushforward,
        w_image,
        c1,
        c2,
        entropy,
        entropy_pushforward,
        entropy_relabel,
    };
    Ok((record, failures))
}

/// Runs `trials` randomised instances with atom counts drawn from `sizes`.
/// Trial 0 always uses the identity map.
pub fn invariance_suite(sizes: &[usize], trials: usize, seed: u64) -> Result<InvarianceReport> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidInput("atom counts must be positive".into()));
    }
    let runs: Vec<Result<(TrialRecord, Vec<Counterexample>)>> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(t, sizes, seed))
        .collect();
    let mut records = Vec::with_capacity(trials);
    let mut failures = Vec::new();
    for r in runs {
        let (rec, f) = r?;
        records.push(rec);
        failures.extend(f);
    }
    let max_w_gap = records
        .iter()
        .map(|r| (r.w_pushforward - r.w).abs())
        .fold(0.0, f64::max);
    let max_entropy_gap = records
        .iter()
        .map(|r| {
            (r.entropy_pushforward - r.entropy)
                .abs()
                .max((r.entropy_relabel - r.entropy).abs())
        })
        .fold(0.0, f64::max);
    let min_sandwich_slack = records
        .iter()
        .filter(|r| r.w > 0.0)
        .map(|r| ((r.w_image - r.c1 * r.w) / r.w).min((r.c2 * r.w - r.w_image) / r.w))
        .fold(f64::INFINITY, f64::min);
    Ok(InvarianceReport {
        trials,
        seed,
        sizes: sizes.to_vec(),
        max_w_gap,
        max_entropy_gap,
        min_sandwich_slack,
        records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_trial_is_exact() {
        let r = invariance_suite(&[3, 5], 1, 9).unwrap();
        let rec = &r.records[0];
        assert_eq!(rec.w_pushforward, rec.w);
        assert_eq!(rec.w_image, rec.w);
        assert_eq!(rec.entropy_pushforward, rec.entropy);
        assert_eq!((rec.c1, rec.c2), (1.0, 1.0));
    }

    #[test]
    fn sine_inverse_round_trips() {
        let m = SineMap::new(0.3, 1.0).unwrap();
        for x in [-4.0, -0.3, 0.0, 1.7, 9.0] {
            assert!((m.invert(&m.apply(&[x]))[0] - x).abs() < 1e-14);
        }
        assert!(SineMap::new(0.5, 2.0).is_err());
    }

    #[test]
    fn measured_constants_respect_bounds() {
        let r = invariance_suite(&[2, 4, 6], 50, 3).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        for rec in &r.records {
            let (lo, hi) = rec.map.bounds();
            assert!(rec.c1 >= lo - 1e-12 && rec.c2 <= hi + 1e-12);
        }
    }

    #[test]
    fn ordered_bits_preserves_order() {
        let xs = [-3.5, -1e-300, -0.0, 0.0, 2e-10, 7.0];
        let k: Vec<Vec<i64>> = xs.iter().map(|x| ordered_bits(&[*x])).collect();
        assert!(k.windows(2).all(|w| w[0] <= w[1]));
    }
}
