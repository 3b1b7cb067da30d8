//! Plug-in estimates of exponential moments with heavy-tail diagnostics.
//!
//! No sample can prove an expectation finite; the verdict instead asks that
//! the estimate has settled under ensemble doubling and that no single term
//! dominates the sum.

use serde::{Deserialize, Serialize};

/// Relative change over the last ensemble doubling accepted as stable.
pub const STABLE_CHANGE: f64 = 0.1;
/// Largest single-term share of the sum accepted as stable.
pub const STABLE_SHARE: f64 = 0.5;
/// Smallest prefix in the sub-ensemble trace.
const MIN_TRACE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityDiagnostics {
    /// Estimates on prefixes `n, n/2, n/4, …` (ascending).
    pub trace: Vec<TracePoint>,
    /// `|m_n - m_{n/2}| / m_n`.
    pub last_change: f64,
    /// Largest term over the sum of terms.
    pub max_share: f64,
    /// The estimate overflowed `f64`.
    pub overflow: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// `ln` of the estimate, finite even when the estimate overflows.
    pub log_estimate: f64,
    pub n: usize,
    pub diagnostics: StabilityDiagnostics,
}

fn log_mean_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln() - (logs.len() as f64).ln()
}

/// Mean of `exp(l_i)` over the given log-terms, with diagnostics.
pub fn plug_in_exp_mean(logs: &[f64]) -> ExpEstimate {
    let n = logs.len();
    let log_estimate = log_mean_exp(logs);
    let estimate = log_estimate.exp();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = scaled.iter().sum();
    let max_share = if total > 0.0 { 1.0 / total } else { 1.0 };
    let stderr = if n > 1 {
        let mean = total / n as f64;
        let var = scaled.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
        m.exp() * (var / n as f64).sqrt()
    } else {
        0.0
    };

    let mut sizes = vec![n];
    while sizes.last().is_some_and(|&k| k / 2 >= MIN_TRACE) {
        let k = sizes.last().unwrap() / 2;
        sizes.push(k);
    }
    sizes.reverse();
    let trace: Vec<TracePoint> = sizes
        .iter()
        .map(|&k| TracePoint {
            n: k,
            estimate: log_mean_exp(&logs[..k]).exp(),
        })
        .collect();
    // compare in log space so overflowing estimates still yield a change
    let last_change = if sizes.len() >= 2 {
        let half = log_mean_exp(&logs[..sizes[sizes.len() - 2]]);
        (1.0 - (half - log_estimate).exp()).abs()
    } else {
        f64::INFINITY
    };
    let overflow = !estimate.is_finite();
    let stable = !overflow && last_change < STABLE_CHANGE && max_share < STABLE_SHARE;
    ExpEstimate {
        estimate,
        stderr,
        log_estimate,
        n,
        diagnostics: StabilityDiagnostics {
            trace,
            last_change,
            max_share,
            overflow,
            verdict: if stable {
                Verdict::Stable
            } else {
                Verdict::Unstable
            },
        },
    }
}
