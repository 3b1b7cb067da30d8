use std::io::Write;

use serde::{Deserialize, Serialize};

use super::diagnostics::{ExpEstimate, StabilityDiagnostics, Verdict};
use super::functionals::TailSweepRow;
use super::t2::{CouplingReport, T2Section};
use super::thresholds::{T1Constant, ThresholdSet};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Skipped,
    Error,
}

/// Where a number came from; enough to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub n: usize,
    pub grid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub threshold: Option<f64>,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub diagnostics: Option<StabilityDiagnostics>,
    /// Signed distance to failure: positive passes.
    pub margin: Option<f64>,
    pub verdict: CheckVerdict,
    pub provenance: Provenance,
    /// Error message when the check could not run.
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, verdict: CheckVerdict, provenance: Provenance) -> Self {
        Self {
            name: name.into(),
            threshold: None,
            estimate: None,
            stderr: None,
            diagnostics: None,
            margin: None,
            verdict,
            provenance,
            note: None,
        }
    }

    /// Record for an exponential-moment estimate at a parameter inside or
    /// outside the admissible range: inside must be stable, outside is
    /// expected to be unstable but only reported.
    pub fn from_exp(
        name: impl Into<String>,
        param: f64,
        threshold: f64,
        admitted: bool,
        est: &ExpEstimate,
        provenance: Provenance,
    ) -> Self {
        let below = admitted;
        let stable = est.diagnostics.verdict == Verdict::Stable;
        let verdict = if !below || stable {
            CheckVerdict::Pass
        } else {
            CheckVerdict::Fail
        };
        Self {
            threshold: Some(threshold),
            estimate: Some(est.estimate),
            stderr: Some(est.stderr),
            diagnostics: Some(est.diagnostics.clone()),
            margin: Some(threshold - param),
            ..Self::new(name, verdict, provenance)
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InferredConstants {
    pub t1: Option<T1Constant>,
    /// `max W₂²/H` over drift perturbations.
    pub c2_hat: Option<f64>,
    /// Coupling prefactor `max E sup|ΔX|²/|x-y|²`.
    pub coupling_c2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TciReport {
    pub config_hash: Option<String>,
    pub seed: u64,
    pub thresholds: Option<ThresholdSet>,
    pub records: Vec<CheckRecord>,
    pub constants: InferredConstants,
    pub tail_sweep: Vec<TailSweepRow>,
    pub t2: Option<T2Section>,
    pub coupling: Option<CouplingReport>,
    pub caveats: Vec<String>,
}

#[derive(Serialize)]
struct FlatRow<'a> {
    config_hash: &'a str,
    seed: u64,
    name: &'a str,
    threshold: Option<f64>,
    estimate: Option<f64>,
    stderr: Option<f64>,
    last_change: Option<f64>,
    max_share: Option<f64>,
    stability: Option<Verdict>,
    margin: Option<f64>,
    verdict: CheckVerdict,
    n: usize,
    grid: &'a str,
    path_seed: u64,
    note: Option<&'a str>,
}

impl TciReport {
    pub fn all_passed(&self) -> bool {
        self.records
            .iter()
            .all(|r| matches!(r.verdict, CheckVerdict::Pass | CheckVerdict::Skipped))
    }

    pub fn any_error(&self) -> bool {
        self.records
            .iter()
            .any(|r| r.verdict == CheckVerdict::Error)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// One line per check record.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let hash = self.config_hash.as_deref().unwrap_or("");
        for r in &self.records {
            w.serialize(FlatRow {
                config_hash: hash,
                seed: self.seed,
                name: &r.name,
                threshold: r.threshold,
                estimate: r.estimate,
                stderr: r.stderr,
                last_change: r.diagnostics.as_ref().map(|d| d.last_change),
                max_share: r.diagnostics.as_ref().map(|d| d.max_share),
                stability: r.diagnostics.as_ref().map(|d| d.verdict),
                margin: r.margin,
                verdict: r.verdict,
                n: r.provenance.n,
                grid: &r.provenance.grid,
                path_seed: r.provenance.seed,
                note: r.note.as_deref(),
            })?;
        }
        if self.records.is_empty() {
            w.write_record([
                "config_hash",
                "seed",
                "name",
                "threshold",
                "estimate",
                "stderr",
                "last_change",
                "max_share",
                "stability",
                "margin",
                "verdict",
                "n",
                "grid",
                "path_seed",
                "note",
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tci::diagnostics::plug_in_exp_mean;

    #[test]
    fn csv_has_one_row_per_record() {
        let prov = Provenance {
            seed: 3,
            n: 64,
            grid: "T=1,n=16".into(),
        };
        let est = plug_in_exp_mean(&[0.0; 64]);
        let report = TciReport {
            config_hash: Some("abc".into()),
            seed: 3,
            records: vec![
                CheckRecord::from_exp("tail δ=0.05", 0.05, 0.0625, true, &est, prov.clone()),
                CheckRecord::new("t2", CheckVerdict::Skipped, prov),
            ],
            ..Default::default()
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .starts_with("config_hash,seed,name"));
        assert!(report.all_passed());
    }

    #[test]
    fn unstable_below_threshold_fails() {
        let mut logs = vec![0.0; 100];
        logs[0] = 500.0;
        let est = plug_in_exp_mean(&logs);
        let prov = Provenance {
            seed: 0,
            n: 100,
            grid: String::new(),
        };
        assert_eq!(
            CheckRecord::from_exp("x", 0.01, 0.1, true, &est, prov.clone()).verdict,
            CheckVerdict::Fail
        );
        assert_eq!(
            CheckRecord::from_exp("x", 1.0, 0.1, false, &est, prov).verdict,
            CheckVerdict::Pass
        );
    }
}
