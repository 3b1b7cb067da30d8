//! Transportation-cost checks: thresholds, exponential-moment estimates,
//! `W₂²/H` ratios and discrete invariance trials.

pub mod diagnostics;
pub mod functionals;
pub mod invariance;
pub mod pipeline;
pub mod report;
pub mod t2;
pub mod thresholds;

pub use diagnostics::{
    plug_in_exp_mean, ExpEstimate, StabilityDiagnostics, TracePoint, Verdict, STABLE_CHANGE,
    STABLE_SHARE,
};
pub use functionals::{
    exp_functional_estimate, gaussian_tail_estimate, gaussian_tail_from_squares,
    gaussian_tail_sweep, pair_sup_squares, path_integrals, TailSweepRow,
};
pub use invariance::{
    invariance_suite, Counterexample, InvarianceReport, Property, SineMap, TrialRecord,
};
pub use pipeline::{
    run_invariance, run_tci, CouplingCheck, ExpFunctionalCheck, InvarianceCheck, T2Check,
    TailCheck, TciConfig,
};
pub use report::{CheckRecord, CheckVerdict, InferredConstants, Provenance, TciReport};
pub use t2::{
    coupling_lipschitz_check, t2_check, CouplingReport, CouplingRow, T2Config, T2Row, T2Section,
};
pub use thresholds::{
    delta_threshold, lambda_threshold, t1_constant, LambdaThreshold, T1Constant, ThresholdSet,
};
