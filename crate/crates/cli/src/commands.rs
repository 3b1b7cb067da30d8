use zvonkin_lab::model::validate_model;
use zvonkin_lab::simulate::{simulate_ensemble, TimeGrid};
use zvonkin_lab::tci::{run_invariance, run_tci, CheckVerdict, InvarianceCheck, TciReport};
use zvonkin_lab::zvonkin::{
    build_transform, elliptic_lambda_sweep, parabolic_lambda_sweep, EllipticConfig, LambdaAttempt, TransformBuild,
};
use zvonkin_lab::{model::ModelSpec, Error};

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{num, opt, Writer};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Numerical(#[from] Error),
    #[error("{0}")]
    Config(#[from] ConfigError),
}

impl RunError {
    pub fn code(&self) -> u8 {
        match self {
            RunError::Io(_) | RunError::Config(_) => EXIT_USAGE,
            RunError::Numerical(Error::InvalidInput(_) | Error::UnsupportedDimension { .. }) => EXIT_USAGE,
            RunError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

pub type Outcome = Result<u8, RunError>;

fn writer(cfg: &ExperimentConfig) -> std::io::Result<Writer> {
    Writer::new(&cfg.output.dir, cfg.hash(), cfg.seed, cfg.output.json, cfg.output.csv)
}

pub fn validate(cfg: &ExperimentConfig) -> Outcome {
    let report = validate_model(cfg.model()?, &cfg.validation)?;
    let mut w = writer(cfg)?;
    w.json("validation.json", "validation", &report)?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), c.inequality.clone(), num(c.violation), c.passed.to_string()])
        .collect();
    w.csv("validation.csv", &["check", "inequality", "violation", "passed"], &rows)?;
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {} (violation {:e})", c.name, c.inequality, c.violation);
    }
    Ok(if report.passed { EXIT_PASS } else { EXIT_FAIL })
}

pub fn simulate(cfg: &ExperimentConfig) -> Outcome {
    let model = cfg.model()?;
    let grid = TimeGrid::new(model.horizon(), cfg.simulate.steps);
    let ens = simulate_ensemble(model, &cfg.x0(model), &grid, cfg.seed, cfg.simulate.n_paths, cfg.simulate.scheme)?;
    let d = ens.dim;
    let mut header = vec!["path".to_string(), "step".to_string(), "t".to_string()];
    header.extend((0..d).map(|i| format!("x{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::with_capacity(ens.paths.len() * grid.n_nodes());
    for (i, p) in ens.paths.iter().enumerate() {
        for k in 0..p.n_nodes() {
            let mut r = vec![i.to_string(), k.to_string(), num(grid.t(k))];
            r.extend(p.state(k).iter().map(|v| num(*v)));
            rows.push(r);
        }
    }
    let n = ens.paths.len().max(1) as f64;
    let mean: Vec<f64> = (0..d).map(|i| ens.paths.iter().map(|p| p.terminal()[i]).sum::<f64>() / n).collect();
    let summary = serde_json::json!({
        "fingerprint": ens.fingerprint,
        "scheme": ens.scheme,
        "grid": grid.tag(),
        "paths": ens.paths.len(),
        "terminal_mean": mean,
        "max_sup_norm": ens.paths.iter().map(|p| p.sup_norm()).fold(0.0, f64::max),
    });
    let mut w = writer(cfg)?;
    w.csv("paths.csv", &header, &rows)?;
    w.json("simulation.json", "simulation", &summary)?;
    println!("simulated {} paths on {}", ens.paths.len(), grid.tag());
    Ok(EXIT_PASS)
}

fn trace_rows(trace: &[LambdaAttempt]) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|a| vec![num(a.lambda), a.outcome.clone(), a.iterations.to_string(), opt(a.grad_bound)])
        .collect()
}

const TRACE_HEADER: [&str; 4] = ["lambda", "outcome", "iterations", "grad_bound"];

fn build(cfg: &ExperimentConfig, w: &mut Writer) -> Result<TransformBuild, RunError> {
    match build_transform(cfg.model()?, &cfg.pipeline.transform()) {
        Ok(b) => {
            w.csv("lambda_trace.csv", &TRACE_HEADER, &trace_rows(&b.trace))?;
            Ok(b)
        }
        Err(f) => {
            w.csv("lambda_trace.csv", &TRACE_HEADER, &trace_rows(&f.trace))?;
            eprintln!("transform failed: {}", f.error);
            for a in &f.trace {
                eprintln!("  lambda {} -> {} (grad {:?})", a.lambda, a.outcome, a.grad_bound);
            }
            Err(f.error.into())
        }
    }
}

pub fn zvonkin(cfg: &ExperimentConfig) -> Outcome {
    let mut w = writer(cfg)?;
    let b = build(cfg, &mut w)?;
    let phi = &b.model.phi;
    w.json("u.json", "grid_function", &phi.u)?;
    let summary = serde_json::json!({
        "kind": b.model.kind,
        "lambda": b.lambda,
        "grad_bound": phi.grad_bound,
        "threshold": phi.threshold,
        "u_sup": b.u_sup,
        "grad_sup": b.grad_sup,
        "iterations": b.history.len(),
    });
    w.json("homeomorphism.json", "homeomorphism", &summary)?;
    let rows: Vec<Vec<String>> = b
        .history
        .iter()
        .map(|r| vec![r.iteration.to_string(), num(r.sup_change), num(r.h_change), opt(r.ratio), num(r.grad_bound)])
        .collect();
    w.csv("contraction.csv", &["iteration", "sup_change", "h_change", "ratio", "grad_bound"], &rows)?;

    if !cfg.pipeline.lambda_sweep.is_empty() {
        let lambdas = &cfg.pipeline.lambda_sweep;
        let rows: Vec<Vec<String>> = match cfg.model()? {
            ModelSpec::Dini(m) => parabolic_lambda_sweep(m, lambdas, &cfg.pipeline.parabolic)?
                .iter()
                .map(|r| vec![num(r.lambda), num(r.u_sup), num(r.grad_sup)])
                .collect(),
            ModelSpec::Singular(m) => {
                let ecfg = cfg.pipeline.elliptic.unwrap_or_else(|| EllipticConfig::for_dim(m.dim));
                elliptic_lambda_sweep(m, lambdas, &ecfg)?
                    .rows
                    .iter()
                    .map(|r| vec![num(r.lambda), num(r.u_sup), num(r.grad_sup)])
                    .collect()
            }
        };
        w.csv("lambda_sweep.csv", &["lambda", "u_sup", "grad_sup"], &rows)?;
    }
    println!(
        "accepted lambda {} with grad_bound {:.4} < {} after {} iterations",
        b.lambda,
        phi.grad_bound,
        phi.threshold,
        b.history.len()
    );
    Ok(EXIT_PASS)
}

fn report_code(report: &TciReport) -> u8 {
    if report.any_error() {
        EXIT_NUMERICAL
    } else if report.all_passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn print_records(report: &TciReport) {
    for r in &report.records {
        let tag = match r.verdict {
            CheckVerdict::Pass => "PASS",
            CheckVerdict::Fail => "FAIL",
            CheckVerdict::Skipped => "SKIP",
            CheckVerdict::Error => "ERROR",
        };
        let mut line = format!("{tag} {}", r.name);
        if let Some(e) = r.estimate {
            line += &format!(" estimate={e:.6e}");
        }
        if let Some(t) = r.threshold {
            line += &format!(" threshold={t:.6e}");
        }
        if let Some(d) = &r.diagnostics {
            line += &format!(" change={:.3} share={:.3}", d.last_change, d.max_share);
        }
        if let Some(n) = &r.note {
            line += &format!(" ({n})");
        }
        println!("{line}");
    }
}

fn write_report(w: &mut Writer, report: &TciReport) -> std::io::Result<()> {
    w.json("tci_report.json", "tci_report", report)?;
    if w.csv {
        let mut buf = Vec::new();
        report.write_csv(&mut buf).map_err(std::io::Error::other)?;
        w.raw("tci_report.csv", &buf)?;
    }
    Ok(())
}

pub fn tci(cfg: &ExperimentConfig) -> Outcome {
    let mut w = writer(cfg)?;
    let b = build(cfg, &mut w)?;
    let mut report = run_tci(cfg.model()?, &b.model, &cfg.harness);
    report.config_hash = Some(w.config_hash.clone());
    write_report(&mut w, &report)?;
    if !report.tail_sweep.is_empty() {
        let rows: Vec<Vec<String>> = report
            .tail_sweep
            .iter()
            .map(|r| {
                vec![
                    num(r.delta),
                    r.n.to_string(),
                    r.below_threshold.to_string(),
                    num(r.result.estimate),
                    num(r.result.log_estimate),
                    num(r.result.stderr),
                    num(r.result.diagnostics.last_change),
                    num(r.result.diagnostics.max_share),
                    format!("{:?}", r.result.diagnostics.verdict).to_lowercase(),
                ]
            })
            .collect();
        w.csv(
            "tail_sweep.csv",
            &["delta", "n", "below_threshold", "estimate", "log_estimate", "stderr", "last_change", "max_share", "verdict"],
            &rows,
        )?;
    }
    if let Some(t2) = &report.t2 {
        let rows: Vec<Vec<String>> = t2
            .rows
            .iter()
            .map(|r| {
                vec![
                    serde_json::to_string(&r.shift).unwrap_or_default(),
                    num(r.entropy),
                    num(r.entropy_stderr),
                    num(r.w2_exact),
                    num(r.w2_exact_half),
                    opt(r.w2_bracket.map(|b| b.0)),
                    opt(r.w2_bracket.map(|b| b.1)),
                    opt(r.ratio),
                    opt(r.ratio_half),
                    r.skipped.to_string(),
                ]
            })
            .collect();
        w.csv(
            "t2.csv",
            &["shift", "entropy", "entropy_stderr", "w2", "w2_half", "w2_lower", "w2_upper", "ratio", "ratio_half", "skipped"],
            &rows,
        )?;
    }
    print_records(&report);
    Ok(report_code(&report))
}

pub fn invariance(cfg: &ExperimentConfig) -> Outcome {
    let check = cfg.harness.invariance.clone().unwrap_or_else(InvarianceCheck::default);
    let (mut report, inv) = run_invariance(&check, cfg.seed);
    report.config_hash = Some(cfg.hash());
    let mut w = writer(cfg)?;
    write_report(&mut w, &report)?;
    if let Some(inv) = &inv {
        let summary = serde_json::json!({
            "trials": inv.trials,
            "sizes": inv.sizes,
            "failures": inv.failures.len(),
            "max_w_gap": inv.max_w_gap,
            "max_entropy_gap": inv.max_entropy_gap,
            "min_sandwich_slack": inv.min_sandwich_slack,
        });
        w.json("invariance.json", "invariance", &summary)?;
        if !inv.passed() {
            // always dumped, whatever the format switches say
            let mut buf = Vec::new();
            inv.write_counterexamples(&mut buf)?;
            w.raw("counterexamples.json", &buf)?;
        }
        println!(
            "{} trials, {} failures (max W gap {:e}, max entropy gap {:e})",
            inv.trials,
            inv.failures.len(),
            inv.max_w_gap,
            inv.max_entropy_gap
        );
    }
    print_records(&report);
    Ok(report_code(&report))
}
