//! The four subcommands and the report they write.

use std::fs;
use std::path::{Path, PathBuf};

use ametric_core::prelude::*;
use ametric_core::sampling::ExhaustiveBound;
use ametric_core::solver::{oracle_agreement, RESIDUAL_FACTOR};
use log::{debug, info};
use serde::Serialize;

use crate::config::{ExperimentConfig, PointInput, SpaceConfig};
use crate::error::CliError;

/// Salt for the out-of-sample pairs of the one-step inequality check.
const LEMMA1_SALT: u64 = 0x1e44a1;
/// Salt for random uniqueness-probe starts.
const STARTS_SALT: u64 = 0x57a7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Axioms,
    Classify,
    Solve,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Axioms => "axioms",
            Command::Classify => "classify",
            Command::Solve => "solve",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionFailure {
    pub message: String,
    pub witness: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub status: Option<Status>,
    pub x0: Vec<f64>,
    /// Contraction factor used for the envelopes, if any.
    pub delta: Option<f64>,
    pub iterations: usize,
    pub d0: Option<f64>,
    pub final_step: Option<f64>,
    pub final_bound: Option<f64>,
    pub final_tail_bound: Option<f64>,
    pub limit: Option<Vec<f64>>,
    /// `A(fp..fp, p)` at the limit.
    pub residual: Option<f64>,
    /// Index of the iterate that left the carrier.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escaped_at: Option<usize>,
}

/// Everything a command found, written as the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    /// The config with every default filled in.
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction_error: Option<ConstructionFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ZamfirescuCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSummary>,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    pub verdict: Verdict,
}

impl RunReport {
    fn new(command: Command, config: &ExperimentConfig) -> Self {
        RunReport {
            command: command.name().into(),
            config: config.clone(),
            space: None,
            construction_error: None,
            certificate: None,
            trace: None,
            checks: Vec::new(),
            failed_stage: None,
            verdict: Verdict::Pass,
        }
    }

    fn fail(&mut self, stage: &str) {
        if self.failed_stage.is_none() {
            info!("stage {stage} failed");
            self.failed_stage = Some(stage.into());
        }
        self.verdict = Verdict::Fail;
    }

    /// Adds a check and fails the stage if it did not pass.
    fn push_check(&mut self, stage: &str, report: CheckReport) -> bool {
        let passed = report.passed;
        debug!("{}: checked {} passed {}", report.name, report.checked, passed);
        self.checks.push(report);
        if !passed {
            self.fail(stage);
        }
        passed
    }

    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
        }
    }
}

/// Result of running one command.
#[derive(Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code()
    }
}

/// Maps a CLI error to its exit code.
pub fn error_exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Core(ametric_core::Error::Escaped { .. })
        | CliError::Core(ametric_core::Error::Construction { .. }) => 1,
        _ => 2,
    }
}

fn build_space(cfg: &ExperimentConfig, gated: bool) -> ametric_core::Result<AMetricSpace> {
    let space = match &cfg.space {
        SpaceConfig::Absdiff { t, d, bounds } => make_absdiff_space(
            Arity::new(*t)?,
            *d,
            bounds.as_ref().map(|b| (b.lo.clone(), b.hi.clone())),
        )?,
        SpaceConfig::Lifted { t, table } if gated => make_lifted_space(Arity::new(*t)?, table.clone())?,
        SpaceConfig::Lifted { t, table } => make_lifted_space_unchecked(Arity::new(*t)?, table.clone())?,
    };
    Ok(space.with_eq_tol(cfg.tolerances.eq_tol))
}

/// Turns construction failures into report entries; other errors propagate.
fn construct<T>(report: &mut RunReport, stage: &str, r: ametric_core::Result<T>) -> Result<Option<T>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(ametric_core::Error::Construction { message, witness }) => {
            report.construction_error = Some(ConstructionFailure { message, witness });
            report.fail(stage);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn check_plan(cfg: &ExperimentConfig) -> SpaceCheckPlan {
    SpaceCheckPlan {
        sampler: cfg.sampler(),
        n_tuples: cfg.sampling.n_tuples,
        n_pairs: cfg.sampling.n_pairs,
        n_triples: cfg.sampling.n_triples,
        bound: ExhaustiveBound::default(),
        tol: cfg.tolerance(),
    }
}

fn run_axioms(cfg: &ExperimentConfig, space: &AMetricSpace, report: &mut RunReport) -> Result<bool, CliError> {
    let mut ok = true;
    for check in check_space(space, &check_plan(cfg))? {
        ok &= report.push_check("axioms", check);
    }
    Ok(ok)
}

fn classification_pairs(cfg: &ExperimentConfig, space: &AMetricSpace, seed: u64) -> Result<SampleSet, CliError> {
    let sampler = Sampler::new(seed)
        .with_radius(cfg.sampling.radius)
        .with_near_equal(false);
    Ok(sampler.tuples_for(
        space.carrier(),
        space.t(),
        2,
        cfg.sampling.n_pairs,
        ExhaustiveBound::default(),
    )?)
}

/// Classifies, re-checks the AZ conditions on the same pairs and checks
/// the one-step inequalities on fresh pairs. Returns the certificate.
fn run_classify(
    cfg: &ExperimentConfig,
    space: &AMetricSpace,
    f: &SelfMap,
    report: &mut RunReport,
) -> Result<ZamfirescuCertificate, CliError> {
    let pairs = classification_pairs(cfg, space, cfg.seed())?;
    let cert = classify(space, f, &pairs)?;
    info!(
        "classified {} pairs: a={} b={} c={} delta={:?} valid={}",
        cert.n_pairs, cert.a, cert.b, cert.c, cert.delta, cert.valid
    );
    report.certificate = Some(cert.clone());
    if !cert.valid {
        report.fail("classify");
        return Ok(cert);
    }
    let az = check_az_conditions(space, f, (cert.a, cert.b, cert.c), &pairs, cfg.tolerance())?;
    if !report.push_check("classify", az) {
        return Ok(cert);
    }
    let fresh = Sampler {
        seed: cfg.seed() ^ LEMMA1_SALT,
        ..cfg.sampler()
    }
    .tuples_for(
        space.carrier(),
        space.t(),
        2,
        cfg.sampling.n_pairs,
        ExhaustiveBound::default(),
    )?;
    let delta = cert.delta.expect("valid certificates carry delta");
    let lemma1 = verify_lemma1(space, f, delta, &fresh, cfg.tolerance())?;
    report.push_check("lemma1", lemma1);
    Ok(cert)
}

/// Runs Picard from `solver.x0` and records the summary.
fn run_solve(
    cfg: &ExperimentConfig,
    space: &AMetricSpace,
    f: &SelfMap,
    delta: f64,
    report: &mut RunReport,
) -> Result<Option<PicardTrace>, CliError> {
    let x0 = cfg.x0()?;
    let rule = cfg.stop_rule()?;
    let mut summary = TraceSummary {
        status: None,
        x0: x0.coords().to_vec(),
        delta: (delta >= 0.0).then_some(delta),
        iterations: 0,
        d0: None,
        final_step: None,
        final_bound: None,
        final_tail_bound: None,
        limit: None,
        residual: None,
        escaped_at: None,
    };
    match picard_run(space, f, &x0, delta, &rule) {
        Ok(trace) => {
            summary.status = Some(trace.status);
            summary.iterations = trace.iterations();
            summary.d0 = trace.d0();
            summary.final_step = trace.final_step();
            summary.final_bound = trace.bounds.last().copied();
            summary.final_tail_bound = trace.iterations().checked_sub(1).and_then(|n| trace.tail_bound_at(n));
            summary.limit = trace.limit.as_ref().map(|p| p.coords().to_vec());
            summary.residual = trace.limit.as_ref().map(|p| space.rep(&f.apply(p), p));
            info!("picard: {:?} after {} steps", trace.status, trace.iterations());
            report.trace = Some(summary);
            if trace.status != Status::Converged {
                report.fail("solve");
            }
            Ok(Some(trace))
        }
        Err(ametric_core::Error::Escaped { index, point }) => {
            info!("picard: iterate {index} escaped to {point:?}");
            summary.escaped_at = Some(index);
            report.trace = Some(summary);
            report.fail("solve");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn uniqueness_starts(cfg: &ExperimentConfig, space: &AMetricSpace) -> Result<Vec<Point>, CliError> {
    if let Some(starts) = &cfg.solver.starts {
        return Ok(starts.iter().map(PointInput::to_point).collect());
    }
    let mut starts = vec![cfg.x0()?];
    let sampler = Sampler {
        seed: cfg.seed() ^ STARTS_SALT,
        ..cfg.sampler()
    };
    starts.extend(sampler.points(space.carrier(), cfg.solver.n_starts));
    Ok(starts)
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Writes `n, step, bound, ratio, tail_bound` rows with 17 significant digits.
pub fn write_trace_csv(path: &Path, trace: &PicardTrace) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "step", "bound", "ratio", "tail_bound"])?;
    for row in trace.rows() {
        w.write_record([
            row.n.to_string(),
            fmt_float(row.step),
            fmt_opt(row.bound),
            fmt_opt(row.ratio),
            fmt_opt(row.tail_bound),
        ])?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_json(path: &Path, report: &RunReport) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Runs a command and writes its artifacts under `out_dir`.
pub fn run(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let mut report = RunReport::new(command, cfg);
    let trace = match command {
        Command::Axioms => {
            let space = build_space(cfg, false)?;
            report.space = Some(space.label().into());
            run_axioms(cfg, &space, &mut report)?;
            None
        }
        Command::Classify => {
            let space = construct(&mut report, "space", build_space(cfg, true))?;
            if let Some(space) = space {
                report.space = Some(space.label().into());
                if let Some(f) = construct(&mut report, "map", make_map(cfg.map.clone(), &space))? {
                    run_classify(cfg, &space, &f, &mut report)?;
                }
            }
            None
        }
        Command::Solve => solve(cfg, &mut report)?,
        Command::Verify => verify(cfg, &mut report)?,
    };

    let mut written = Vec::new();
    if let Some(trace) = &trace {
        let csv_path = cfg.resolve(out_dir, &cfg.outputs.csv_path);
        write_trace_csv(&csv_path, trace)?;
        written.push(csv_path);
    }
    let json_path = cfg.resolve(out_dir, &cfg.outputs.json_path);
    write_json(&json_path, &report)?;
    written.push(json_path);
    Ok(Outcome { report, written })
}

fn solve(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<Option<PicardTrace>, CliError> {
    let Some(space) = construct(report, "space", build_space(cfg, true))? else {
        return Ok(None);
    };
    report.space = Some(space.label().into());
    let Some(f) = construct(report, "map", make_map(cfg.map.clone(), &space))? else {
        return Ok(None);
    };
    let delta = match cfg.solver.delta {
        Some(d) => d,
        None => {
            let pairs = classification_pairs(cfg, &space, cfg.seed())?;
            let cert = classify(&space, &f, &pairs)?;
            let d = cert.delta_with_margin(cfg.tolerances.safety_margin).unwrap_or(-1.0);
            report.certificate = Some(cert);
            d
        }
    };
    run_solve(cfg, &space, &f, delta, report)
}

fn verify(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<Option<PicardTrace>, CliError> {
    let space = build_space(cfg, false)?;
    report.space = Some(space.label().into());
    if !run_axioms(cfg, &space, report)? {
        return Ok(None);
    }
    let Some(f) = construct(report, "map", make_map(cfg.map.clone(), &space))? else {
        return Ok(None);
    };
    let cert = run_classify(cfg, &space, &f, report)?;
    if report.verdict == Verdict::Fail {
        return Ok(None);
    }
    let delta = match cfg.solver.delta {
        Some(d) => d,
        None => cert
            .delta_with_margin(cfg.tolerances.safety_margin)
            .expect("valid certificate"),
    };
    let Some(trace) = run_solve(cfg, &space, &f, delta, report)? else {
        return Ok(None);
    };
    if report.verdict == Verdict::Fail {
        return Ok(Some(trace));
    }
    let tol = cfg.tolerance();
    report.push_check("decay", verify_decay(&trace, tol)?);
    report.push_check("cauchy", verify_cauchy(&trace, &space, tol)?);
    if let Some(residual) = report.trace.as_ref().and_then(|t| t.residual) {
        let cap = RESIDUAL_FACTOR * cfg.tolerances.eps;
        let mut tally = Tally::default();
        tally.record("residual", residual, cap, tol.scaled(residual, cap), || {
            Witness::Points(report.trace.iter().filter_map(|t| t.limit.clone()).collect())
        });
        report.push_check("solve", tally.into_report("residual", true));
    }
    let starts = uniqueness_starts(cfg, &space)?;
    let rule = cfg.stop_rule()?;
    report.push_check("uniqueness", uniqueness_probe(&space, &f, &starts, delta, &rule, tol)?);
    if space.carrier().is_finite() {
        report.push_check("oracle", oracle_agreement(&space, &f, delta, &rule)?);
    }
    Ok(Some(trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_float(2.0 / 7.0), "2.8571428571428570e-1");
        assert_eq!(fmt_float(0.0), "0.0000000000000000e0");
        let back: f64 = fmt_float(0.1 + 0.2).parse().unwrap();
        assert_eq!(back, 0.1 + 0.2);
    }

    #[test]
    fn exit_codes_for_errors() {
        let usage = CliError::Core(ametric_core::Error::Usage("x".into()));
        assert_eq!(error_exit_code(&usage), 2);
        let esc = CliError::Core(ametric_core::Error::Escaped { index: 1, point: vec![] });
        assert_eq!(error_exit_code(&esc), 1);
    }
}
