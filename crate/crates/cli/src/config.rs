//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use ametric_core::prelude::*;
use ametric_core::sampling::DEFAULT_SAMPLE_RADIUS;
use ametric_core::solver::DEFAULT_MAX_ITER;
use ametric_core::space::DEFAULT_EQ_TOL;
use ametric_core::zamfirescu::DEFAULT_SAFETY_MARGIN;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SpaceConfig {
    /// Sum of pairwise l1 distances on a box (or all of `R^d` without `box`).
    Absdiff {
        t: usize,
        #[serde(default = "one")]
        d: usize,
        #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
        bounds: Option<BoxBounds>,
    },
    /// A metric table on `{0..n-1}` lifted by summing over pairs.
    Lifted { t: usize, table: Vec<Vec<f64>> },
}

impl SpaceConfig {
    pub fn t(&self) -> usize {
        match self {
            SpaceConfig::Absdiff { t, .. } | SpaceConfig::Lifted { t, .. } => *t,
        }
    }
}

fn default_n() -> usize {
    1000
}

fn default_n_starts() -> usize {
    8
}

fn default_radius() -> f64 {
    DEFAULT_SAMPLE_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Required; there is no ambient randomness.
    pub seed: Option<u64>,
    #[serde(default = "default_n")]
    pub n_pairs: usize,
    #[serde(default = "default_n")]
    pub n_triples: usize,
    /// Tuples (plus pivot) for the axiom check.
    #[serde(default = "default_n")]
    pub n_tuples: usize,
    /// Sampling window half-width on unbounded axes.
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_check_tol() -> f64 {
    ametric_core::check::DEFAULT_CHECK_TOL
}

fn default_eps() -> f64 {
    1e-12
}

fn default_eq_tol() -> f64 {
    DEFAULT_EQ_TOL
}

fn default_margin() -> f64 {
    DEFAULT_SAFETY_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_check_tol")]
    pub check_tol: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub bound_eps: Option<f64>,
    #[serde(default = "default_eq_tol")]
    pub eq_tol: f64,
    /// Relative inflation of certified constants before computing envelopes.
    #[serde(default = "default_margin")]
    pub safety_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            check_tol: default_check_tol(),
            eps: default_eps(),
            bound_eps: None,
            eq_tol: default_eq_tol(),
            safety_margin: default_margin(),
        }
    }
}

/// A point given either as a bare number or as a coordinate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointInput {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PointInput {
    pub fn to_point(&self) -> Point {
        match self {
            PointInput::Scalar(x) => Point::scalar(*x),
            PointInput::Vector(v) => Point::new(v.clone()),
        }
    }
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub x0: Option<PointInput>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Skip classification and use this contraction factor.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Explicit starting points for the uniqueness probe.
    #[serde(default)]
    pub starts: Option<Vec<PointInput>>,
    /// Random starts added to `x0` when `starts` is absent.
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            x0: None,
            max_iter: default_max_iter(),
            delta: None,
            starts: None,
            n_starts: default_n_starts(),
        }
    }
}

fn default_csv() -> String {
    "trace.csv".into()
}

fn default_json() -> String {
    "report.json".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_csv")]
    pub csv_path: String,
    #[serde(default = "default_json")]
    pub json_path: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            csv_path: default_csv(),
            json_path: default_json(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub map: MapSpec,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: Outputs,
    /// Source file and text, kept to anchor late validation errors.
    #[serde(skip)]
    origin: Option<(PathBuf, String)>,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
        .unwrap_or(1)
}

impl ExperimentConfig {
    /// Parses and validates a config. `seed_override` replaces `sampling.seed`.
    pub fn parse(path: &Path, text: &str, seed_override: Option<u64>) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            line: e.line().max(1),
            message: e.to_string(),
        })?;
        if let Some(seed) = seed_override {
            cfg.sampling.seed = Some(seed);
        }
        cfg.origin = Some((path.to_path_buf(), text.to_string()));
        cfg.validate().map_err(|(key, message)| CliError::Config {
            path: path.to_path_buf(),
            line: line_of(text, key),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(path, &text, seed_override)
    }

    /// Returns the offending key and a message on failure.
    fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.sampling.seed.is_none() {
            return Err(("sampling", "missing field `seed` in sampling".into()));
        }
        if self.space.t() < 2 {
            return Err(("t", format!("t must be at least 2, got {}", self.space.t())));
        }
        let finite = |key: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err((key, format!("{key} must be finite")))
            }
        };
        if let SpaceConfig::Absdiff { bounds: Some(b), .. } = &self.space {
            for v in b.lo.iter().chain(&b.hi) {
                finite("box", *v)?;
            }
        }
        if let SpaceConfig::Lifted { table, .. } = &self.space {
            for v in table.iter().flatten() {
                finite("table", *v)?;
            }
        }
        let tol = &self.tolerances;
        finite("check_tol", tol.check_tol)?;
        finite("eps", tol.eps)?;
        finite("eq_tol", tol.eq_tol)?;
        finite("safety_margin", tol.safety_margin)?;
        if let Some(b) = tol.bound_eps {
            finite("bound_eps", b)?;
        }
        if !(tol.eps > 0.0) {
            return Err(("eps", "eps must be positive".into()));
        }
        if tol.check_tol < 0.0 || tol.eq_tol < 0.0 || tol.safety_margin < 0.0 {
            return Err(("tolerances", "tolerances must be nonnegative".into()));
        }
        if !(self.sampling.radius > 0.0 && self.sampling.radius.is_finite()) {
            return Err(("radius", "radius must be positive and finite".into()));
        }
        if self.sampling.n_pairs == 0 || self.sampling.n_triples == 0 || self.sampling.n_tuples == 0 {
            return Err(("sampling", "sample counts must be positive".into()));
        }
        if self.solver.max_iter == 0 {
            return Err(("max_iter", "max_iter must be at least 1".into()));
        }
        if let Some(d) = self.solver.delta {
            if !(0.0..1.0).contains(&d) {
                return Err(("delta", format!("delta must lie in [0, 1), got {d}")));
            }
        }
        let points = self.solver.x0.iter().chain(self.solver.starts.iter().flatten());
        for p in points {
            for v in p.to_point().coords() {
                finite("x0", *v)?;
            }
        }
        Ok(())
    }

    /// A config error anchored at the first line mentioning `key`.
    pub fn error_at(&self, key: &str, message: impl Into<String>) -> CliError {
        let (path, line) = match &self.origin {
            Some((p, text)) => (p.clone(), line_of(text, key)),
            None => (PathBuf::from("<config>"), 1),
        };
        CliError::Config {
            path,
            line,
            message: message.into(),
        }
    }

    /// `solver.x0`, required by the solving commands.
    pub fn x0(&self) -> Result<Point, CliError> {
        self.solver
            .x0
            .as_ref()
            .map(PointInput::to_point)
            .ok_or_else(|| self.error_at("solver", "solver.x0 is required by this command"))
    }

    pub fn seed(&self) -> u64 {
        self.sampling.seed.expect("validated config has a seed")
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.tolerances.check_tol)
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(self.seed()).with_radius(self.sampling.radius)
    }

    pub fn stop_rule(&self) -> Result<StopRule, CliError> {
        let rule = StopRule::new(self.tolerances.eps, self.solver.max_iter)?;
        Ok(match self.tolerances.bound_eps {
            Some(b) => rule.with_bound_eps(b)?,
            None => rule,
        })
    }

    pub fn resolve(&self, out_dir: &Path, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            out_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(Path::new("cfg.json"), text, None)
    }

    const MINIMAL: &str = r#"{
  "space": {"kind": "absdiff", "t": 3},
  "map": {"kind": "two_sevenths"},
  "sampling": {"seed": 7}
}"#;

    #[test]
    fn defaults_are_materialized() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.sampling.n_pairs, 1000);
        assert_eq!(cfg.tolerances.eps, 1e-12);
        assert_eq!(cfg.solver.max_iter, DEFAULT_MAX_ITER);
        assert_eq!(cfg.outputs.json_path, "report.json");
        let round = serde_json::to_string(&cfg).unwrap();
        assert!(round.contains("\"check_tol\""));
    }

    #[test]
    fn missing_seed_is_line_anchored() {
        let text = MINIMAL.replace("\"seed\": 7", "\"n_pairs\": 10");
        match parse(&text).unwrap_err() {
            CliError::Config { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("seed"));
            }
            e => panic!("unexpected {e:?}"),
        }
        let cfg = ExperimentConfig::parse(Path::new("c"), &text, Some(5)).unwrap();
        assert_eq!(cfg.seed(), 5);
    }

    #[test]
    fn syntax_errors_carry_line() {
        let text = "{\n  \"space\": {\"kind\": \"absdiff\", \"t\": 3},\n  \"map\": oops\n}";
        match parse(text).unwrap_err() {
            CliError::Config { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        assert!(parse(&MINIMAL.replace("\"t\": 3", "\"t\": 1")).is_err());
        let with_delta = MINIMAL.replace("\"seed\": 7", "\"seed\": 7}, \"solver\": {\"delta\": 1.5");
        assert!(parse(&with_delta).is_err());
        assert!(parse(&MINIMAL.replace("\"two_sevenths\"", "\"nope\"")).is_err());
    }

    #[test]
    fn point_inputs() {
        let p: PointInput = serde_json::from_str("2.5").unwrap();
        assert_eq!(p.to_point(), Point::scalar(2.5));
        let p: PointInput = serde_json::from_str("[1, 2]").unwrap();
        assert_eq!(p.to_point(), Point::new(vec![1.0, 2.0]));
    }
}
