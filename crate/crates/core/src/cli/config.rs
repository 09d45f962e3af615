use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{ModelSpec, Violation};
use crate::payoff::Payoff;
use crate::sde_process::StepControl;
use crate::solvers::{GridParams, Mollifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SimulateCtrw,
    SimulateLimit,
    SolveForward,
    SolveBackward,
    VerifyCoefficients,
    LawCheck,
    Converge,
    Compare,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::SimulateCtrw => "simulate-ctrw",
            Task::SimulateLimit => "simulate-limit",
            Task::SolveForward => "solve-forward",
            Task::SolveBackward => "solve-backward",
            Task::VerifyCoefficients => "verify-coefficients",
            Task::LawCheck => "law-check",
            Task::Converge => "converge",
            Task::Compare => "compare",
        }
    }
}

/// One experiment: everything a task needs, read from a single TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub model: ModelSpec,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub payoff: Payoff,
    /// Defaults to a triangle of half-width 8·grid.dt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollifier: Option<Mollifier>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub n_paths: usize,
    /// Operational-time step of the limit driver.
    pub dr: f64,
    /// Lévy-walk small-jump cutoff.
    pub cutoff: f64,
    pub max_steps: usize,
    pub x0: Vec<f64>,
    /// Start time s.
    pub t0: f64,
    /// Target time t for law-check and converge.
    pub horizon: f64,
    /// Observation times for the simulate tasks; empty means [horizon].
    pub times: Vec<f64>,
    /// Scale n of the pre-limit walk in simulate-ctrw.
    pub n: f64,
    /// Scales for verify-coefficients and converge.
    pub scales: Vec<f64>,
    /// (x..., t) points for verify-coefficients; empty means [(x0, t0)].
    pub points: Vec<Vec<f64>>,
    pub ks_threshold: f64,
    pub z_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let control = StepControl::default();
        Self {
            seed: 0,
            n_paths: 1000,
            dr: control.dr,
            cutoff: control.cutoff,
            max_steps: control.max_steps,
            x0: vec![0.0],
            t0: 0.0,
            horizon: 1.0,
            times: Vec::new(),
            n: 1000.0,
            scales: vec![100.0, 1000.0, 10000.0],
            points: Vec::new(),
            ks_threshold: 0.03,
            z_threshold: 3.0,
        }
    }
}

impl RunConfig {
    pub fn control(&self) -> StepControl {
        StepControl { dr: self.dr, cutoff: self.cutoff, max_steps: self.max_steps }
    }

    pub fn sample_times(&self) -> Vec<f64> {
        if self.times.is_empty() {
            vec![self.horizon]
        } else {
            self.times.clone()
        }
    }

    pub fn verify_points(&self) -> Vec<(Vec<f64>, f64)> {
        if self.points.is_empty() {
            return vec![(self.x0.clone(), self.t0)];
        }
        self.points.iter().map(|p| (p[..p.len() - 1].to_vec(), p[p.len() - 1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Any of "csv" and "json"; the manifest is always written.
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec!["csv".into(), "json".into()] }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, Violation> {
        toml::from_str(text).map_err(|e| Violation::new(error_field(&e), e.message().trim().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|v| Error::Config(v.to_string()))
    }

    pub fn mollifier(&self) -> Mollifier {
        self.mollifier.unwrap_or_else(|| Mollifier::for_step(self.grid.dt))
    }

    /// Every violated invariant, each named by its dotted config path.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = self.model.validate("model");
        let dim = self.model.dimension();
        out.extend(self.grid.validate("grid"));
        self.payoff.validate("payoff", dim, &mut out);
        self.mollifier().validate("mollifier", &mut out);

        let run = &self.run;
        let mut bad = |field: &str, msg: String| out.push(Violation::new(format!("run.{field}"), msg));
        if run.n_paths == 0 {
            bad("n_paths", "must be positive".into());
        }
        if !(run.dr > 0.0 && run.dr.is_finite()) {
            bad("dr", "must be positive".into());
        }
        if !(run.cutoff > 0.0 && run.cutoff.is_finite()) {
            bad("cutoff", "must be positive".into());
        }
        if run.max_steps == 0 {
            bad("max_steps", "must be positive".into());
        }
        if run.x0.len() != dim || run.x0.iter().any(|v| !v.is_finite()) {
            bad("x0", format!("needs {dim} finite coordinates"));
        }
        if !run.t0.is_finite() {
            bad("t0", "must be finite".into());
        }
        if !(run.horizon.is_finite() && run.horizon > run.t0) {
            bad("horizon", format!("must be finite and exceed t0 = {}", run.t0));
        }
        let times = run.sample_times();
        if times.iter().any(|t| !t.is_finite() || *t <= run.t0) || times.windows(2).any(|w| w[1] <= w[0]) {
            bad("times", "must be strictly increasing and exceed t0".into());
        }
        if !(run.n >= 1.0 && run.n.is_finite()) {
            bad("n", "must be at least 1".into());
        }
        if run.scales.is_empty() || run.scales.iter().any(|n| !(*n >= 1.0)) || run.scales.windows(2).any(|w| w[1] <= w[0]) {
            bad("scales", "must be nonempty, strictly increasing and at least 1".into());
        }
        for (i, p) in run.points.iter().enumerate() {
            if p.len() != dim + 1 || p.iter().any(|v| !v.is_finite()) {
                bad(&format!("points[{i}]"), format!("needs {} finite entries (x..., t)", dim + 1));
            }
        }
        if !(run.ks_threshold > 0.0 && run.ks_threshold <= 1.0) {
            bad("ks_threshold", "must lie in (0, 1]".into());
        }
        if !(run.z_threshold > 0.0) {
            bad("z_threshold", "must be positive".into());
        }
        for (i, f) in self.output.formats.iter().enumerate() {
            if f != "csv" && f != "json" {
                out.push(Violation::new(format!("output.formats[{i}]"), format!("unknown format {f:?}; use csv or json")));
            }
        }
        out
    }
}

/// Best-effort dotted key path for a TOML error, read from the offending key in its message.
fn error_field(e: &toml::de::Error) -> String {
    let msg = e.message();
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nkind = \"subdiffusion\"\nbeta = 0.5\n";

    #[test]
    fn defaults_validate_cleanly() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        assert_eq!(cfg.run.sample_times(), vec![1.0]);
        assert_eq!(cfg.mollifier(), Mollifier::for_step(1e-3));
    }

    #[test]
    fn out_of_range_order_names_the_field() {
        let cfg = ExperimentConfig::from_toml("[model]\nkind = \"subdiffusion\"\nbeta = 1.5\n").unwrap();
        assert!(cfg.validate().iter().any(|v| v.field == "model.beta"));
    }

    #[test]
    fn nonpositive_step_names_the_field() {
        let cfg = ExperimentConfig::from_toml(&format!("{MINIMAL}[grid]\nL = 10.0\ndx = 0.0\ndt = 0.001\ns = 0.0\nT = 1.0\n")).unwrap();
        assert!(cfg.validate().iter().any(|v| v.field == "grid.dx"));
    }

    #[test]
    fn variable_order_range_must_avoid_one() {
        let text = "[model]\nkind = \"variable-order\"\n[model.beta_fn]\nkind = \"tanh\"\nmid = 0.6\namplitude = 0.4\nscale = 1.0\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let v = cfg.validate();
        assert!(v.iter().any(|v| v.field == "model.beta_fn" && v.message.contains("1 - epsilon")), "{v:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml(&format!("{MINIMAL}[run]\nseeds = 3\n")).unwrap_err();
        assert_eq!(err.field, "seeds");
        let err = ExperimentConfig::from_toml("[model]\nkind = \"subdiffusion\"\nbeta = 0.5\ngamma = 1\n").unwrap_err();
        assert_eq!(err.field, "gamma");
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }
}
