//! Job configuration: strict JSON parsing, validation and default resolution.

use std::fmt;
use std::path::{Path, PathBuf};

use mvsde::critical::ConstructionOptions;
use mvsde::model::{Model, ModelSpec, Regime};
use mvsde::particle::InitialLaw;
use mvsde::selfconsistency::RootOptions;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Audit,
    Roots,
    PhaseDiagram,
    Critical,
    CriticalCurve,
    SigmaR,
    MultiwellCheck,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::Roots => "roots",
            Command::PhaseDiagram => "phase-diagram",
            Command::Critical => "critical",
            Command::CriticalCurve => "critical-curve",
            Command::SigmaR => "sigma-r",
            Command::MultiwellCheck => "multiwell-check",
            Command::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// A grid given either as `{start, stop, count}` (inclusive, linear) or as
/// an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range(Range),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    fn resolve(&self, field: &str) -> Result<Vec<f64>, ConfigError> {
        let values = match self {
            Grid::List(v) => v.clone(),
            Grid::Range(r) => {
                if r.count < 2 {
                    return Err(ConfigError::field(field, "count must be at least 2"));
                }
                (0..r.count)
                    .map(|i| r.start + (r.stop - r.start) * i as f64 / (r.count - 1) as f64)
                    .collect()
            }
        };
        if values.is_empty() {
            return Err(ConfigError::field(field, "grid is empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ConfigError::field(field, "values must be finite and positive"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::field(field, "values must be strictly increasing"));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub sigma: f64,
    #[serde(default = "defaults::n")]
    pub n: usize,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::horizon")]
    pub t_burn: f64,
    #[serde(default = "defaults::horizon")]
    pub t_sample: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default = "defaults::init")]
    pub init: InitialLaw,
    /// Every `trace_stride`-th step of the mean trace is written.
    #[serde(default = "defaults::stride")]
    pub trace_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Construct {
    pub x1: f64,
    pub x2: f64,
    #[serde(default)]
    pub options: ConstructionOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Multiwell {
    /// Build a scaled multi-well drift from the model before checking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construct: Option<Construct>,
    /// Coupling used for the checks; `θ* + theta_margin` when absent and a
    /// margin is given, otherwise the model's own `θ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_margin: Option<f64>,
    #[serde(default = "defaults::c2fg_resolution")]
    pub c2fg_resolution: usize,
}

mod defaults {
    use mvsde::particle::InitialLaw;

    pub fn n() -> usize {
        20_000
    }
    pub fn dt() -> f64 {
        1e-3
    }
    pub fn horizon() -> f64 {
        25.0
    }
    pub fn init() -> InitialLaw {
        InitialLaw::PointMass { x0: 1.0 }
    }
    pub fn stride() -> usize {
        100
    }
    pub fn c2fg_resolution() -> usize {
        2000
    }
    pub fn bracket() -> [f64; 2] {
        [0.1, 1.0]
    }
}

/// Configuration file as written by the user.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    /// Inline model object or a path (relative to the config file).
    model: Value,
    #[serde(default)]
    command: Option<Command>,
    #[serde(default)]
    output: Option<String>,
    #[serde(default)]
    format: Option<Format>,
    #[serde(default)]
    regime: Option<Regime>,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    sigma_grid: Option<Grid>,
    #[serde(default)]
    theta_grid: Option<Grid>,
    #[serde(default)]
    bracket: Option<[f64; 2]>,
    #[serde(default)]
    root_scan: Option<RootOptions>,
    #[serde(default)]
    simulation: Option<Simulation>,
    #[serde(default)]
    multiwell: Option<Multiwell>,
}

/// Fully resolved job; serialized verbatim into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct JobConfig {
    pub command: Command,
    pub model: ModelSpec,
    pub output: String,
    pub format: Format,
    pub regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    pub bracket: [f64; 2],
    pub root_scan: RootOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Simulation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiwell: Option<Multiwell>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse(String),
    Field { field: String, message: String },
}

impl ConfigError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "parse error: {m}"),
            ConfigError::Field { field, message } => write!(f, "invalid field \"{field}\": {message}"),
        }
    }
}

/// Overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<String>,
    pub format: Option<Format>,
    pub sigma: Option<f64>,
}

pub fn load(path: &Path, command: Command, overrides: &Overrides) -> Result<JobConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&text, &base, command, overrides)
}

fn require<T: Clone>(value: &Option<T>, field: &str, command: Command) -> Result<T, ConfigError> {
    value
        .clone()
        .ok_or_else(|| ConfigError::field(field, format!("required by command {}", command.name())))
}

fn positive(value: f64, field: &str) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::field(field, format!("must be finite and positive, got {value}")))
    }
}

/// Parse and validate a configuration; `base` resolves relative model paths.
pub fn parse(text: &str, base: &Path, command: Command, overrides: &Overrides) -> Result<JobConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if let Some(c) = raw.command {
        if c != command {
            return Err(ConfigError::field(
                "command",
                format!("config names {} but {} was requested", c.name(), command.name()),
            ));
        }
    }

    let model_value = match &raw.model {
        Value::String(p) => {
            let file: PathBuf = base.join(p);
            let text = std::fs::read_to_string(&file)
                .map_err(|e| ConfigError::field("model", format!("cannot read {}: {e}", file.display())))?;
            serde_json::from_str(&text).map_err(|e| ConfigError::field("model", e.to_string()))?
        }
        v => v.clone(),
    };
    let model: ModelSpec = serde_json::from_value(model_value).map_err(|e| ConfigError::field("model", e.to_string()))?;
    Model::new(model.clone()).map_err(|e| ConfigError::field("model", e.to_string()))?;

    let sigma = overrides.sigma.or(raw.sigma);
    if let Some(s) = sigma {
        positive(s, "sigma")?;
    }
    let sigma_grid = raw.sigma_grid.as_ref().map(|g| g.resolve("sigma_grid")).transpose()?;
    let theta_grid = raw.theta_grid.as_ref().map(|g| g.resolve("theta_grid")).transpose()?;
    let bracket = raw.bracket.unwrap_or_else(defaults::bracket);
    positive(bracket[0], "bracket")?;
    positive(bracket[1], "bracket")?;
    let root_scan = raw.root_scan.unwrap_or_default();
    if root_scan.grid_points < 3 {
        return Err(ConfigError::field("root_scan", "grid_points must be at least 3"));
    }
    positive(root_scan.f_tol, "root_scan")?;
    positive(root_scan.dedup, "root_scan")?;

    if let Some(sim) = &raw.simulation {
        positive(sim.sigma, "simulation.sigma")?;
        positive(sim.dt, "simulation.dt")?;
        positive(sim.t_burn, "simulation.t_burn")?;
        positive(sim.t_sample, "simulation.t_sample")?;
        if sim.n == 0 {
            return Err(ConfigError::field("simulation.n", "must be positive"));
        }
        if sim.trace_stride == 0 {
            return Err(ConfigError::field("simulation.trace_stride", "must be positive"));
        }
    }
    if let Some(mw) = &raw.multiwell {
        if mw.theta.is_some() && mw.theta_margin.is_some() {
            return Err(ConfigError::field("multiwell.theta", "give either theta or theta_margin, not both"));
        }
        if let Some(t) = mw.theta {
            positive(t, "multiwell.theta")?;
        }
        if let Some(t) = mw.theta_margin {
            positive(t, "multiwell.theta_margin")?;
        }
    }

    match command {
        Command::Roots => {
            require(&sigma, "sigma", command)?;
        }
        Command::PhaseDiagram | Command::MultiwellCheck => {
            require(&sigma_grid, "sigma_grid", command)?;
        }
        Command::CriticalCurve => {
            require(&theta_grid, "theta_grid", command)?;
        }
        Command::Simulate => {
            require(&raw.simulation, "simulation", command)?;
        }
        Command::Audit | Command::Critical | Command::SigmaR => {}
    }

    Ok(JobConfig {
        command,
        model,
        output: overrides
            .output
            .clone()
            .or(raw.output)
            .unwrap_or_else(|| format!("mvsde-{}", command.name())),
        format: overrides.format.or(raw.format).unwrap_or(Format::Both),
        regime: raw.regime.unwrap_or(Regime::Generic),
        sigma,
        sigma_grid,
        theta_grid,
        bracket,
        root_scan,
        simulation: raw.simulation,
        multiwell: raw.multiwell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BISTABLE: &str = r#""model": {"v_prime": {"poly": [0, -1, 0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 2}"#;

    fn parse_str(body: &str, command: Command) -> Result<JobConfig, ConfigError> {
        parse(&format!("{{{BISTABLE}{body}}}"), Path::new("."), command, &Overrides::default())
    }

    #[test]
    fn minimal_config_materializes_defaults() {
        let cfg = parse_str("", Command::Critical).unwrap();
        assert_eq!(cfg.root_scan, RootOptions::default());
        assert_eq!(cfg.bracket, [0.1, 1.0]);
        assert_eq!(cfg.format, Format::Both);
        assert_eq!(cfg.output, "mvsde-critical");
        let echoed = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echoed["root_scan"]["grid_points"], 401);
    }

    #[test]
    fn range_grid_resolves_inclusive() {
        let cfg = parse_str(r#", "sigma_grid": {"start": 0.5, "stop": 1.5, "count": 3}"#, Command::PhaseDiagram).unwrap();
        assert_eq!(cfg.sigma_grid.unwrap(), vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn negative_sigma_in_grid_names_field() {
        let e = parse_str(r#", "sigma_grid": [-0.1, 0.5]"#, Command::PhaseDiagram).unwrap_err();
        assert!(matches!(&e, ConfigError::Field { field, .. } if field == "sigma_grid"), "{e}");
    }

    #[test]
    fn decreasing_grid_rejected() {
        let e = parse_str(r#", "theta_grid": [2, 1]"#, Command::CriticalCurve).unwrap_err();
        assert!(e.to_string().contains("theta_grid"));
    }

    #[test]
    fn unknown_field_rejected() {
        let e = parse_str(r#", "sigma_gird": [0.5]"#, Command::PhaseDiagram).unwrap_err();
        assert!(e.to_string().contains("sigma_gird"), "{e}");
        let e = parse(
            r#"{"model": {"v_prime": {"poly": [0, 1], "coef": 1}, "p_prime": {"poly": [0, 1]}, "theta": 1}}"#,
            Path::new("."),
            Command::Audit,
            &Overrides::default(),
        )
        .unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");
    }

    #[test]
    fn missing_command_parameter_named() {
        let e = parse_str("", Command::Roots).unwrap_err();
        assert_eq!(e, ConfigError::field("sigma", "required by command roots"));
        let cfg = parse(
            &format!("{{{BISTABLE}}}"),
            Path::new("."),
            Command::Roots,
            &Overrides {
                sigma: Some(0.4),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.sigma, Some(0.4));
    }

    #[test]
    fn command_mismatch_rejected() {
        let e = parse_str(r#", "command": "audit""#, Command::Critical).unwrap_err();
        assert!(e.to_string().contains("command"));
    }

    #[test]
    fn invalid_model_is_config_error() {
        let e = parse(
            r#"{"model": {"v_prime": {"poly": [0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 0}}"#,
            Path::new("."),
            Command::Audit,
            &Overrides::default(),
        )
        .unwrap_err();
        assert!(e.to_string().contains("model"));
    }

    #[test]
    fn malformed_json_reports_position() {
        let e = parse("{\"model\": ", Path::new("."), Command::Audit, &Overrides::default()).unwrap_err();
        assert!(matches!(&e, ConfigError::Parse(m) if m.contains("line")), "{e}");
    }
}
