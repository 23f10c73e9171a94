//! Experiment configuration files.
//!
//! Configs are TOML documents with the sections below; every key is optional
//! except where a command needs it.
//!
//! ```toml
//! [game]
//! n = 100                      # players
//!
//! [run]
//! T = 100000                   # rounds per simulation
//! reps = 40                    # repetitions per grid point
//! master_seed = 0
//! init = "random"              # or "nash-eq"
//! monitoring = "route-cost"    # or "taken-cost"
//!
//! [params]                     # each: scalar, grid, or { per_agent = [...] }
//! alpha = 0.7
//! beta = 0.0
//! epsilon = 0.01
//!
//! [sweep]
//! kind = "deviant"             # "homogeneous" | "deviant" | "heterogeneous-alpha"
//! parameter = "alpha"
//! population = [0.01, 0.6]
//! deviant = [0.01, 0.5, 0.6]
//! half_widths = [0.0, 0.25, 0.5]
//! tolerance = 0.005
//! stderr_gate = 2.0
//!
//! [metrics]
//! burn_in = 0.0
//! validity_band = 0.25
//!
//! [output]
//! dir = "out"
//! plots = ["timeseries", "sweep", "heatmap", "correlation"]
//! log_period = true
//! advantage_polarity = "raw"   # or "negated"
//! ```

use std::path::{Path, PathBuf};

use braess_core::cycles::{CycleOptions, DEFAULT_VALIDITY_BAND};
use braess_core::learner::ParamError;
use braess_core::metagame::{
    homogeneous_grid, MetaGameSpec, MetaParameter, DEFAULT_EQUILIBRIUM_TOLERANCE,
    DEFAULT_STDERR_GATE,
};
use braess_core::{AgentParams, BaseConfig, GameSpec, InitMode, MonitoringFeedback, SimConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config is empty")]
    Empty,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error: {0}")]
    Syntax(String),
    #[error("invalid value for {key}: {message}")]
    Invalid { key: String, message: String },
    #[error("beta exceeds alpha ([params].alpha = {alpha}, [params].beta = {beta})")]
    BetaAboveAlpha { alpha: f64, beta: f64 },
    #[error("{0} is required for this command")]
    Missing(&'static str),
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    #[serde(default = "default_n")]
    pub n: usize,
}

impl Default for GameSection {
    fn default() -> Self {
        GameSection { n: default_n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "T", alias = "horizon", default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub init: InitMode,
    #[serde(default)]
    pub monitoring: MonitoringFeedback,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            horizon: default_horizon(),
            reps: default_reps(),
            master_seed: 0,
            init: InitMode::default(),
            monitoring: MonitoringFeedback::default(),
        }
    }
}

/// A parameter given as one value, a sweep grid, or one value per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Grid(Vec<f64>),
    PerAgent { per_agent: Vec<f64> },
}

impl ParamValue {
    fn values(&self) -> &[f64] {
        match self {
            ParamValue::Scalar(v) => std::slice::from_ref(v),
            ParamValue::Grid(g) => g,
            ParamValue::PerAgent { per_agent } => per_agent,
        }
    }

    fn scalar(&self) -> Option<f64> {
        match self {
            ParamValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ParamValue>,
    #[serde(default = "default_beta")]
    pub beta: ParamValue,
    #[serde(default = "default_epsilon")]
    pub epsilon: ParamValue,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            alpha: None,
            beta: default_beta(),
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Homogeneous,
    Deviant,
    HeterogeneousAlpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<MetaParameter>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub population: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviant: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub half_widths: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_gate")]
    pub stderr_gate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "default_band")]
    pub validity_band: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            burn_in: 0.0,
            validity_band: DEFAULT_VALIDITY_BAND,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Timeseries,
    Sweep,
    Heatmap,
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Color the advantage exactly as stored.
    #[default]
    Raw,
    /// Flip the sign so that profitable deviations are positive.
    Negated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_plots")]
    pub plots: Vec<PlotKind>,
    #[serde(default = "default_true")]
    pub log_period: bool,
    #[serde(default)]
    pub advantage_polarity: Polarity,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            plots: default_plots(),
            log_period: true,
            advantage_polarity: Polarity::Raw,
        }
    }
}

/// A validated experiment description with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub game: GameSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_n() -> usize {
    100
}
fn default_horizon() -> usize {
    100_000
}
fn default_reps() -> usize {
    40
}
fn default_beta() -> ParamValue {
    ParamValue::Scalar(0.0)
}
fn default_epsilon() -> ParamValue {
    ParamValue::Scalar(0.01)
}
fn default_tolerance() -> f64 {
    DEFAULT_EQUILIBRIUM_TOLERANCE
}
fn default_gate() -> f64 {
    DEFAULT_STDERR_GATE
}
fn default_band() -> f64 {
    DEFAULT_VALIDITY_BAND
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_plots() -> Vec<PlotKind> {
    vec![
        PlotKind::Timeseries,
        PlotKind::Sweep,
        PlotKind::Heatmap,
        PlotKind::Correlation,
    ]
}
fn default_true() -> bool {
    true
}

/// Alpha used by the epsilon meta-game when `[params].alpha` is not given.
pub const EPSILON_GAME_ALPHA: f64 = 0.6;

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text)
}

/// Parses and validates config text.
pub fn parse_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::Empty);
    }
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => {
            let (line, column) = line_col(text, span.start);
            ConfigError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        }
        None => ConfigError::Syntax(e.message().to_string()),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn check_unit(key: &str, values: &[f64]) -> Result<(), ConfigError> {
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(key, format!("{v} is outside [0, 1]")));
        }
    }
    Ok(())
}

fn check_increasing(key: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(invalid(key, "grid is empty"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(key, "grid must be strictly increasing"));
    }
    Ok(())
}

fn check_param(key: &str, value: &ParamValue, n: usize) -> Result<(), ConfigError> {
    check_unit(key, value.values())?;
    match value {
        ParamValue::Scalar(_) => Ok(()),
        ParamValue::Grid(g) => check_increasing(key, g),
        ParamValue::PerAgent { per_agent } if per_agent.len() != n => Err(invalid(
            key,
            format!("per_agent has {} entries for {n} players", per_agent.len()),
        )),
        ParamValue::PerAgent { .. } => Ok(()),
    }
}

impl ExperimentConfig {
    /// Checks ranges, grid ordering and `beta <= alpha`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.game.n;
        if n < 2 {
            return Err(invalid("game.n", "need at least 2 players"));
        }
        if self.run.horizon == 0 {
            return Err(invalid("run.T", "must be at least 1"));
        }
        if self.run.reps == 0 {
            return Err(invalid("run.reps", "must be at least 1"));
        }
        if let Some(alpha) = &self.params.alpha {
            check_param("params.alpha", alpha, n)?;
        }
        check_param("params.beta", &self.params.beta, n)?;
        check_param("params.epsilon", &self.params.epsilon, n)?;
        self.check_beta_alpha()?;

        if !(0.0..1.0).contains(&self.metrics.burn_in) {
            return Err(invalid("metrics.burn_in", "must be in [0, 1)"));
        }
        if !(0.0..0.5).contains(&self.metrics.validity_band) {
            return Err(invalid("metrics.validity_band", "must be in [0, 0.5)"));
        }

        if let Some(sweep) = &self.sweep {
            self.validate_sweep(sweep)?;
        }
        Ok(())
    }

    fn check_beta_alpha(&self) -> Result<(), ConfigError> {
        let Some(alpha) = &self.params.alpha else {
            return Ok(());
        };
        let beta = &self.params.beta;
        match (alpha, beta) {
            (ParamValue::PerAgent { per_agent: a }, ParamValue::PerAgent { per_agent: b }) => {
                for (&alpha, &beta) in a.iter().zip(b) {
                    if beta > alpha {
                        return Err(ConfigError::BetaAboveAlpha { alpha, beta });
                    }
                }
            }
            (ParamValue::Grid(_), _) | (_, ParamValue::Grid(_)) => {
                // Grid pairs with beta > alpha are skipped, but something must remain.
                let lo_beta = beta.values().iter().copied().fold(f64::INFINITY, f64::min);
                let hi_alpha = alpha
                    .values()
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                if lo_beta > hi_alpha {
                    return Err(ConfigError::BetaAboveAlpha {
                        alpha: hi_alpha,
                        beta: lo_beta,
                    });
                }
            }
            _ => {
                let max_beta = beta
                    .values()
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                let min_alpha = alpha.values().iter().copied().fold(f64::INFINITY, f64::min);
                if max_beta > min_alpha {
                    return Err(ConfigError::BetaAboveAlpha {
                        alpha: min_alpha,
                        beta: max_beta,
                    });
                }
            }
        }
        Ok(())
    }

    fn validate_sweep(&self, sweep: &SweepSection) -> Result<(), ConfigError> {
        match sweep.kind {
            SweepKind::Homogeneous => Ok(()),
            SweepKind::Deviant => {
                let parameter = sweep
                    .parameter
                    .ok_or(ConfigError::Missing("sweep.parameter"))?;
                check_increasing("sweep.population", &sweep.population)?;
                check_increasing("sweep.deviant", &sweep.deviant)?;
                check_unit("sweep.population", &sweep.population)?;
                check_unit("sweep.deviant", &sweep.deviant)?;
                let base = self.fixed_params(parameter)?;
                for (key, grid) in [
                    ("sweep.population", &sweep.population),
                    ("sweep.deviant", &sweep.deviant),
                ] {
                    for &v in grid.iter() {
                        parameter.apply(base, v).map_err(|e| param_error(key, e))?;
                    }
                }
                Ok(())
            }
            SweepKind::HeterogeneousAlpha => {
                if matches!(sweep.parameter, Some(p) if p != MetaParameter::Alpha) {
                    return Err(invalid(
                        "sweep.parameter",
                        "heterogeneous sweeps vary alpha",
                    ));
                }
                check_increasing("sweep.half_widths", &sweep.half_widths)?;
                check_increasing("sweep.deviant", &sweep.deviant)?;
                check_unit("sweep.deviant", &sweep.deviant)?;
                if sweep.half_widths.iter().any(|w| !(0.0..=0.5).contains(w)) {
                    return Err(invalid(
                        "sweep.half_widths",
                        "half-widths must lie in [0, 0.5]",
                    ));
                }
                let base = self.fixed_params(MetaParameter::Alpha)?;
                for &v in &sweep.deviant {
                    base.with_alpha(v)
                        .map_err(|e| param_error("sweep.deviant", e))?;
                }
                Ok(())
            }
        }
    }

    pub fn cycle_options(&self) -> CycleOptions {
        CycleOptions {
            burn_in: self.metrics.burn_in,
            validity_band: self.metrics.validity_band,
        }
    }

    pub fn game_spec(&self) -> GameSpec {
        GameSpec::new(self.game.n).expect("validated")
    }

    fn scalar(&self, key: &'static str, value: Option<&ParamValue>) -> Result<f64, ConfigError> {
        let value = value.ok_or(ConfigError::Missing(key))?;
        value
            .scalar()
            .ok_or_else(|| invalid(key, "must be a single value for this command"))
    }

    /// Parameters held fixed in a meta-game over `parameter`. The varied
    /// parameter gets a placeholder that the sweep overwrites.
    pub fn fixed_params(&self, parameter: MetaParameter) -> Result<AgentParams, ConfigError> {
        let p = &self.params;
        let (alpha, beta, epsilon) = match parameter {
            MetaParameter::Alpha => (
                1.0,
                self.scalar("params.beta", Some(&p.beta))?,
                self.scalar("params.epsilon", Some(&p.epsilon))?,
            ),
            MetaParameter::Beta => (self.scalar("params.alpha", p.alpha.as_ref())?, 0.0, {
                self.scalar("params.epsilon", Some(&p.epsilon))?
            }),
            MetaParameter::Epsilon => {
                let alpha = match &p.alpha {
                    None => EPSILON_GAME_ALPHA,
                    Some(_) => self.scalar("params.alpha", p.alpha.as_ref())?,
                };
                (alpha, self.scalar("params.beta", Some(&p.beta))?, 0.0)
            }
        };
        AgentParams::new(alpha, beta, epsilon).map_err(|e| param_error("params", e))
    }

    pub fn base_config(&self, params: AgentParams) -> BaseConfig {
        BaseConfig {
            spec: self.game_spec(),
            horizon: self.run.horizon,
            init: self.run.init,
            master_seed: self.run.master_seed,
            feedback: self.run.monitoring,
            params,
        }
    }

    /// Per-agent parameters for a single run; grids are rejected.
    pub fn agent_params(&self) -> Result<Vec<AgentParams>, ConfigError> {
        let n = self.game.n;
        let expand = |key: &'static str, v: &ParamValue| -> Result<Vec<f64>, ConfigError> {
            match v {
                ParamValue::Scalar(x) => Ok(vec![*x; n]),
                ParamValue::PerAgent { per_agent } => Ok(per_agent.clone()),
                ParamValue::Grid(_) => Err(invalid(key, "grids are only allowed in sweeps")),
            }
        };
        let alpha = expand(
            "params.alpha",
            self.params
                .alpha
                .as_ref()
                .ok_or(ConfigError::Missing("params.alpha"))?,
        )?;
        let beta = expand("params.beta", &self.params.beta)?;
        let epsilon = expand("params.epsilon", &self.params.epsilon)?;
        (0..n)
            .map(|i| {
                AgentParams::new(alpha[i], beta[i], epsilon[i])
                    .map_err(|e| param_error("params", e))
            })
            .collect()
    }

    /// Configuration of a single run at the given seed.
    pub fn sim_config(&self, seed: u64) -> Result<SimConfig, ConfigError> {
        let params = self.agent_params()?;
        Ok(SimConfig {
            spec: self.game_spec(),
            horizon: self.run.horizon,
            params,
            init: self.run.init,
            seed,
            feedback: self.run.monitoring,
            record_agent_costs: false,
        })
    }

    /// Grid points of a homogeneous sweep: the cartesian product of the
    /// `[params]` values, skipping `beta > alpha`.
    pub fn homogeneous_points(&self) -> Result<Vec<AgentParams>, ConfigError> {
        let grid = |key: &'static str, v: &ParamValue| -> Result<Vec<f64>, ConfigError> {
            match v {
                ParamValue::PerAgent { .. } => {
                    Err(invalid(key, "per-agent values cannot be swept"))
                }
                other => Ok(other.values().to_vec()),
            }
        };
        let alpha = grid(
            "params.alpha",
            self.params
                .alpha
                .as_ref()
                .ok_or(ConfigError::Missing("params.alpha"))?,
        )?;
        let beta = grid("params.beta", &self.params.beta)?;
        let epsilon = grid("params.epsilon", &self.params.epsilon)?;
        let points =
            homogeneous_grid(&alpha, &beta, &epsilon).map_err(|e| param_error("params", e))?;
        if points.is_empty() {
            return Err(invalid("params", "no grid point satisfies beta <= alpha"));
        }
        Ok(points)
    }

    /// The meta-game described by `[sweep]` (kind `deviant`).
    pub fn metagame_spec(&self) -> Result<(MetaGameSpec, BaseConfig), ConfigError> {
        let sweep = self.sweep.as_ref().ok_or(ConfigError::Missing("[sweep]"))?;
        let parameter = sweep
            .parameter
            .ok_or(ConfigError::Missing("sweep.parameter"))?;
        let base = self.base_config(self.fixed_params(parameter)?);
        Ok((
            MetaGameSpec {
                parameter,
                population_grid: sweep.population.clone(),
                deviant_grid: sweep.deviant.clone(),
                reps: self.run.reps,
            },
            base,
        ))
    }

    /// Emits the config as TOML; [`parse_str`] reads it back unchanged.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn param_error(key: &str, e: ParamError) -> ConfigError {
    match e {
        ParamError::BetaExceedsAlpha { alpha, beta } => ConfigError::BetaAboveAlpha { alpha, beta },
        other => invalid(key, other.to_string()),
    }
}
