//! Experiment configuration: TOML schema, defaults and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classical::{classical_stable_dt, PotentialSpec};
use crate::estimation::{Estimator, LocationModel};
use crate::fields::{
    gaussian_density, Constants, EnsembleState, Grid1D, PhaseField, StencilOrder,
};
use crate::microscope::{MicroscopeSetup, ResolutionConvention};
use crate::quantum::{madelung_stable_dt, Eta};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Estimate,
    EvolveClassical,
    EvolveQuantum,
    Compare,
    Microscope,
    UncertaintyReport,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Estimate => "estimate",
            Experiment::EvolveClassical => "evolve-classical",
            Experiment::EvolveQuantum => "evolve-quantum",
            Experiment::Compare => "compare",
            Experiment::Microscope => "microscope",
            Experiment::UncertaintyReport => "uncertainty-report",
        }
    }

    fn evolves(self) -> bool {
        !matches!(self, Experiment::Estimate | Experiment::Microscope)
    }

    fn quantum(self) -> bool {
        matches!(
            self,
            Experiment::EvolveQuantum | Experiment::Compare | Experiment::UncertaintyReport
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "GridConfig::default_length")]
    pub length: f64,
    #[serde(default = "GridConfig::default_points")]
    pub points: usize,
    #[serde(default = "GridConfig::default_stencil")]
    pub stencil_order: u32,
}

impl GridConfig {
    fn default_length() -> f64 {
        40.0
    }
    fn default_points() -> usize {
        2048
    }
    fn default_stencil() -> u32 {
        4
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            length: Self::default_length(),
            points: Self::default_points(),
            stencil_order: Self::default_stencil(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhaseSpec {
    #[default]
    Zero,
    /// `S = p0 q`; `p0` must be a multiple of `h/L`.
    Linear { p0: f64 },
    /// `S = alpha q²/2`.
    Quadratic { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub phase: PhaseSpec,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            center: 0.0,
            width: 1.0,
            phase: PhaseSpec::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumConfig {
    #[serde(default)]
    pub eta: Eta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Step size; the largest stable step when omitted.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    /// Final time; mutually exclusive with `steps`. Defaults to 2 when
    /// neither is given.
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default = "TimeConfig::default_record_every")]
    pub record_every: usize,
}

impl TimeConfig {
    fn default_record_every() -> usize {
        10
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: None,
            steps: None,
            t_final: None,
            record_every: Self::default_record_every(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Gaussian {
        #[serde(default = "one")]
        sigma: f64,
    },
    /// The `[initial]` Gaussian sampled on the `[grid]`.
    Sampled,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Gaussian { sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "EstimationConfig::default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "EstimationConfig::default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "EstimationConfig::default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub location: f64,
}

impl EstimationConfig {
    fn default_estimators() -> Vec<Estimator> {
        vec![Estimator::Mean, Estimator::Median, Estimator::Ml]
    }
    fn default_sample_size() -> usize {
        100
    }
    fn default_trials() -> usize {
        10_000
    }
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            estimators: Self::default_estimators(),
            sample_size: Self::default_sample_size(),
            trials: Self::default_trials(),
            location: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroscopeConfig {
    #[serde(default = "MicroscopeConfig::default_wavelength")]
    pub wavelength: f64,
    #[serde(default = "MicroscopeConfig::default_focal_length")]
    pub focal_length: f64,
    #[serde(default = "one")]
    pub diameter: f64,
    #[serde(default)]
    pub convention: ResolutionConvention,
}

impl MicroscopeConfig {
    fn default_wavelength() -> f64 {
        2.0
    }
    fn default_focal_length() -> f64 {
        10.0
    }
}

impl Default for MicroscopeConfig {
    fn default() -> Self {
        Self {
            wavelength: Self::default_wavelength(),
            focal_length: Self::default_focal_length(),
            diameter: 1.0,
            convention: ResolutionConvention::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Not echoed into reports, so identical runs written to different
    /// directories stay byte-identical.
    #[serde(default = "OutputConfig::default_dir", skip_serializing)]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub emit_plots: bool,
}

impl OutputConfig {
    fn default_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: Self::default_dir(),
            format: OutputFormat::Both,
            emit_plots: false,
        }
    }
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub quantum: QuantumConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub microscope: MicroscopeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parses and validates configuration text, reporting every violated constraint.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| CliError::Config(vec![e.message().to_string()]))?;
    config.validate()?;
    Ok(config)
}

/// [`parse_config`] for a subcommand: a missing `experiment` key is filled in,
/// a conflicting one is an error.
pub fn parse_config_for(text: &str, experiment: Experiment) -> Result<ExperimentConfig, CliError> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| CliError::Config(vec![e.message().to_string()]))?;
    match table.get("experiment").and_then(|v| v.as_str()) {
        None if !table.contains_key("experiment") => {
            table.insert("experiment".into(), experiment.name().into());
        }
        Some(name) if name == experiment.name() => {}
        _ => {
            return Err(CliError::Config(vec![format!(
                "experiment = {} conflicts with subcommand `{}`",
                table["experiment"],
                experiment.name()
            )]))
        }
    }
    let config: ExperimentConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(vec![e.message().to_string()]))?;
    config.validate()?;
    Ok(config)
}

/// Time stepping resolved against the stability bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePlan {
    pub dt: f64,
    pub steps: usize,
}

pub const DEFAULT_DT_FRACTION: f64 = 0.5;

impl ExperimentConfig {
    /// Minimal configuration for `experiment` with every default applied.
    pub fn with_defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            grid: GridConfig::default(),
            constants: ConstantsConfig::default(),
            initial: InitialConfig::default(),
            quantum: QuantumConfig::default(),
            time: TimeConfig::default(),
            potential: PotentialSpec::Zero,
            estimation: EstimationConfig::default(),
            microscope: MicroscopeConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        let stencil = StencilOrder::from_order(self.grid.stencil_order)
            .map_err(|e| CliError::Config(vec![format!("grid.stencil_order: {e}")]))?;
        Grid1D::new(self.grid.length, self.grid.points)
            .map(|g| g.with_stencil(stencil))
            .map_err(|e| CliError::Config(vec![format!("grid: {e}")]))
    }

    pub fn constants(&self) -> Constants {
        Constants {
            hbar: self.constants.hbar,
        }
    }

    /// Gaussian density with the configured phase.
    pub fn initial_state(&self) -> Result<EnsembleState, CliError> {
        let grid = self.grid()?;
        let c = &self.initial;
        let density = gaussian_density(&grid, c.center, c.width)
            .map_err(|e| CliError::Config(vec![format!("initial.width: {e}")]))?;
        let phase = match c.phase {
            PhaseSpec::Zero => Ok(PhaseField::zero(grid)),
            PhaseSpec::Linear { p0 } => PhaseField::linear(grid, p0),
            PhaseSpec::Quadratic { alpha } => PhaseField::quadratic(grid, alpha),
        }
        .map_err(|e| CliError::Config(vec![format!("initial.phase: {e}")]))?;
        EnsembleState::new(density, phase, self.constants.mass, self.constants())
            .map_err(|e| CliError::Config(vec![format!("initial state: {e}")]))
    }

    pub fn location_model(&self) -> Result<LocationModel, CliError> {
        let model = match self.estimation.model {
            ModelConfig::Gaussian { sigma } => LocationModel::gaussian(sigma),
            ModelConfig::Sampled => {
                let state = self.initial_state()?;
                LocationModel::sampled(state.density().clone())
            }
        };
        model.map_err(|e| CliError::Config(vec![format!("estimation.model: {e}")]))
    }

    pub fn microscope_setup(&self) -> Result<MicroscopeSetup, CliError> {
        let m = &self.microscope;
        MicroscopeSetup::new(
            m.wavelength,
            m.diameter,
            m.focal_length,
            m.convention,
            self.constants().h(),
        )
        .map_err(|e| CliError::Config(vec![format!("microscope: {e}")]))
    }

    /// Largest stable step for the initial state of this experiment.
    pub fn stable_dt(&self) -> Result<f64, CliError> {
        let state = self.initial_state()?;
        let bound = match self.experiment {
            Experiment::EvolveClassical => classical_stable_dt(&state),
            _ => madelung_stable_dt(&state, self.quantum.eta),
        };
        bound.map_err(|e| CliError::Config(vec![format!("initial state: {e}")]))
    }

    /// Resolves `dt` and the step count. A requested final time is hit
    /// exactly by shrinking `dt` to `t_final / ceil(t_final / dt)`.
    /// Without an explicit `dt`, [`DEFAULT_DT_FRACTION`] of the initial bound
    /// is used, since the bound tightens as packets spread or accelerate.
    pub fn time_plan(&self) -> Result<TimePlan, CliError> {
        let bound = self.stable_dt()?;
        let t = &self.time;
        let dt = match t.dt {
            Some(dt) if dt > bound * (1.0 + 1e-12) => {
                return Err(CliError::Config(vec![format!(
                    "time.dt = {dt:e} exceeds the stability bound {bound:e} for the initial state"
                )]))
            }
            Some(dt) => dt,
            None if bound.is_finite() => DEFAULT_DT_FRACTION * bound,
            None => {
                return Err(CliError::Config(vec![
                    "time.dt is required: the initial state imposes no stability bound".into(),
                ]))
            }
        };
        Ok(match t.steps {
            Some(steps) => TimePlan { dt, steps },
            None => {
                let t_final = t.t_final.unwrap_or(2.0);
                let steps = ((t_final / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                TimePlan {
                    dt: t_final / steps as f64,
                    steps,
                }
            }
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive and finite, got {v}"));
            }
        };
        positive("constants.hbar", self.constants.hbar);
        positive("constants.mass", self.constants.mass);

        if self.experiment.evolves() || self.estimation.model == ModelConfig::Sampled {
            self.validate_state(&mut problems);
        }
        if self.experiment.evolves() {
            self.validate_time(&mut problems);
        }
        if self.experiment.quantum() && self.potential != PotentialSpec::Zero {
            problems.push(format!(
                "potential: quantum experiments are free-particle only, got {:?}",
                self.potential
            ));
        }
        if self.experiment == Experiment::Estimate {
            self.validate_estimation(&mut problems);
        }
        if self.experiment == Experiment::Microscope {
            let m = &self.microscope;
            for (name, v) in [
                ("microscope.wavelength", m.wavelength),
                ("microscope.focal_length", m.focal_length),
                ("microscope.diameter", m.diameter),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    problems.push(format!("{name} must be positive and finite, got {v}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems))
        }
    }

    fn validate_state(&self, problems: &mut Vec<String>) {
        let g = &self.grid;
        if !(g.length.is_finite() && g.length > 0.0) {
            problems.push(format!("grid.length must be positive and finite, got {}", g.length));
        }
        if !g.points.is_multiple_of(2) || g.points < 8 {
            problems.push(format!("grid.points must be even and at least 8, got {}", g.points));
        }
        if StencilOrder::from_order(g.stencil_order).is_err() {
            problems.push(format!("grid.stencil_order must be 2 or 4, got {}", g.stencil_order));
        }
        let resolvable = problems.is_empty();
        let dq = g.length / g.points as f64;
        let s = self.initial.width;
        if !(s.is_finite() && s > 0.0) {
            problems.push(format!("initial.width must be positive and finite, got {s}"));
        } else if resolvable && s < 4.0 * dq {
            problems.push(format!(
                "initial.width = {s} is under-resolved: a Gaussian needs width >= 4 dq = {}",
                4.0 * dq
            ));
        }
        if !self.initial.center.is_finite() {
            problems.push("initial.center must be finite".into());
        }
        match self.initial.phase {
            PhaseSpec::Linear { p0 } => {
                let unit = self.constants().h() / g.length;
                let k = p0 / unit;
                if !p0.is_finite() || (k - k.round()).abs() > 1e-9 {
                    problems.push(format!(
                        "initial.phase.p0 = {p0} must be a multiple of h/L = {unit} on the periodic grid"
                    ));
                }
            }
            PhaseSpec::Quadratic { alpha } if !alpha.is_finite() => {
                problems.push("initial.phase.alpha must be finite".into());
            }
            _ => {}
        }
        if let PotentialSpec::Sampled { values } = &self.potential {
            if values.len() != g.points {
                problems.push(format!(
                    "potential.values has {} entries, grid.points is {}",
                    values.len(),
                    g.points
                ));
            }
        }
        if let PotentialSpec::Harmonic { spring } = self.potential {
            if !spring.is_finite() {
                problems.push("potential.spring must be finite".into());
            }
        }
        if problems.is_empty() {
            if let Err(e) = self.initial_state() {
                problems.extend(e.problems());
            }
        }
    }

    fn validate_time(&self, problems: &mut Vec<String>) {
        let t = &self.time;
        if let Some(dt) = t.dt {
            if !(dt.is_finite() && dt > 0.0) {
                problems.push(format!("time.dt must be positive and finite, got {dt}"));
            }
        }
        if t.steps.is_some() && t.t_final.is_some() {
            problems.push("time.steps and time.t_final are mutually exclusive".into());
        }
        if t.steps == Some(0) {
            problems.push("time.steps must be at least 1".into());
        }
        if let Some(tf) = t.t_final {
            if !(tf.is_finite() && tf > 0.0) {
                problems.push(format!("time.t_final must be positive and finite, got {tf}"));
            }
        }
        if t.record_every == 0 {
            problems.push("time.record_every must be at least 1".into());
        }
        if problems.is_empty() {
            if let Err(e) = self.time_plan() {
                problems.extend(e.problems());
            }
        }
    }

    fn validate_estimation(&self, problems: &mut Vec<String>) {
        let e = &self.estimation;
        if let ModelConfig::Gaussian { sigma } = e.model {
            if !(sigma.is_finite() && sigma > 0.0) {
                problems.push(format!("estimation.model.sigma must be positive and finite, got {sigma}"));
            }
        }
        if e.estimators.is_empty() {
            problems.push("estimation.estimators must not be empty".into());
        }
        if e.sample_size < 2 {
            problems.push(format!("estimation.sample_size must be at least 2, got {}", e.sample_size));
        }
        if e.trials < 100 {
            problems.push(format!("estimation.trials must be at least 100, got {}", e.trials));
        }
        if !e.location.is_finite() {
            problems.push("estimation.location must be finite".into());
        }
    }
}
