//! JSON run configuration: schema types, strict parsing, and range
//! validation with aggregated field paths.

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Matrix payload: row-major entries with an explicit dimension header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDto {
    pub n: usize,
    pub data: Vec<f64>,
}

impl MatrixDto {
    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn from_dmatrix(m: &nalgebra::DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(m[(i, j)]);
            }
        }
        Self { n, data }
    }

    fn check(&self, path: &str, problems: &mut Vec<String>) {
        if self.n == 0 {
            problems.push(format!("{path}.n: must be at least 1"));
        }
        if self.data.len() != self.n * self.n {
            problems.push(format!(
                "{path}.data: expected {} entries for n = {}, got {}",
                self.n * self.n,
                self.n,
                self.data.len()
            ));
        }
        for (k, value) in self.data.iter().enumerate() {
            if !value.is_finite() {
                problems.push(format!("{path}.data[{k}]: must be finite, got {value}"));
            }
        }
    }
}

/// The analysis the tool runs; mirrors the CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Ness,
    OptimalLoad,
    Sweep,
    Simulate,
    Transient,
    Circuit,
    Field,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Ness => "ness",
            CommandName::OptimalLoad => "optimal-load",
            CommandName::Sweep => "sweep",
            CommandName::Simulate => "simulate",
            CommandName::Transient => "transient",
            CommandName::Circuit => "circuit",
            CommandName::Field => "field",
        }
    }
}

/// Skew load selector: a literal matrix or the computed optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LoadSpec {
    Named(LoadName),
    Matrix(MatrixDto),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadName {
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Confining stiffness, symmetric positive-definite.
    pub stiffness: MatrixDto,
    /// Per-coordinate bath temperatures.
    pub temperatures: Vec<f64>,
    /// Boltzmann constant; natural units by default.
    #[serde(default = "one")]
    pub k_b: f64,
    /// Friction coefficient; natural units by default.
    #[serde(default = "one")]
    pub gamma: f64,
    /// Skew load applied by `simulate`; absent means unloaded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit load fractions; mutually exclusive with `n_points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Number of uniform points on [0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
}

/// Initial ensemble distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCovarianceDto {
    Named(InitialName),
    Matrix(MatrixDto),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialName {
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub dt: f64,
    pub n_steps: u64,
    #[serde(default)]
    pub burn_in: u64,
    #[serde(default = "one_usize")]
    pub n_trajectories: usize,
    pub seed: u64,
    #[serde(default = "stationary")]
    pub initial_covariance: InitialCovarianceDto,
}

fn one_usize() -> usize {
    1
}

fn stationary() -> InitialCovarianceDto {
    InitialCovarianceDto::Named(InitialName::Stationary)
}

/// Initial covariance selector for the transient integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma0Dto {
    Named(Sigma0Name),
    Matrix(MatrixDto),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sigma0Name {
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientSection {
    #[serde(default = "identity")]
    pub sigma0: Sigma0Dto,
    pub t_end: f64,
    pub dt: f64,
    /// Keep every k-th stored matrix in the output series.
    #[serde(default = "one_usize")]
    pub store_every: usize,
}

fn identity() -> Sigma0Dto {
    Sigma0Dto::Named(Sigma0Name::Identity)
}

/// Design target for the non-reciprocal capacitance: a circulation rate or
/// the computed optimum of the mapped model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignOmegaDto {
    Named(LoadName),
    Rate(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub c1: f64,
    pub c2: f64,
    pub cc: f64,
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    /// Boltzmann constant for the charge dynamics.
    #[serde(default = "one")]
    pub k_b: f64,
    /// Non-reciprocal two-port capacitance; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_nr: Option<MatrixDto>,
    /// When present, design a non-reciprocal network realizing this load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_omega: Option<DesignOmegaDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Include the node tables in the result (CSV side files or inline).
    #[serde(default)]
    pub emit_tables: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

/// One fully described run. Sections irrelevant to the command may be
/// present (a single file can serve several commands); unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient: Option<TransientSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

/// Strict parse: unknown keys and type mismatches are reported with their
/// JSON path.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let deserializer = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig =
        serde_path_to_error::deserialize(deserializer).map_err(|e| CliError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    validate(&config)?;
    Ok(config)
}

fn positive(value: f64, path: &str, problems: &mut Vec<String>) {
    if !(value > 0.0) || !value.is_finite() {
        problems.push(format!("{path}: must be positive and finite, got {value}"));
    }
}

fn finite(value: f64, path: &str, problems: &mut Vec<String>) {
    if !value.is_finite() {
        problems.push(format!("{path}: must be finite, got {value}"));
    }
}

/// Range validation. Collects every offending field before failing so a
/// bad config is diagnosed in one pass.
fn validate(config: &RunConfig) -> Result<(), CliError> {
    let mut problems = Vec::new();

    if let Some(model) = &config.model {
        model.stiffness.check("model.stiffness", &mut problems);
        if model.temperatures.is_empty() {
            problems.push("model.temperatures: must not be empty".into());
        }
        if model.stiffness.n != model.temperatures.len() {
            problems.push(format!(
                "model.temperatures: expected {} entries to match stiffness, got {}",
                model.stiffness.n,
                model.temperatures.len()
            ));
        }
        for (i, t) in model.temperatures.iter().enumerate() {
            positive(*t, &format!("model.temperatures[{i}]"), &mut problems);
        }
        positive(model.k_b, "model.k_b", &mut problems);
        positive(model.gamma, "model.gamma", &mut problems);
        if let Some(LoadSpec::Matrix(m)) = &model.load {
            m.check("model.load", &mut problems);
            if m.n != model.stiffness.n {
                problems.push(format!(
                    "model.load.n: expected {} to match stiffness, got {}",
                    model.stiffness.n, m.n
                ));
            }
        }
    }

    if let Some(sweep) = &config.sweep {
        if sweep.alphas.is_some() && sweep.n_points.is_some() {
            problems.push("sweep: alphas and n_points are mutually exclusive".into());
        }
        if let Some(alphas) = &sweep.alphas {
            if alphas.is_empty() {
                problems.push("sweep.alphas: must not be empty".into());
            }
            for (i, a) in alphas.iter().enumerate() {
                finite(*a, &format!("sweep.alphas[{i}]"), &mut problems);
            }
        }
        if let Some(n) = sweep.n_points {
            if n < 2 {
                problems.push(format!("sweep.n_points: must be at least 2, got {n}"));
            }
        }
    }

    if let Some(sim) = &config.simulation {
        positive(sim.dt, "simulation.dt", &mut problems);
        if sim.n_steps == 0 {
            problems.push("simulation.n_steps: must be at least 1".into());
        }
        if sim.burn_in >= sim.n_steps {
            problems.push(format!(
                "simulation.burn_in: must be smaller than n_steps ({}), got {}",
                sim.n_steps, sim.burn_in
            ));
        }
        if sim.n_trajectories == 0 {
            problems.push("simulation.n_trajectories: must be at least 1".into());
        }
        if let InitialCovarianceDto::Matrix(m) = &sim.initial_covariance {
            m.check("simulation.initial_covariance", &mut problems);
        }
    }

    if let Some(tr) = &config.transient {
        positive(tr.dt, "transient.dt", &mut problems);
        if !(tr.t_end >= 0.0) || !tr.t_end.is_finite() {
            problems.push(format!(
                "transient.t_end: must be nonnegative and finite, got {}",
                tr.t_end
            ));
        }
        if tr.store_every == 0 {
            problems.push("transient.store_every: must be at least 1".into());
        }
        if let Sigma0Dto::Matrix(m) = &tr.sigma0 {
            m.check("transient.sigma0", &mut problems);
        }
    }

    if let Some(circuit) = &config.circuit {
        positive(circuit.c1, "circuit.c1", &mut problems);
        positive(circuit.c2, "circuit.c2", &mut problems);
        if !(circuit.cc >= 0.0) || !circuit.cc.is_finite() {
            problems.push(format!(
                "circuit.cc: must be nonnegative and finite, got {}",
                circuit.cc
            ));
        }
        positive(circuit.r, "circuit.r", &mut problems);
        positive(circuit.t1, "circuit.t1", &mut problems);
        positive(circuit.t2, "circuit.t2", &mut problems);
        positive(circuit.k_b, "circuit.k_b", &mut problems);
        if let Some(m) = &circuit.c_nr {
            m.check("circuit.c_nr", &mut problems);
            if m.n != 2 {
                problems.push(format!("circuit.c_nr.n: must be 2, got {}", m.n));
            }
        }
        if let Some(DesignOmegaDto::Rate(rate)) = &circuit.design_omega {
            finite(*rate, "circuit.design_omega", &mut problems);
        }
    }

    if let Some(grid) = &config.grid {
        for (value, path) in [
            (grid.x_min, "grid.x_min"),
            (grid.x_max, "grid.x_max"),
            (grid.y_min, "grid.y_min"),
            (grid.y_max, "grid.y_max"),
        ] {
            finite(value, path, &mut problems);
        }
        if grid.x_max <= grid.x_min {
            problems.push("grid.x_max: must exceed grid.x_min".into());
        }
        if grid.y_max <= grid.y_min {
            problems.push("grid.y_max: must exceed grid.y_min".into());
        }
        let min_points = gyra_core::field::MIN_POINTS;
        if grid.nx < min_points {
            problems.push(format!(
                "grid.nx: must be at least {min_points}, got {}",
                grid.nx
            ));
        }
        if grid.ny < min_points {
            problems.push(format!(
                "grid.ny: must be at least {min_points}, got {}",
                grid.ny
            ));
        }
    }

    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Range { problems })
    }
}

/// Sections the command reads; anything else present is tolerated so one
/// file can serve several commands.
pub fn require_sections(config: &RunConfig, command: CommandName) -> Result<(), CliError> {
    let mut missing = Vec::new();
    let needs_model = matches!(
        command,
        CommandName::Ness
            | CommandName::OptimalLoad
            | CommandName::Sweep
            | CommandName::Simulate
            | CommandName::Transient
            | CommandName::Field
    );
    if needs_model && config.model.is_none() {
        missing.push("model");
    }
    if command == CommandName::Simulate && config.simulation.is_none() {
        missing.push("simulation");
    }
    if command == CommandName::Transient && config.transient.is_none() {
        missing.push("transient");
    }
    if command == CommandName::Circuit && config.circuit.is_none() {
        missing.push("circuit");
    }
    if command == CommandName::Field && config.grid.is_none() {
        missing.push("grid");
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Range {
            problems: missing
                .into_iter()
                .map(|s| format!("{s}: section required by the {} command", command.as_str()))
                .collect(),
        })
    }
}
