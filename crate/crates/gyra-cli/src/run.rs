//! Per-command orchestration: build core-domain objects from the config,
//! run the analysis, and assemble the result document (plus a CSV table
//! for the tabular commands).

use gyra_core::circuit::{self, CircuitSpec};
use gyra_core::field::{self, Gauge, Grid2D, GridDensity, GridScalarField, GridVectorField};
use gyra_core::gyrator::{LinearGyratorModel, ModelParams};
use gyra_core::linalg::{SkewMatrix, SquareMatrix, SymMatrix};
use gyra_core::simulation::{self, InitialCovariance, SimulationConfig};
use nalgebra::DMatrix;
use serde_json::Value;

use crate::config::{
    CommandName, DesignOmegaDto, InitialCovarianceDto, LoadName, LoadSpec, ModelSection, RunConfig,
    Sigma0Dto,
};
use crate::document::{
    json, object, CsvTable, Estimate, MatrixOut, ResultDocument, Scalar, PROVENANCE_GRID,
};
use crate::error::{config_err, run_err, CliError};

pub struct CommandOutput {
    pub document: ResultDocument,
    pub table: Option<CsvTable>,
}

pub fn run_command(command: CommandName, config: RunConfig) -> Result<CommandOutput, CliError> {
    match command {
        CommandName::Ness => run_ness(config),
        CommandName::OptimalLoad => run_optimal_load(config),
        CommandName::Sweep => run_sweep(config),
        CommandName::Simulate => run_simulate(config),
        CommandName::Transient => run_transient(config),
        CommandName::Circuit => run_circuit(config),
        CommandName::Field => run_field(config),
    }
}

/// Model construction errors are configuration errors: every input came
/// straight from the config file.
fn build_model(section: &ModelSection) -> Result<LinearGyratorModel, CliError> {
    let stiffness = SymMatrix::new(section.stiffness.to_dmatrix()).map_err(config_err)?;
    let params = ModelParams {
        k_b: section.k_b,
        gamma: section.gamma,
    };
    LinearGyratorModel::new(stiffness, section.temperatures.clone(), params).map_err(config_err)
}

fn resolve_load(
    model: &LinearGyratorModel,
    section: &ModelSection,
) -> Result<Option<SkewMatrix>, CliError> {
    match &section.load {
        None => Ok(None),
        Some(LoadSpec::Named(LoadName::Optimal)) => {
            Ok(Some(model.optimal_skew().map_err(run_err)?))
        }
        Some(LoadSpec::Matrix(dto)) => {
            Ok(Some(SkewMatrix::new(dto.to_dmatrix()).map_err(config_err)?))
        }
    }
}

fn model_section(config: &RunConfig) -> &ModelSection {
    config
        .model
        .as_ref()
        .expect("model section presence checked before dispatch")
}

/// `||K_c - 2 Omega* Sigma^-1 - k_B T Sigma^-1||_F`: how exactly the
/// optimal load halves the source force.
fn matching_residual(model: &LinearGyratorModel, omega_star: &SkewMatrix) -> f64 {
    let matched = 2.0 * omega_star.as_matrix() * model.covariance_inverse()
        + model.params().k_b * model.temperature_matrix() * model.covariance_inverse();
    (model.stiffness().as_matrix() - matched).norm()
}

fn run_ness(config: RunConfig) -> Result<CommandOutput, CliError> {
    let model = build_model(model_section(&config))?;
    let report = model.max_power().map_err(run_err)?;
    let residual = matching_residual(&model, &report.omega_star);

    let results = object(vec![
        (
            "sigma_ss",
            json(&MatrixOut::analytic(
                report.sigma_ss.as_matrix(),
                "position^2",
            )),
        ),
        (
            "omega_star",
            json(&MatrixOut::analytic(
                report.omega_star.as_matrix(),
                "energy",
            )),
        ),
        (
            "p_star",
            json(&Scalar::analytic(report.p_star, "energy / time")),
        ),
        (
            "velocity_coefficient",
            json(&MatrixOut::analytic(
                report.velocity_coeff.as_matrix(),
                "1 / time",
            )),
        ),
        ("detailed_balance", Value::Bool(report.detailed_balance)),
        (
            "commutator_norm",
            json(&Scalar::analytic(
                report.commutator_norm,
                "energy * temperature / position^2",
            )),
        ),
    ]);
    let diagnostics = object(vec![(
        "matching_residual",
        json(&Scalar::analytic(residual, "energy / position^2")),
    )]);
    Ok(CommandOutput {
        document: ResultDocument::new(CommandName::Ness, config, results, diagnostics),
        table: None,
    })
}

fn run_optimal_load(config: RunConfig) -> Result<CommandOutput, CliError> {
    let model = build_model(model_section(&config))?;
    let report = model.max_power().map_err(run_err)?;
    let heat_rates = model.heat_rates(&report.omega_star).map_err(run_err)?;
    let residual = matching_residual(&model, &report.omega_star);

    let results = object(vec![
        (
            "omega_star",
            json(&MatrixOut::analytic(
                report.omega_star.as_matrix(),
                "energy",
            )),
        ),
        (
            "p_star",
            json(&Scalar::analytic(report.p_star, "energy / time")),
        ),
        (
            "heat_rates",
            Value::Array(
                heat_rates
                    .iter()
                    .map(|q| json(&Scalar::analytic(*q, "energy / time")))
                    .collect(),
            ),
        ),
        (
            "velocity_coefficient",
            json(&MatrixOut::analytic(
                report.velocity_coeff.as_matrix(),
                "1 / time",
            )),
        ),
        ("detailed_balance", Value::Bool(report.detailed_balance)),
    ]);
    let first_law_gap = (heat_rates.iter().sum::<f64>() - report.p_star).abs();
    let diagnostics = object(vec![
        (
            "matching_residual",
            json(&Scalar::analytic(residual, "energy / position^2")),
        ),
        (
            "first_law_gap",
            json(&Scalar::analytic(first_law_gap, "energy / time")),
        ),
    ]);
    Ok(CommandOutput {
        document: ResultDocument::new(CommandName::OptimalLoad, config, results, diagnostics),
        table: None,
    })
}

fn run_sweep(config: RunConfig) -> Result<CommandOutput, CliError> {
    let model = build_model(model_section(&config))?;
    let sweep = config.sweep.clone().unwrap_or_default();
    let alphas: Vec<f64> = match (&sweep.alphas, sweep.n_points) {
        (Some(list), _) => list.clone(),
        (None, n) => {
            let n = n.unwrap_or(101);
            (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
        }
    };
    let report = model.max_power().map_err(run_err)?;
    let points = model.load_sweep(&alphas).map_err(run_err)?;

    let rows: Vec<Vec<f64>> = points.iter().map(|(a, p)| vec![*a, *p]).collect();
    let results = object(vec![
        (
            "p_star",
            json(&Scalar::analytic(report.p_star, "energy / time")),
        ),
        (
            "sweep",
            object(vec![
                ("columns", json(&vec!["alpha", "power"])),
                ("units", json(&vec!["dimensionless", "energy / time"])),
                ("provenance", json(&"analytic")),
                ("rows", json(&rows)),
            ]),
        ),
    ]);
    let diagnostics = object(vec![(
        "n_points",
        Value::Number(serde_json::Number::from(rows.len())),
    )]);

    let table = CsvTable {
        comment: "alpha: dimensionless (analytic); power: energy / time (analytic)".to_string(),
        columns: vec!["alpha".to_string(), "power".to_string()],
        rows,
    };
    Ok(CommandOutput {
        document: ResultDocument::new(CommandName::Sweep, config, results, diagnostics),
        table: Some(table),
    })
}

fn run_simulate(config: RunConfig) -> Result<CommandOutput, CliError> {
    let section = model_section(&config);
    let base = build_model(section)?;
    let load = resolve_load(&base, section)?;
    let model = match &load {
        Some(skew) => base.clone().with_load(skew.clone()).map_err(config_err)?,
        None => base.clone(),
    };

    let sim = config
        .simulation
        .as_ref()
        .expect("simulation section presence checked before dispatch");
    let initial = match &sim.initial_covariance {
        InitialCovarianceDto::Named(_) => InitialCovariance::Stationary,
        InitialCovarianceDto::Matrix(dto) => {
            InitialCovariance::Fixed(SymMatrix::new(dto.to_dmatrix()).map_err(config_err)?)
        }
    };
    let sim_config = SimulationConfig {
        dt: sim.dt,
        n_steps: sim.n_steps,
        burn_in: sim.burn_in,
        n_trajectories: sim.n_trajectories,
        seed: sim.seed,
        initial_covariance: initial,
    };
    let stats = simulation::run_ensemble(&model, &sim_config).map_err(run_err)?;
    eprintln!("wall_time_seconds: {}", stats.wall_time);

    let analytic_power = match &load {
        Some(skew) => model.power_of_load(skew).map_err(run_err)?,
        None => 0.0,
    };

    let results = object(vec![
        (
            "empirical_covariance",
            json(&MatrixOut::monte_carlo(
                stats.empirical_covariance.as_matrix(),
                "position^2",
            )),
        ),
        (
            "covariance_std_error",
            json(&MatrixOut::monte_carlo(
                stats.covariance_std_error.as_matrix(),
                "position^2",
            )),
        ),
        (
            "power_stratonovich",
            json(&Estimate::monte_carlo(
                stats.power_stratonovich,
                "energy / time",
            )),
        ),
        (
            "power_ito",
            json(&Estimate::monte_carlo(stats.power_ito, "energy / time")),
        ),
        (
            "power_gap",
            json(&Estimate::monte_carlo(stats.power_gap, "energy / time")),
        ),
        (
            "heat_rates",
            Value::Array(
                stats
                    .heat_rates
                    .iter()
                    .map(|q| json(&Estimate::monte_carlo(*q, "energy / time")))
                    .collect(),
            ),
        ),
        (
            "samples",
            Value::Number(serde_json::Number::from(stats.samples)),
        ),
    ]);
    let diagnostics = object(vec![
        (
            "first_law_residual",
            json(&Scalar::analytic(stats.first_law_residual, "energy / time")),
        ),
        (
            "analytic_power",
            json(&Scalar::analytic(analytic_power, "energy / time")),
        ),
        (
            "analytic_sigma_ss",
            json(&MatrixOut::analytic(
                model.steady_state_covariance().as_matrix(),
                "position^2",
            )),
        ),
    ]);
    Ok(CommandOutput {
        document: ResultDocument::new(CommandName::Simulate, config, results, diagnostics),
        table: None,
    })
}

fn run_transient(config: RunConfig) -> Result<CommandOutput, CliError> {
    let model = build_model(model_section(&config))?;
    let tr = config
        .transient
        .as_ref()
        .expect("transient section presence checked before dispatch");
    let sigma0 = match &tr.sigma0 {
        Sigma0Dto::Named(_) => {
            SymMatrix::new(DMatrix::identity(model.dim(), model.dim())).expect("identity")
        }
        Sigma0Dto::Matrix(dto) => SymMatrix::new(dto.to_dmatrix()).map_err(config_err)?,
    };
    let series =
        simulation::transient_covariance(&model, &sigma0, tr.t_end, tr.dt).map_err(run_err)?;

    let kept: Vec<&(f64, SymMatrix)> = series
        .iter()
        .enumerate()
        .filter(|(k, _)| k % tr.store_every == 0 || *k == series.len() - 1)
        .map(|(_, entry)| entry)
        .collect();

    let sigma_ss = model.steady_state_covariance().as_matrix();
    let final_distance = (series.last().expect("nonempty series").1.as_matrix() - sigma_ss).norm();
    let min_eigenvalue = kept
        .iter()
        .map(|(_, s)| {
            s.as_matrix()
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);

    let entries: Vec<Value> = kept
        .iter()
        .map(|(t, sigma)| {
            object(vec![
                ("t", json(t)),
                (
                    "sigma",
                    json(&MatrixOut::analytic(sigma.as_matrix(), "position^2")),
                ),
            ])
        })
        .collect();

    let results = object(vec![
        ("series", Value::Array(entries)),
        (
            "sigma_ss",
            json(&MatrixOut::analytic(sigma_ss, "position^2")),
        ),
    ]);
    let diagnostics = object(vec![
        (
            "final_distance",
            json(&Scalar::analytic(final_distance, "position^2")),
        ),
        (
            "min_eigenvalue",
            json(&Scalar::analytic(min_eigenvalue, "position^2")),
        ),
        ("positive_definite", Value::Bool(min_eigenvalue > 0.0)),
    ]);

    let n = model.dim();
    let mut columns = vec!["t".to_string()];
    for i in 0..n {
        for j in 0..n {
            columns.push(format!("sigma_{i}_{j}"));
        }
    }
    let rows: Vec<Vec<f64>> = kept
        .iter()
        .map(|(t, sigma)| {
            let mut row = vec![*t];
            for i in 0..n {
                for j in 0..n {
                    row.push(sigma.as_matrix()[(i, j)]);
                }
            }
            row
        })
        .collect();
    let table = CsvTable {
        comment: "t: time (analytic); sigma_i_j: position^2 (analytic)".to_string(),
        columns,
        rows,
    };
    Ok(CommandOutput {
        document: ResultDocument::new(CommandName::Transient, config, results, diagnostics),
        table: Some(table),
    })
}

fn run_circuit(config: RunConfig) -> Result<CommandOutput, CliError> {
    let section = config
        .circuit
        .as_ref()
        .expect("circuit section presence checked before dispatch");
    let c_nr = match &section.c_nr {
        Some(dto) => SquareMatrix::new(dto.to_dmatrix()).map_err(config_err)?,
        None => SquareMatrix::zeros(2),
    };
    let spec = CircuitSpec::new(
        section.c1, section.c2, section.cc, section.r, section.t1, section.t2, c_nr,
    )
    .map_err(config_err)?;

    let capacitance = spec.capacitance().map_err(config_err)?;
    let voltages = circuit::force_decomposition(&spec).map_err(run_err)?;
    let sigma = circuit::circuit_steady_state(&spec, section.k_b).map_err(run_err)?;
    let power = circuit::circuit_power(&spec, section.k_b).map_err(run_err)?;
    let mapped = circuit::circuit_to_langevin(&spec, section.k_b).map_err(run_err)?;

    let mut result_entries = vec![
        (
            "capacitance",
            json(&MatrixOut::analytic(
                capacitance.as_matrix(),
                "charge^2 / energy",
            )),
        ),
        (
            "sigma_ss",
            json(&MatrixOut::analytic(sigma.as_matrix(), "charge^2")),
        ),
        ("power", json(&Scalar::analytic(power, "energy / time"))),
        (
            "source_coefficient",
            json(&MatrixOut::analytic(
                voltages.source_coeff.as_matrix(),
                "energy / charge^2",
            )),
        ),
        (
            "load_coefficient",
            json(&MatrixOut::analytic(
                voltages.load_coeff.as_matrix(),
                "energy / charge^2",
            )),
        ),
        (
            "mapped_stiffness",
            json(&MatrixOut::analytic(
                mapped.stiffness().as_matrix(),
                "energy / charge^2",
            )),
        ),
    ];
    if let Some(load) = mapped.load() {
        result_entries.push((
            "mapped_load",
            json(&MatrixOut::analytic(load.as_matrix(), "energy")),
        ));
    }

    let mut diagnostic_entries = Vec::new();
    if let Some(target_dto) = &section.design_omega {
        let reciprocal = CircuitSpec::new(
            section.c1,
            section.c2,
            section.cc,
            section.r,
            section.t1,
            section.t2,
            SquareMatrix::zeros(2),
        )
        .map_err(config_err)?;
        let target = match target_dto {
            DesignOmegaDto::Rate(rate) => {
                SkewMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, *rate, -*rate, 0.0]))
                    .expect("skew by construction")
            }
            DesignOmegaDto::Named(LoadName::Optimal) => {
                let base =
                    circuit::circuit_to_langevin(&reciprocal, section.k_b).map_err(run_err)?;
                base.optimal_skew().map_err(run_err)?
            }
        };
        let params = ModelParams {
            k_b: section.k_b,
            gamma: section.r,
        };
        let designed = circuit::design_cnr(
            &capacitance,
            section.r,
            &spec.temperatures(),
            &target,
            &params,
        )
        .map_err(run_err)?;
        let realized = circuit::circuit_to_langevin(&designed, section.k_b).map_err(run_err)?;
        let realized_load = realized
            .load()
            .map(|l| l.as_matrix().clone())
            .unwrap_or_else(|| DMatrix::zeros(2, 2));
        let residual = (&realized_load - target.as_matrix()).norm();
        let designed_power = circuit::circuit_power(&designed, section.k_b).map_err(run_err)?;
        result_entries.push((
            "design",
            object(vec![
                (
                    "omega_target",
                    json(&MatrixOut::analytic(target.as_matrix(), "energy")),
                ),
                (
                    "c_nr",
                    json(&MatrixOut::analytic(
                        designed.c_nr.as_matrix(),
                        "charge^2 / energy",
                    )),
                ),
                (
                    "power",
                    json(&Scalar::analytic(designed_power, "energy / time")),
                ),
            ]),
        ));
        diagnostic_entries.push((
            "design_residual",
            json(&Scalar::analytic(residual, "energy")),
        ));
    }

    let results = object(result_entries);
    let diagnostics = object(diagnostic_entries);
    Ok(CommandOutput {
        document: ResultDocument::new(CommandName::Circuit, config, results, diagnostics),
        table: None,
    })
}

fn run_field(config: RunConfig) -> Result<CommandOutput, CliError> {
    let model = build_model(model_section(&config))?;
    let section = config
        .grid
        .as_ref()
        .expect("grid section presence checked before dispatch");
    let grid = Grid2D::new(
        section.x_min,
        section.x_max,
        section.y_min,
        section.y_max,
        section.nx,
        section.ny,
    )
    .map_err(config_err)?;
    if model.dim() != 2 {
        return Err(CliError::Range {
            problems: vec![format!(
                "model.stiffness.n: the field command needs a 2-D model, got {}",
                model.dim()
            )],
        });
    }
    let temps = [model.temperatures()[0], model.temperatures()[1]];
    let params = *model.params();

    let rho =
        field::gaussian_density(&grid, model.steady_state_covariance()).map_err(config_err)?;
    let u_c = field::solve_confining_potential(&rho, temps, &params).map_err(run_err)?;
    let f_s = field::source_force_field(&rho, &u_c, temps, &params).map_err(run_err)?;
    let f_l = field::optimal_load_field(&f_s);
    let p_direct = field::power_quadrature(&f_l, &f_s, &rho, &params).map_err(run_err)?;
    let v = GridVectorField::new(
        grid.clone(),
        f_l.fx().iter().map(|x| x / params.gamma).collect(),
        f_l.fy().iter().map(|x| x / params.gamma).collect(),
    )
    .map_err(run_err)?;
    let p_heat = field::power_heat_decomposition(&v, &rho, temps, &params).map_err(run_err)?;
    let residual = field::divergence_residual(&f_s, &rho).map_err(run_err)?;
    let p_star = model.max_power().map_err(run_err)?.p_star;

    let mut result_entries = vec![
        (
            "power_direct",
            json(&Scalar::grid(p_direct, "energy / time")),
        ),
        (
            "power_heat_split",
            json(&Scalar::grid(p_heat, "energy / time")),
        ),
        (
            "p_star_analytic",
            json(&Scalar::analytic(p_star, "energy / time")),
        ),
        (
            "divergence_residual",
            json(&Scalar::grid(residual, "energy / position^3")),
        ),
        ("gauge", Value::String(gauge_label(u_c.gauge()).to_string())),
        (
            "sigma_ss",
            json(&MatrixOut::analytic(
                model.steady_state_covariance().as_matrix(),
                "position^2",
            )),
        ),
    ];
    if section.emit_tables {
        result_entries.push(("tables", inline_tables(&grid, &rho, &u_c, &f_s, &f_l)));
    }

    let relative_gap = (p_direct - p_heat).abs() / p_direct.abs().max(f64::MIN_POSITIVE);
    let diagnostics = object(vec![
        (
            "power_formula_gap",
            json(&Scalar::grid(relative_gap, "dimensionless")),
        ),
        (
            "density_renormalization",
            json(&Scalar::grid(rho.renormalization(), "dimensionless")),
        ),
    ]);

    let table = node_table(&grid, &rho, &u_c, &f_s, &f_l);
    let results = object(result_entries);
    Ok(CommandOutput {
        document: ResultDocument::new(CommandName::Field, config, results, diagnostics),
        table: Some(table),
    })
}

fn gauge_label(gauge: Gauge) -> &'static str {
    match gauge {
        Gauge::RhoWeightedZeroMean => "rho-weighted zero mean",
        Gauge::Ungauged => "ungauged",
    }
}

fn node_rows(
    grid: &Grid2D,
    rho: &GridDensity,
    u_c: &GridScalarField,
    f_s: &GridVectorField,
    f_l: &GridVectorField,
) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(grid.n_nodes());
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let k = grid.index(i, j);
            rows.push(vec![
                grid.node_x(i),
                grid.node_y(j),
                rho.values()[k],
                u_c.values()[k],
                f_s.fx()[k],
                f_s.fy()[k],
                f_l.fx()[k],
                f_l.fy()[k],
            ]);
        }
    }
    rows
}

const NODE_COLUMNS: [&str; 8] = ["x", "y", "rho", "u_c", "f_s_x", "f_s_y", "f_l_x", "f_l_y"];

fn node_table(
    grid: &Grid2D,
    rho: &GridDensity,
    u_c: &GridScalarField,
    f_s: &GridVectorField,
    f_l: &GridVectorField,
) -> CsvTable {
    CsvTable {
        comment: "x, y: position; rho: probability / position^2; u_c: energy; \
                  f_*: energy / position (grid)"
            .to_string(),
        columns: NODE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: node_rows(grid, rho, u_c, f_s, f_l),
    }
}

fn inline_tables(
    grid: &Grid2D,
    rho: &GridDensity,
    u_c: &GridScalarField,
    f_s: &GridVectorField,
    f_l: &GridVectorField,
) -> Value {
    object(vec![
        ("columns", json(&NODE_COLUMNS.to_vec())),
        ("provenance", Value::String(PROVENANCE_GRID.to_string())),
        ("rows", json(&node_rows(grid, rho, u_c, f_s, f_l))),
    ])
}
