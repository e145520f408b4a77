//! Statistical validation of the sampler against two kinds of ground truth:
//! the analytic stationary results of the continuous model, and an exact
//! oracle for the discretized chain itself.
//!
//! The Euler-Maruyama update `x' = G x + xi` with `G = I - dt M` and
//! `xi ~ N(0, D)` has a Gaussian stationary law whose covariance solves the
//! discrete Lyapunov equation `G S G' + D = S`, solvable exactly by a small
//! Kronecker system. Every ensemble estimator is a quadratic form in
//! `(x, dx)`, so its exact expectation under that law follows from Wick
//! contractions. Comparing Monte Carlo output against this oracle separates
//! sampler bugs (any size) from discretization bias (which the oracle
//! reproduces and which must shrink with dt).
//!
//! Seeds are pinned, so every run of this suite is bit-identical and the
//! 3-4 sigma assertions are deterministic once they pass.

use gyra_core::gyrator::{LinearGyratorModel, ModelParams};
use gyra_core::linalg::{matrix_exponential, SymMatrix};
use gyra_core::simulation::{
    run_ensemble, transient_covariance, InitialCovariance, SimulationConfig, TrajectoryStats,
};
use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

const P_STAR: f64 = 1.0 / 22.0;

fn worked_model() -> LinearGyratorModel {
    let stiffness = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
    LinearGyratorModel::new(stiffness, vec![1.0, 2.0], ModelParams::default()).unwrap()
}

/// The worked model carrying `scale * Omega_star` as its load.
fn loaded_model(scale: f64) -> LinearGyratorModel {
    let base = worked_model();
    let omega_star = base.optimal_skew().unwrap();
    base.with_load(omega_star.scaled(scale)).unwrap()
}

fn assert_within(label: &str, value: f64, target: f64, tol: f64) {
    assert!(
        (value - target).abs() <= tol,
        "{label}: {value} vs {target} (|diff| = {:.3e} > tol {tol:.3e})",
        (value - target).abs()
    );
}

/// Exact estimator expectations under the stationary law of the discrete
/// chain at time step `dt`.
struct DiscreteOracle {
    sigma_d: DMatrix<f64>,
    power_strat: f64,
    power_ito: f64,
    heat: Vec<f64>,
}

fn discrete_oracle(model: &LinearGyratorModel, dt: f64) -> DiscreteOracle {
    let n = model.dim();
    let p = model.params();
    let b = model.force_coefficient();
    let m = &b / p.gamma;
    let g = DMatrix::<f64>::identity(n, n) - &m * dt;
    let a_l = match model.load() {
        Some(load) => load.as_matrix() * model.covariance_inverse(),
        None => DMatrix::zeros(n, n),
    };
    let d = model.temperature_matrix() * (2.0 * p.k_b * dt / p.gamma);

    // G S G' + D = S  <=>  (I - G (x) G) vec S = vec D, column-major vec.
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - g.kronecker(&g);
    let rhs = DVector::from_column_slice(d.as_slice());
    let vec_s = lhs.lu().solve(&rhs).expect("stable chain");
    let sigma_d = DMatrix::from_column_slice(n, n, vec_s.as_slice());
    let sigma_d = (&sigma_d + sigma_d.transpose()) * 0.5;

    // With dx = -M x dt + xi and midpoint x + dx/2:
    //   E[(A x)' dx]  = -dt Tr[A' M S]
    //   E[(A dx)' dx] = dt^2 Tr[A' M S M'] + Tr[A' D]
    // applied to the load force (work sums) and row-selected drift force
    // (heat sums).
    let t1 = (a_l.transpose() * &m * &sigma_d).trace();
    let t2 = (a_l.transpose() * &m * &sigma_d * m.transpose()).trace();
    let t3 = (a_l.transpose() * &d).trace();
    let power_strat = t1 - 0.5 * dt * t2 - t3 / (2.0 * dt);
    let power_ito = t1 - t3 / (2.0 * dt);

    let bs = &b * &sigma_d * m.transpose();
    let bms = &b * &m * &sigma_d * m.transpose();
    let bd = &b * &d;
    let heat = (0..n)
        .map(|i| -bs[(i, i)] + 0.5 * dt * bms[(i, i)] + bd[(i, i)] / (2.0 * dt))
        .collect();

    DiscreteOracle {
        sigma_d,
        power_strat,
        power_ito,
        heat,
    }
}

/// One large pooled run at the optimal load, shared by several tests.
fn optimal_run() -> &'static TrajectoryStats {
    static RUN: OnceLock<TrajectoryStats> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = SimulationConfig {
            dt: 1e-3,
            n_steps: 10_020_000,
            burn_in: 20_000,
            n_trajectories: 4,
            seed: 0xC0FFEE,
            initial_covariance: InitialCovariance::Stationary,
        };
        run_ensemble(&loaded_model(1.0), &config).unwrap()
    })
}

#[test]
fn equilibrium_covariance_matches_both_oracles() {
    let model = worked_model();
    let config = SimulationConfig {
        dt: 1e-3,
        n_steps: 5_010_000,
        burn_in: 10_000,
        n_trajectories: 2,
        seed: 0x5EED_0001,
        initial_covariance: InitialCovariance::Stationary,
    };
    let stats = run_ensemble(&model, &config).unwrap();
    let oracle = discrete_oracle(&model, config.dt);
    let sigma_ss = model.steady_state_covariance();

    for i in 0..2 {
        for j in 0..2 {
            let se = stats.covariance_std_error[(i, j)];
            assert!(se > 0.0);
            // Exact target for the chain that was actually simulated.
            assert_within(
                &format!("cov[{i}{j}] vs discrete oracle"),
                stats.empirical_covariance[(i, j)],
                oracle.sigma_d[(i, j)],
                4.0 * se,
            );
            // Continuum target: allow the (known, tiny) discretization bias.
            let bias = (oracle.sigma_d[(i, j)] - sigma_ss[(i, j)]).abs();
            assert_within(
                &format!("cov[{i}{j}] vs continuum"),
                stats.empirical_covariance[(i, j)],
                sigma_ss[(i, j)],
                4.0 * se + bias,
            );
        }
    }
}

#[test]
fn optimal_load_recovers_the_worked_power() {
    let stats = optimal_run();
    let oracle = discrete_oracle(&loaded_model(1.0), 1e-3);
    assert_eq!(stats.samples, 40_000_000);

    // Against the exact chain expectation (bias-free comparison).
    assert_within(
        "power_strat vs oracle",
        stats.power_stratonovich.value,
        oracle.power_strat,
        3.0 * stats.power_stratonovich.std_error,
    );
    assert_within(
        "power_ito vs oracle",
        stats.power_ito.value,
        oracle.power_ito,
        3.0 * stats.power_ito.std_error,
    );

    // Against the continuum optimum, allowing the oracle's own bias.
    assert_within(
        "power_strat vs P*",
        stats.power_stratonovich.value,
        P_STAR,
        3.0 * stats.power_stratonovich.std_error + (oracle.power_strat - P_STAR).abs(),
    );

    // The two discretizations agree within the error of their difference,
    // which is far smaller than either individual error.
    let gap = stats.power_gap;
    assert!(gap.std_error < stats.power_stratonovich.std_error);
    assert_within(
        "estimator gap",
        gap.value,
        oracle.power_strat - oracle.power_ito,
        3.0 * gap.std_error,
    );
}

#[test]
fn optimal_load_heat_rates_split_as_predicted() {
    let stats = optimal_run();
    let model = loaded_model(1.0);
    let oracle = discrete_oracle(&model, 1e-3);
    let analytic = model.heat_rates(model.load().unwrap()).unwrap();
    assert_within("analytic heat 1", analytic[0], -19.0 / 176.0, 1e-12);
    assert_within("analytic heat 2", analytic[1], 27.0 / 176.0, 1e-12);

    // One index walks three parallel tables; zip chains would obscure it.
    #[allow(clippy::needless_range_loop)]
    for i in 0..2 {
        let est = stats.heat_rates[i];
        assert_within(
            &format!("heat[{i}] vs oracle"),
            est.value,
            oracle.heat[i],
            4.0 * est.std_error,
        );
        assert_within(
            &format!("heat[{i}] vs continuum"),
            est.value,
            analytic[i],
            4.0 * est.std_error + (oracle.heat[i] - analytic[i]).abs(),
        );
    }

    // Stationary energy balance: the heat uptakes sum to the power drawn.
    let sum = stats.heat_rates[0].value + stats.heat_rates[1].value;
    let sum_se = stats.heat_rates[0].std_error + stats.heat_rates[1].std_error;
    let oracle_sum = oracle.heat[0] + oracle.heat[1];
    assert_within(
        "heat sum vs P*",
        sum,
        P_STAR,
        3.0 * sum_se + (oracle_sum - P_STAR).abs(),
    );
}

#[test]
fn energy_bookkeeping_closes_to_rounding_noise() {
    let stats = optimal_run();
    assert!(
        stats.first_law_residual.abs() <= 1e-10,
        "first-law residual {} should be pure float noise",
        stats.first_law_residual
    );
}

#[test]
fn covariance_is_unchanged_by_the_skew_load() {
    let stats = optimal_run();
    let sigma_ss = worked_model().steady_state_covariance().clone();
    let oracle = discrete_oracle(&loaded_model(1.0), 1e-3);
    for i in 0..2 {
        for j in 0..2 {
            let se = stats.covariance_std_error[(i, j)];
            let bias = (oracle.sigma_d[(i, j)] - sigma_ss[(i, j)]).abs();
            assert_within(
                &format!("loaded cov[{i}{j}]"),
                stats.empirical_covariance[(i, j)],
                sigma_ss[(i, j)],
                4.0 * se + bias,
            );
        }
    }
}

#[test]
fn doubled_load_extracts_no_power() {
    let config = SimulationConfig {
        dt: 1e-3,
        n_steps: 5_010_000,
        burn_in: 10_000,
        n_trajectories: 2,
        seed: 0x5EED_0002,
        initial_covariance: InitialCovariance::Stationary,
    };
    let model = loaded_model(2.0);
    let stats = run_ensemble(&model, &config).unwrap();
    let oracle = discrete_oracle(&model, config.dt);
    assert_within(
        "power at doubled load",
        stats.power_stratonovich.value,
        0.0,
        3.0 * stats.power_stratonovich.std_error + oracle.power_strat.abs(),
    );
}

#[test]
fn monte_carlo_matches_the_discrete_oracle_at_coarse_dt() {
    let dt = 4e-3;
    let model = loaded_model(1.0);
    let config = SimulationConfig {
        dt,
        n_steps: 5_006_000,
        burn_in: 6_000,
        n_trajectories: 4,
        seed: 0x5EED_0003,
        initial_covariance: InitialCovariance::Stationary,
    };
    let stats = run_ensemble(&model, &config).unwrap();
    let oracle = discrete_oracle(&model, dt);

    assert_within(
        "coarse power_strat",
        stats.power_stratonovich.value,
        oracle.power_strat,
        3.0 * stats.power_stratonovich.std_error,
    );
    assert_within(
        "coarse power_ito",
        stats.power_ito.value,
        oracle.power_ito,
        3.0 * stats.power_ito.std_error,
    );
    for i in 0..2 {
        assert_within(
            &format!("coarse heat[{i}]"),
            stats.heat_rates[i].value,
            oracle.heat[i],
            4.0 * stats.heat_rates[i].std_error,
        );
        for j in 0..2 {
            assert_within(
                &format!("coarse cov[{i}{j}]"),
                stats.empirical_covariance[(i, j)],
                oracle.sigma_d[(i, j)],
                4.0 * stats.covariance_std_error[(i, j)],
            );
        }
    }
}

#[test]
fn discretization_bias_shrinks_with_the_time_step() {
    let model = loaded_model(1.0);
    let analytic_heat = model.heat_rates(model.load().unwrap()).unwrap();
    let mut previous: Option<(f64, f64, Vec<f64>)> = None;
    for dt in [4e-3, 2e-3, 1e-3] {
        let oracle = discrete_oracle(&model, dt);
        let strat_bias = (oracle.power_strat - P_STAR).abs();
        let ito_bias = (oracle.power_ito - P_STAR).abs();
        let heat_bias: Vec<f64> = (0..2)
            .map(|i| (oracle.heat[i] - analytic_heat[i]).abs())
            .collect();
        if let Some((prev_strat, prev_ito, prev_heat)) = &previous {
            assert!(
                strat_bias < *prev_strat,
                "strat bias {strat_bias} should shrink from {prev_strat} at dt={dt}"
            );
            assert!(
                ito_bias < *prev_ito,
                "ito bias {ito_bias} should shrink from {prev_ito} at dt={dt}"
            );
            for i in 0..2 {
                assert!(heat_bias[i] < prev_heat[i]);
            }
        } else {
            // The coarsest chain must actually be biased for the shrinking
            // sequence to mean anything.
            assert!(strat_bias > 1e-6);
            assert!(ito_bias > 1e-6);
        }
        previous = Some((strat_bias, ito_bias, heat_bias));
    }
}

#[test]
fn load_sweep_traces_the_quadratic_power_curve() {
    let dt = 4e-3;
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    // Equal absolute error per point: steps scale with the load itself,
    // since the work-rate noise is proportional to the load coefficient.
    let base_steps = 100_000_000u64;
    let mut measured = Vec::new();
    let mut errors = Vec::new();
    for (k, &alpha) in alphas.iter().enumerate() {
        if alpha == 0.0 {
            let config = SimulationConfig {
                dt,
                n_steps: 101_000,
                burn_in: 1_000,
                n_trajectories: 1,
                seed: 0xA11CE,
                initial_covariance: InitialCovariance::Stationary,
            };
            let stats = run_ensemble(&worked_model(), &config).unwrap();
            assert_eq!(stats.power_stratonovich.value, 0.0);
            measured.push(0.0);
            errors.push(0.0);
            continue;
        }
        let window = ((base_steps as f64) * alpha * alpha) as u64;
        let config = SimulationConfig {
            dt,
            n_steps: window / 4 + 6_000,
            burn_in: 6_000,
            n_trajectories: 4,
            seed: 0xA11CE + k as u64,
            initial_covariance: InitialCovariance::Stationary,
        };
        let model = loaded_model(2.0 * alpha);
        let stats = run_ensemble(&model, &config).unwrap();
        let oracle = discrete_oracle(&model, dt);
        assert_within(
            &format!("sweep alpha={alpha}"),
            stats.power_stratonovich.value,
            oracle.power_strat,
            4.0 * stats.power_stratonovich.std_error,
        );
        measured.push(stats.power_stratonovich.value);
        errors.push(stats.power_stratonovich.std_error);
    }

    let predicted: Vec<f64> = alphas
        .iter()
        .map(|&a| 4.0 * P_STAR * a * (1.0 - a))
        .collect();
    let mean = measured.iter().sum::<f64>() / measured.len() as f64;
    let ss_tot: f64 = measured.iter().map(|m| (m - mean) * (m - mean)).sum();
    let ss_res: f64 = measured
        .iter()
        .zip(&predicted)
        .map(|(m, p)| (m - p) * (m - p))
        .sum();
    let r_squared = 1.0 - ss_res / ss_tot;
    eprintln!("sweep R^2 = {r_squared:.6}");
    assert!(
        r_squared >= 0.99,
        "R^2 = {r_squared} (measured {measured:?}, predicted {predicted:?}, se {errors:?})"
    );
}

#[test]
fn transient_matches_the_propagator_solution() {
    let model = worked_model();
    let sigma0 = SymMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 0.5]).unwrap();
    let series = transient_covariance(&model, &sigma0, 2.0, 1e-3).unwrap();
    let sigma_ss = model.steady_state_covariance().as_matrix().clone();
    let k_c = model.stiffness().as_matrix().clone();
    let deviation0 = sigma0.as_matrix() - &sigma_ss;
    for (t, sigma) in series.iter().step_by(200) {
        let propagator = matrix_exponential(&k_c, -t).unwrap();
        let expected =
            propagator.as_matrix() * &deviation0 * propagator.as_matrix().transpose() + &sigma_ss;
        assert!((sigma.as_matrix() - &expected).norm() <= 1e-8, "t = {t}");
    }
}

#[test]
fn transient_relaxes_monotonically_to_the_steady_state() {
    let model = worked_model();
    let sigma0 = SymMatrix::identity(2);
    // Twenty slowest-mode lifetimes: lambda_min(K_c) = 1 and gamma = 1.
    let series = transient_covariance(&model, &sigma0, 20.0, 5e-3).unwrap();
    let sigma_ss = model.steady_state_covariance().as_matrix().clone();
    let mut prev = f64::INFINITY;
    for (_, sigma) in &series {
        let dist = (sigma.as_matrix() - &sigma_ss).norm();
        assert!(dist <= prev * (1.0 + 1e-12));
        prev = dist;
    }
    assert!(
        prev <= 1e-8,
        "final distance {prev} should be far below the integration tolerance"
    );
}
