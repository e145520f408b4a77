//! Monte Carlo closure of the circuit embodiment: simulating the Langevin
//! model a network maps onto reproduces the analytic charge covariance.

use gyra_core::circuit::{circuit_steady_state, circuit_to_langevin, CircuitSpec};
use gyra_core::simulation::{run_ensemble, InitialCovariance, SimulationConfig};

/// A reciprocal network is plain overdamped relaxation in the charge
/// coordinates: the sampled covariance must agree with the Lyapunov solve
/// entrywise, and with no non-reciprocal branch there is no load, so the
/// power estimators are identically zero rather than merely small.
#[test]
fn simulated_charges_match_the_network_covariance() {
    let spec = CircuitSpec::reciprocal(1.0, 2.0, 1.0, 1.0, 1.0, 2.0).unwrap();
    let model = circuit_to_langevin(&spec, 1.0).unwrap();
    let sigma = circuit_steady_state(&spec, 1.0).unwrap();

    // The slow mode of C^-1 relaxes on tau ~ 3.6, so batches span 160 time
    // units and the discretization bias at this dt sits well under the
    // statistical resolution.
    let config = SimulationConfig {
        dt: 4e-3,
        n_steps: 4_010_000,
        burn_in: 10_000,
        n_trajectories: 2,
        seed: 0x00C1_0C17,
        initial_covariance: InitialCovariance::Stationary,
    };
    let stats = run_ensemble(&model, &config).unwrap();

    for i in 0..2 {
        for j in 0..2 {
            let diff = (stats.empirical_covariance[(i, j)] - sigma[(i, j)]).abs();
            let se = stats.covariance_std_error[(i, j)];
            assert!(
                diff <= 3.0 * se,
                "entry ({i}, {j}): |{} - {}| = {diff} > 3 x {se}",
                stats.empirical_covariance[(i, j)],
                sigma[(i, j)],
            );
        }
    }

    assert_eq!(stats.power_stratonovich.value, 0.0);
    assert_eq!(stats.power_ito.value, 0.0);
}
