//! Euler-Maruyama sampling of the linear Langevin dynamics with streaming
//! work and heat accounting, plus a deterministic covariance transient.
//!
//! Trajectories are independent work units: each derives its own RNG stream
//! from the master seed and a splitmix hash of its index, accumulates its
//! statistics locally, and the ensemble is folded in trajectory-index order.
//! Results are therefore bit-identical for a fixed seed regardless of how
//! many worker threads execute the trajectories. Paths are never stored;
//! memory is constant in the step count.
//!
//! Standard errors come from the method of batch means: every trajectory
//! splits its post-burn-in window into up to 100 contiguous batches (any
//! remainder folds into the last one), and the spread of batch means across
//! the ensemble estimates the error of the pooled mean without storing
//! autocorrelated per-step samples.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::ComplexField as _;

use crate::gyrator::LinearGyratorModel;
use crate::linalg::SymMatrix;

/// Maximum number of batch-means batches per trajectory.
const MAX_BATCHES: u64 = 100;

/// A state whose norm exceeds `DIVERGENCE_FACTOR * sqrt(Tr Sigma_ss)`
/// counts as a diverged integration.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulateError {
    #[error("dt must be positive and finite, got {dt}")]
    InvalidTimeStep { dt: f64 },
    #[error("burn_in ({burn_in}) must be smaller than n_steps ({n_steps})")]
    BadWindow { n_steps: u64, burn_in: u64 },
    #[error("n_trajectories must be at least 1")]
    NoTrajectories,
    #[error("initial covariance dimension {found} does not match model dimension {expected}")]
    InitialCovarianceDimension { expected: usize, found: usize },
    #[error("initial covariance is not positive definite")]
    InitialCovarianceNotPositive,
    #[error(
        "integration diverged at step {step} of trajectory {trajectory}; the time step is too large"
    )]
    UnstableIntegration { trajectory: usize, step: u64 },
    #[error("covariance lost positive definiteness at t = {time}; the time step is too large")]
    StepTooLarge { time: f64 },
}

/// Distribution of the initial state of each trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCovariance {
    /// Start in the stationary Gaussian.
    Stationary,
    /// Start from a zero-mean Gaussian with the given covariance.
    Fixed(SymMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Integration time step.
    pub dt: f64,
    /// Total steps per trajectory, including burn-in.
    pub n_steps: u64,
    /// Initial steps excluded from every estimator.
    pub burn_in: u64,
    /// Number of independent trajectories.
    pub n_trajectories: usize,
    /// Master seed; per-trajectory streams are derived from it.
    pub seed: u64,
    pub initial_covariance: InitialCovariance,
}

/// A scalar estimate with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithSe {
    pub value: f64,
    pub std_error: f64,
}

/// Ensemble statistics over the post-burn-in window.
#[derive(Debug, Clone)]
pub struct TrajectoryStats {
    /// Second moment of the state about the origin (the process is
    /// zero-mean), pooled over all post-burn-in samples.
    pub empirical_covariance: SymMatrix,
    /// Entrywise standard error of the empirical covariance.
    pub covariance_std_error: SymMatrix,
    /// Extracted power, midpoint (Stratonovich) work discretization.
    pub power_stratonovich: EstimateWithSe,
    /// Extracted power, left-point (Ito) discretization with the
    /// covariation correction added analytically.
    pub power_ito: EstimateWithSe,
    /// Stratonovich minus Ito estimate; its standard error reflects the
    /// correlation of the two estimators on shared increments.
    pub power_gap: EstimateWithSe,
    /// Heat uptake rate from each bath; the rates sum to the extracted
    /// power at stationarity.
    pub heat_rates: Vec<EstimateWithSe>,
    /// `sum_i Q_i - P_strat - dU/T_window`. The midpoint rule is exact for
    /// the quadratic energy, so this is rounding noise, not statistics.
    pub first_law_residual: f64,
    /// Post-burn-in samples pooled over the ensemble.
    pub samples: u64,
    /// Seconds spent in the ensemble run (0 when built without `std`).
    pub wall_time: f64,
}

/// Derives the per-trajectory seed: a splitmix64 finalizer applied to
/// `master + index * golden_gamma`, so streams are decorrelated while the
/// mapping stays documented and portable.
fn trajectory_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn matvec(a: &[f64], x: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
        }
        out[i] = acc;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Immutable per-run tables shared by all trajectories.
struct Stepper {
    n: usize,
    /// Row-major `(dt / gamma) B` with `B = K_c - Omega Sigma^-1`.
    drift_dt: Vec<f64>,
    /// Row-major load coefficient `A_L = Omega Sigma^-1`.
    load_coeff: Vec<f64>,
    /// Row-major `B`, for the heat increments.
    force_coeff: Vec<f64>,
    /// Row-major stiffness, for the energy `U(x) = x' K_c x / 2`.
    stiffness: Vec<f64>,
    /// Per-coordinate noise amplitude `sqrt(2 k_B T_i dt / gamma)`.
    noise_scale: Vec<f64>,
    /// Row-major lower Cholesky factor of the initial covariance.
    init_chol: Vec<f64>,
    /// `(k_B / gamma) Tr[Omega Sigma^-1 T]`: shift between the left-point
    /// work average and the midpoint one.
    ito_correction: f64,
    dt: f64,
    divergence_sq: f64,
    has_load: bool,
    n_steps: u64,
    burn_in: u64,
    master_seed: u64,
}

/// Per-trajectory scratch state.
struct Buffers {
    x: Vec<f64>,
    x_next: Vec<f64>,
    drift: Vec<f64>,
    mid: Vec<f64>,
    dx: Vec<f64>,
    force: Vec<f64>,
    force_left: Vec<f64>,
}

impl Buffers {
    fn new(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            x_next: vec![0.0; n],
            drift: vec![0.0; n],
            mid: vec![0.0; n],
            dx: vec![0.0; n],
            force: vec![0.0; n],
            force_left: vec![0.0; n],
        }
    }
}

/// Raw sums accumulated over one batch of steps.
struct BatchAccumulator {
    count: u64,
    /// Sum of midpoint work increments `f_L(x_mid)' dx` done on the system.
    work_strat: f64,
    /// Sum of left-point work increments `f_L(x_k)' dx`.
    work_ito: f64,
    /// Per-bath sums of heat increments `(B x_mid)_i dx_i`.
    heat: Vec<f64>,
    /// Upper-triangle sums of the post-step outer product `x x'`.
    outer: Vec<f64>,
}

impl BatchAccumulator {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            work_strat: 0.0,
            work_ito: 0.0,
            heat: vec![0.0; n],
            outer: vec![0.0; n * (n + 1) / 2],
        }
    }
}

struct TrajectoryOutcome {
    batches: Vec<BatchAccumulator>,
    /// `U(x_end) - U(x_window_start)`, for the first-law closure.
    energy_change: f64,
}

impl Stepper {
    fn energy(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.stiffness[i * n + j] * x[j];
            }
        }
        0.5 * acc
    }

    /// One Euler-Maruyama step. Afterwards `buf.x` holds the new state and
    /// `buf.mid` / `buf.dx` the midpoint and increment of the step taken.
    #[inline]
    fn advance(
        &self,
        buf: &mut Buffers,
        rng: &mut ChaCha12Rng,
        trajectory: usize,
        step: u64,
    ) -> Result<(), SimulateError> {
        let n = self.n;
        matvec(&self.drift_dt, &buf.x, &mut buf.drift, n);
        let mut norm_sq = 0.0;
        for i in 0..n {
            let z: f64 = StandardNormal.sample(rng);
            let next = buf.x[i] - buf.drift[i] + self.noise_scale[i] * z;
            buf.x_next[i] = next;
            norm_sq += next * next;
        }
        // Also catches NaN.
        if !(norm_sq <= self.divergence_sq) {
            return Err(SimulateError::UnstableIntegration { trajectory, step });
        }
        for i in 0..n {
            buf.mid[i] = 0.5 * (buf.x[i] + buf.x_next[i]);
            buf.dx[i] = buf.x_next[i] - buf.x[i];
        }
        core::mem::swap(&mut buf.x, &mut buf.x_next);
        Ok(())
    }

    fn run_trajectory(&self, index: usize) -> Result<TrajectoryOutcome, SimulateError> {
        let n = self.n;
        let mut rng = ChaCha12Rng::seed_from_u64(trajectory_seed(self.master_seed, index as u64));
        let mut buf = Buffers::new(n);

        // Zero-mean Gaussian start: lower-triangular factor times normals.
        for i in 0..n {
            buf.x_next[i] = StandardNormal.sample(&mut rng);
        }
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.init_chol[i * n + j] * buf.x_next[j];
            }
            buf.x[i] = acc;
        }

        let mut step: u64 = 0;
        for _ in 0..self.burn_in {
            self.advance(&mut buf, &mut rng, index, step)?;
            step += 1;
        }

        let window = self.n_steps - self.burn_in;
        let n_batches = window.clamp(1, MAX_BATCHES);
        let batch_len = window / n_batches;
        let mut batches = Vec::with_capacity(n_batches as usize);
        let energy_start = self.energy(&buf.x);

        let mut remaining = window;
        for b in 0..n_batches {
            let steps_here = if b == n_batches - 1 {
                remaining
            } else {
                batch_len
            };
            remaining -= steps_here;
            let mut acc = BatchAccumulator::new(n);
            for _ in 0..steps_here {
                if self.has_load {
                    // Left point must be read before the state advances.
                    matvec(&self.load_coeff, &buf.x, &mut buf.force_left, n);
                }
                self.advance(&mut buf, &mut rng, index, step)?;
                step += 1;
                if self.has_load {
                    acc.work_ito += dot(&buf.force_left, &buf.dx);
                    matvec(&self.load_coeff, &buf.mid, &mut buf.force, n);
                    acc.work_strat += dot(&buf.force, &buf.dx);
                }
                matvec(&self.force_coeff, &buf.mid, &mut buf.force, n);
                for i in 0..n {
                    acc.heat[i] += buf.force[i] * buf.dx[i];
                }
                let mut tri = 0;
                for i in 0..n {
                    for j in i..n {
                        acc.outer[tri] += buf.x[i] * buf.x[j];
                        tri += 1;
                    }
                }
                acc.count += 1;
            }
            batches.push(acc);
        }

        let energy_change = self.energy(&buf.x) - energy_start;
        Ok(TrajectoryOutcome {
            batches,
            energy_change,
        })
    }
}

fn build_stepper(
    model: &LinearGyratorModel,
    config: &SimulationConfig,
) -> Result<Stepper, SimulateError> {
    if !(config.dt > 0.0) || !config.dt.is_finite() {
        return Err(SimulateError::InvalidTimeStep { dt: config.dt });
    }
    if config.burn_in >= config.n_steps {
        return Err(SimulateError::BadWindow {
            n_steps: config.n_steps,
            burn_in: config.burn_in,
        });
    }
    if config.n_trajectories == 0 {
        return Err(SimulateError::NoTrajectories);
    }

    let n = model.dim();
    let params = model.params();
    let b = model.force_coefficient();
    let load_coeff = match model.load() {
        Some(load) => load.as_matrix() * model.covariance_inverse(),
        None => DMatrix::zeros(n, n),
    };
    let mut ito_correction = 0.0;
    for i in 0..n {
        ito_correction += load_coeff[(i, i)] * model.temperatures()[i];
    }
    ito_correction *= params.k_b / params.gamma;

    let init_sigma = match &config.initial_covariance {
        InitialCovariance::Stationary => model.steady_state_covariance(),
        InitialCovariance::Fixed(sigma) => {
            if sigma.dim() != n {
                return Err(SimulateError::InitialCovarianceDimension {
                    expected: n,
                    found: sigma.dim(),
                });
            }
            sigma
        }
    };
    let chol = init_sigma
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(SimulateError::InitialCovarianceNotPositive)?;

    let noise_scale = model
        .temperatures()
        .iter()
        .map(|&t| (2.0 * params.k_b * t * config.dt / params.gamma).sqrt())
        .collect();

    Ok(Stepper {
        n,
        drift_dt: row_major(&(&b * (config.dt / params.gamma))),
        load_coeff: row_major(&load_coeff),
        force_coeff: row_major(&b),
        stiffness: row_major(model.stiffness().as_matrix()),
        noise_scale,
        init_chol: row_major(&chol.l()),
        ito_correction,
        dt: config.dt,
        divergence_sq: DIVERGENCE_FACTOR
            * DIVERGENCE_FACTOR
            * model.steady_state_covariance().trace(),
        has_load: model.load().is_some(),
        n_steps: config.n_steps,
        burn_in: config.burn_in,
        master_seed: config.seed,
    })
}

/// Sample mean standard error from (approximately equally weighted) batch
/// means.
fn batch_se(values: &[f64]) -> f64 {
    let b = values.len();
    if b < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / b as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b as f64 - 1.0);
    (var / b as f64).sqrt()
}

/// Integrates an ensemble of trajectories and pools work, heat, and
/// covariance statistics over the post-burn-in window.
///
/// The result is a deterministic function of `(model, config)`: trajectory
/// RNG streams depend only on the seed and the trajectory index, and
/// reductions run in index order whatever the thread count.
pub fn run_ensemble(
    model: &LinearGyratorModel,
    config: &SimulationConfig,
) -> Result<TrajectoryStats, SimulateError> {
    #[cfg(feature = "std")]
    let clock = std::time::Instant::now();

    let stepper = build_stepper(model, config)?;
    let n = stepper.n;

    #[cfg(feature = "std")]
    let outcomes: Result<Vec<TrajectoryOutcome>, SimulateError> = {
        use rayon::prelude::*;
        (0..config.n_trajectories)
            .into_par_iter()
            .map(|i| stepper.run_trajectory(i))
            .collect()
    };
    #[cfg(not(feature = "std"))]
    let outcomes: Result<Vec<TrajectoryOutcome>, SimulateError> = (0..config.n_trajectories)
        .map(|i| stepper.run_trajectory(i))
        .collect();
    let outcomes = outcomes?;

    let tri_len = n * (n + 1) / 2;
    let mut strat_means = Vec::new();
    let mut ito_means = Vec::new();
    let mut gap_means = Vec::new();
    let mut heat_means = vec![Vec::new(); n];
    let mut cov_means = vec![Vec::new(); tri_len];

    let mut work_strat_total = 0.0;
    let mut work_ito_total = 0.0;
    let mut heat_totals = vec![0.0; n];
    let mut outer_totals = vec![0.0; tri_len];
    let mut energy_change_total = 0.0;
    let mut count_total: u64 = 0;

    for outcome in &outcomes {
        energy_change_total += outcome.energy_change;
        for batch in &outcome.batches {
            let steps = batch.count as f64;
            let span = steps * stepper.dt;
            let strat = -batch.work_strat / span + 0.0;
            let ito = -batch.work_ito / span - stepper.ito_correction + 0.0;
            strat_means.push(strat);
            ito_means.push(ito);
            gap_means.push(strat - ito);
            for i in 0..n {
                heat_means[i].push(batch.heat[i] / span);
                heat_totals[i] += batch.heat[i];
            }
            for k in 0..tri_len {
                cov_means[k].push(batch.outer[k] / steps);
                outer_totals[k] += batch.outer[k];
            }
            work_strat_total += batch.work_strat;
            work_ito_total += batch.work_ito;
            count_total += batch.count;
        }
    }

    let span_total = count_total as f64 * stepper.dt;
    let power_stratonovich = EstimateWithSe {
        value: -work_strat_total / span_total + 0.0,
        std_error: batch_se(&strat_means),
    };
    let power_ito = EstimateWithSe {
        value: -work_ito_total / span_total - stepper.ito_correction + 0.0,
        std_error: batch_se(&ito_means),
    };
    let power_gap = EstimateWithSe {
        value: power_stratonovich.value - power_ito.value,
        std_error: batch_se(&gap_means),
    };
    let heat_rates = (0..n)
        .map(|i| EstimateWithSe {
            value: heat_totals[i] / span_total,
            std_error: batch_se(&heat_means[i]),
        })
        .collect::<Vec<_>>();

    let mut cov = DMatrix::<f64>::zeros(n, n);
    let mut cov_se = DMatrix::<f64>::zeros(n, n);
    let mut tri = 0;
    for i in 0..n {
        for j in i..n {
            let value = outer_totals[tri] / count_total as f64;
            let se = batch_se(&cov_means[tri]);
            cov[(i, j)] = value;
            cov[(j, i)] = value;
            cov_se[(i, j)] = se;
            cov_se[(j, i)] = se;
            tri += 1;
        }
    }

    let heat_sum: f64 = heat_totals.iter().sum();
    let first_law_residual = (heat_sum + work_strat_total - energy_change_total) / span_total;

    #[cfg(feature = "std")]
    let wall_time = clock.elapsed().as_secs_f64();
    #[cfg(not(feature = "std"))]
    let wall_time = 0.0;

    Ok(TrajectoryStats {
        empirical_covariance: SymMatrix::new(cov).expect("mirrored matrix is symmetric"),
        covariance_std_error: SymMatrix::new(cov_se).expect("mirrored matrix is symmetric"),
        power_stratonovich,
        power_ito,
        power_gap,
        heat_rates,
        first_law_residual,
        samples: count_total,
        wall_time,
    })
}

/// Integrates the covariance transient `gamma dSigma/dt = -K_c Sigma -
/// Sigma K_c + 2 k_B T` with the classical fourth-order one-step method,
/// storing every step including the endpoints. The step is shortened so the
/// series lands exactly on `t_end`.
///
/// # Errors
///
/// [`SimulateError::StepTooLarge`] if any stored covariance loses positive
/// definiteness.
pub fn transient_covariance(
    model: &LinearGyratorModel,
    sigma0: &SymMatrix,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, SymMatrix)>, SimulateError> {
    if !(dt > 0.0) || !dt.is_finite() || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(SimulateError::InvalidTimeStep { dt });
    }
    if sigma0.dim() != model.dim() {
        return Err(SimulateError::InitialCovarianceDimension {
            expected: model.dim(),
            found: sigma0.dim(),
        });
    }
    if sigma0.as_matrix().clone().cholesky().is_none() {
        return Err(SimulateError::InitialCovarianceNotPositive);
    }

    let params = model.params();
    let k_c = model.stiffness().as_matrix();
    let source = model.temperature_matrix() * (2.0 * params.k_b);
    let rhs = |sigma: &DMatrix<f64>| -> DMatrix<f64> {
        (&source - k_c * sigma - sigma * k_c) / params.gamma
    };

    let steps = if t_end > 0.0 {
        (t_end / dt).ceil() as u64
    } else {
        0
    };
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };

    let mut series = Vec::with_capacity(steps as usize + 1);
    series.push((0.0, sigma0.clone()));
    let mut sigma = sigma0.as_matrix().clone();

    for k in 1..=steps {
        let k1 = rhs(&sigma);
        let k2 = rhs(&(&sigma + &k1 * (h / 2.0)));
        let k3 = rhs(&(&sigma + &k2 * (h / 2.0)));
        let k4 = rhs(&(&sigma + &k3 * h));
        sigma += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        sigma = (&sigma + sigma.transpose()) * 0.5;
        let t = k as f64 * h;
        if sigma.clone().cholesky().is_none() {
            return Err(SimulateError::StepTooLarge { time: t });
        }
        series.push((
            t,
            SymMatrix::new(sigma.clone()).expect("symmetrized covariance"),
        ));
    }
    Ok(series)
}
