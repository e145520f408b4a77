//! Steady states and power transfer for linear overdamped Langevin systems.
//!
//! The model is `dX = (1/gamma) (Omega Sigma^-1 X - K_c X) dt +
//! sqrt(2 k_B T / gamma) dB` with a positive-definite stiffness `K_c`,
//! diagonal bath temperatures `T`, and an optional skew load `Omega`.
//! Because the load coefficient `Omega Sigma^-1` is skew against the
//! stationary covariance, it leaves `Sigma_ss` unchanged while tilting the
//! mean velocity field; the power it extracts is a concave quadratic in
//! `Omega` with a closed-form maximizer.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::linalg::{
    solve_lyapunov_skew, solve_lyapunov_sym, LinalgError, SkewMatrix, SquareMatrix, SymMatrix,
};

/// Relative tolerance on `||K_c T - T K_c||_F` below which the model is
/// considered in detailed balance.
pub const DETAILED_BALANCE_REL_TOL: f64 = 1e-10;

/// Relative tolerance for the steady-state consistency check in
/// [`velocity_coefficient`].
pub const STEADY_STATE_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GyratorError {
    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("bath temperature {index} must be positive, got {value}")]
    NonPositiveTemperature { index: usize, value: f64 },
    #[error("temperature count {temperatures} does not match stiffness dimension {stiffness}")]
    DimensionMismatch {
        stiffness: usize,
        temperatures: usize,
    },
    #[error("load dimension {load} does not match model dimension {model}")]
    LoadDimensionMismatch { model: usize, load: usize },
    #[error("stiffness and covariance are not a steady-state pair: relative defect {defect:e}")]
    InconsistentSteadyState { defect: f64 },
    #[error("the optimality equation is singular on the skew subspace")]
    DegenerateOptimum,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Physical constants shared by every computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Boltzmann constant (energy per temperature).
    pub k_b: f64,
    /// Friction coefficient (force times time per length).
    pub gamma: f64,
}

impl Default for ModelParams {
    /// Natural units, `k_B = gamma = 1`.
    fn default() -> Self {
        Self {
            k_b: 1.0,
            gamma: 1.0,
        }
    }
}

impl ModelParams {
    fn validate(&self) -> Result<(), GyratorError> {
        for (name, value) in [("k_B", self.k_b), ("gamma", self.gamma)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GyratorError::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }
}

/// A linear Langevin model with anisotropic bath temperatures and an
/// optional skew load. The stationary covariance is solved once at
/// construction and cached together with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGyratorModel {
    params: ModelParams,
    temperatures: Vec<f64>,
    stiffness: SymMatrix,
    load: Option<SkewMatrix>,
    sigma_ss: SymMatrix,
    sigma_inv: DMatrix<f64>,
}

impl LinearGyratorModel {
    /// Builds a model, validating positivity of all physical parameters and
    /// solving `K_c Sigma + Sigma K_c = 2 k_B T` for the stationary
    /// covariance (which also certifies that `K_c` is positive definite).
    pub fn new(
        stiffness: SymMatrix,
        temperatures: Vec<f64>,
        params: ModelParams,
    ) -> Result<Self, GyratorError> {
        params.validate()?;
        if temperatures.len() != stiffness.dim() {
            return Err(GyratorError::DimensionMismatch {
                stiffness: stiffness.dim(),
                temperatures: temperatures.len(),
            });
        }
        for (index, &value) in temperatures.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GyratorError::NonPositiveTemperature { index, value });
            }
        }
        let sigma_ss = steady_state_covariance(&stiffness, &temperatures, &params)?;
        let sigma_inv = symmetric_inverse(&sigma_ss)?;
        Ok(Self {
            params,
            temperatures,
            stiffness,
            load: None,
            sigma_ss,
            sigma_inv,
        })
    }

    /// Attaches a skew load; the stationary covariance is unaffected.
    pub fn with_load(mut self, load: SkewMatrix) -> Result<Self, GyratorError> {
        if load.dim() != self.dim() {
            return Err(GyratorError::LoadDimensionMismatch {
                model: self.dim(),
                load: load.dim(),
            });
        }
        self.load = Some(load);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    pub fn stiffness(&self) -> &SymMatrix {
        &self.stiffness
    }

    pub fn load(&self) -> Option<&SkewMatrix> {
        self.load.as_ref()
    }

    /// The stationary covariance `Sigma_ss`; independent of the load.
    pub fn steady_state_covariance(&self) -> &SymMatrix {
        &self.sigma_ss
    }

    pub fn covariance_inverse(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    /// The diagonal bath-temperature matrix.
    pub fn temperature_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                self.temperatures[i]
            } else {
                0.0
            }
        })
    }

    /// The force-coefficient matrix `B = K_c - Omega Sigma^-1`, so the
    /// deterministic drift is `-(1/gamma) B x`.
    pub fn force_coefficient(&self) -> DMatrix<f64> {
        let mut b = self.stiffness.as_matrix().clone();
        if let Some(load) = &self.load {
            b -= load.as_matrix() * &self.sigma_inv;
        }
        b
    }

    /// Detailed balance holds iff `K_c` and `T` commute; returns the flag
    /// and the commutator norm as an anisotropy diagnostic.
    pub fn detailed_balance(&self) -> (bool, f64) {
        detailed_balance_check(&self.stiffness, &self.temperatures)
    }

    /// The power-maximizing skew load for this model.
    pub fn optimal_skew(&self) -> Result<SkewMatrix, GyratorError> {
        optimal_skew(&self.sigma_ss, &self.temperatures, &self.params)
    }

    /// Mean extracted power of a given skew load.
    pub fn power_of_load(&self, load: &SkewMatrix) -> Result<f64, GyratorError> {
        if load.dim() != self.dim() {
            return Err(GyratorError::LoadDimensionMismatch {
                model: self.dim(),
                load: load.dim(),
            });
        }
        power_with_inverse(load, &self.sigma_inv, &self.temperatures, &self.params)
    }

    /// Stationary heat uptake rates from each bath under a skew load.
    ///
    /// With `B = K_c - Omega Sigma^-1`, bath `i` injects heat at rate
    /// `(1/gamma) [ k_B T_i B_ii - (B Sigma B^T)_ii ]`; the rates sum to the
    /// extracted power (first law with constant mean energy).
    pub fn heat_rates(&self, load: &SkewMatrix) -> Result<Vec<f64>, GyratorError> {
        if load.dim() != self.dim() {
            return Err(GyratorError::LoadDimensionMismatch {
                model: self.dim(),
                load: load.dim(),
            });
        }
        let b = self.stiffness.as_matrix() - load.as_matrix() * &self.sigma_inv;
        let bsb = &b * self.sigma_ss.as_matrix() * b.transpose();
        Ok((0..self.dim())
            .map(|i| {
                (self.params.k_b * self.temperatures[i] * b[(i, i)] - bsb[(i, i)])
                    / self.params.gamma
            })
            .collect())
    }

    /// Coefficient of the stationary mean-velocity field, `v(x) = A_v x`.
    pub fn velocity_coefficient(&self) -> Result<SquareMatrix, GyratorError> {
        velocity_coefficient(&self.stiffness, &self.sigma_ss, &self.params)
    }

    /// Assembles the full steady-state report around the optimal load.
    pub fn max_power(&self) -> Result<SteadyStateReport, GyratorError> {
        let omega_star = self.optimal_skew()?;
        let p_star = quadratic_power(&omega_star, &self.sigma_inv, &self.params);
        let velocity_coeff = self.velocity_coefficient()?;
        let (detailed_balance, commutator_norm) = self.detailed_balance();
        Ok(SteadyStateReport {
            sigma_ss: self.sigma_ss.clone(),
            omega_star,
            p_star,
            velocity_coeff,
            detailed_balance,
            commutator_norm,
        })
    }

    /// Evaluates the power of the load family `2 alpha Omega*`, so `alpha`
    /// is the fraction of the stationary source force carried by the load.
    /// Satisfies `P(alpha) = 4 P* alpha (1 - alpha)` with exact zeros at
    /// `alpha = 0` and `alpha = 1`.
    pub fn load_sweep(&self, alphas: &[f64]) -> Result<Vec<(f64, f64)>, GyratorError> {
        let omega_star = self.optimal_skew()?;
        Ok(alphas
            .iter()
            .map(|&alpha| {
                let load = omega_star.scaled(2.0 * alpha);
                let p = power_about_optimum(&load, &omega_star, &self.sigma_inv, &self.params);
                (alpha, p)
            })
            .collect())
    }
}

/// Summary of the stationary analysis at the optimal load.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateReport {
    pub sigma_ss: SymMatrix,
    pub omega_star: SkewMatrix,
    pub p_star: f64,
    pub velocity_coeff: SquareMatrix,
    pub detailed_balance: bool,
    pub commutator_norm: f64,
}

fn diag_matrix(entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(entries.len(), entries.len(), |i, j| {
        if i == j {
            entries[i]
        } else {
            0.0
        }
    })
}

fn symmetric_inverse(m: &SymMatrix) -> Result<DMatrix<f64>, GyratorError> {
    let chol = m
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(LinalgError::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
            max_eigenvalue: f64::NAN,
        })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Solves `K_c Sigma + Sigma K_c = 2 k_B T` for the stationary covariance.
pub fn steady_state_covariance(
    stiffness: &SymMatrix,
    temperatures: &[f64],
    params: &ModelParams,
) -> Result<SymMatrix, GyratorError> {
    let q_entries: Vec<f64> = temperatures.iter().map(|t| 2.0 * params.k_b * t).collect();
    let q = SymMatrix::new(diag_matrix(&q_entries))?;
    Ok(solve_lyapunov_sym(stiffness, &q)?)
}

/// Detailed balance iff stiffness and temperatures commute; returns
/// `(balanced, ||K_c T - T K_c||_F)` with a relative threshold.
pub fn detailed_balance_check(stiffness: &SymMatrix, temperatures: &[f64]) -> (bool, f64) {
    let t = diag_matrix(temperatures);
    let norm = (stiffness.as_matrix() * &t - &t * stiffness.as_matrix()).norm();
    let balanced = norm <= DETAILED_BALANCE_REL_TOL * stiffness.norm() * t.norm();
    (balanced, norm)
}

/// Coefficient `A_v` of the stationary velocity field `v(x) = A_v x`,
/// computed as `-(1/2 gamma) (K_c Sigma - Sigma K_c) Sigma^-1`.
///
/// The pair must satisfy a steady-state equation `K_c Sigma + Sigma K_c =
/// 2 k_B T` for some positive diagonal `T`; this is checked through the
/// off-diagonal defect of the left-hand side.
pub fn velocity_coefficient(
    stiffness: &SymMatrix,
    sigma: &SymMatrix,
    params: &ModelParams,
) -> Result<SquareMatrix, GyratorError> {
    if stiffness.dim() != sigma.dim() {
        return Err(GyratorError::DimensionMismatch {
            stiffness: stiffness.dim(),
            temperatures: sigma.dim(),
        });
    }
    let lhs = stiffness.as_matrix() * sigma.as_matrix() + sigma.as_matrix() * stiffness.as_matrix();
    let mut off = lhs.clone();
    off.set_diagonal(&nalgebra::DVector::zeros(lhs.nrows()));
    let defect = off.norm() / lhs.norm().max(f64::MIN_POSITIVE);
    if defect > STEADY_STATE_REL_TOL || lhs.diagonal().min() <= 0.0 {
        return Err(GyratorError::InconsistentSteadyState { defect });
    }
    let sigma_inv = symmetric_inverse(sigma)?;
    let commutator =
        stiffness.as_matrix() * sigma.as_matrix() - sigma.as_matrix() * stiffness.as_matrix();
    Ok(SquareMatrix::new(
        commutator * sigma_inv * (-0.5 / params.gamma),
    )?)
}

/// Solves the optimality condition
/// `Sigma^-1 Omega + Omega Sigma^-1 = (k_B/2)(Sigma^-1 T - T Sigma^-1)`
/// for the unique skew maximizer of extracted power.
///
/// Uniqueness on the skew subspace is verified numerically: the equation
/// restricted to a skew basis must be full rank.
pub fn optimal_skew(
    sigma: &SymMatrix,
    temperatures: &[f64],
    params: &ModelParams,
) -> Result<SkewMatrix, GyratorError> {
    let n = sigma.dim();
    if temperatures.len() != n {
        return Err(GyratorError::DimensionMismatch {
            stiffness: n,
            temperatures: temperatures.len(),
        });
    }
    let s = SymMatrix::new(symmetric_inverse(sigma)?)?;
    let omega = solve_optimality(&s, temperatures, params)?;
    verify_skew_uniqueness(s.as_matrix())?;
    Ok(omega)
}

fn solve_optimality(
    s: &SymMatrix,
    temperatures: &[f64],
    params: &ModelParams,
) -> Result<SkewMatrix, GyratorError> {
    let t = diag_matrix(temperatures);
    let rhs_raw = (s.as_matrix() * &t - &t * s.as_matrix()) * (params.k_b / 2.0);
    let rhs = SkewMatrix::new(rhs_raw)?;
    Ok(solve_lyapunov_skew(s, &rhs)?)
}

/// Checks that `X -> S X + X S` is invertible on the skew subspace by
/// assembling it in the elementary skew basis and testing its singular
/// values.
fn verify_skew_uniqueness(s: &DMatrix<f64>) -> Result<(), GyratorError> {
    let n = s.nrows();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    let m = pairs.len();
    if m == 0 {
        return Ok(());
    }
    let mut restricted = DMatrix::<f64>::zeros(m, m);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let mut basis = DMatrix::<f64>::zeros(n, n);
        basis[(i, j)] = 1.0;
        basis[(j, i)] = -1.0;
        let image = s * &basis + &basis * s;
        for (l, &(p, q)) in pairs.iter().enumerate() {
            restricted[(l, k)] = image[(p, q)];
        }
    }
    let svd = restricted.svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(min > 1e-12 * max) {
        return Err(GyratorError::DegenerateOptimum);
    }
    Ok(())
}

/// The nonnegative quadratic part `Tr[Omega Sigma^-1 Omega^T] / gamma`,
/// which equals the maximal power when evaluated at the optimal load.
fn quadratic_power(load: &SkewMatrix, sigma_inv: &DMatrix<f64>, params: &ModelParams) -> f64 {
    (load.as_matrix() * sigma_inv * load.as_matrix().transpose()).trace() / params.gamma
}

/// Power in completed-square form about the optimum:
/// `P(Omega) = P* - Tr[(Omega - Omega*) Sigma^-1 (Omega - Omega*)^T] / gamma`.
///
/// This equals `-(1/gamma) Tr[Omega Sigma^-1 Omega^T + k_B Omega Sigma^-1 T]`
/// by the optimality equation (the cross term reproduces the linear trace),
/// avoids cancellation near the vertex, and is exactly zero at `Omega = 0`
/// and `Omega = 2 Omega*`, where the difference reduces to `+-Omega*` in
/// floating point.
fn power_about_optimum(
    load: &SkewMatrix,
    omega_star: &SkewMatrix,
    sigma_inv: &DMatrix<f64>,
    params: &ModelParams,
) -> f64 {
    let p_star = quadratic_power(omega_star, sigma_inv, params);
    let diff = load.as_matrix() - omega_star.as_matrix();
    let dissipated = (&diff * sigma_inv * diff.transpose()).trace() / params.gamma;
    p_star - dissipated
}

fn power_with_inverse(
    load: &SkewMatrix,
    sigma_inv: &DMatrix<f64>,
    temperatures: &[f64],
    params: &ModelParams,
) -> Result<f64, GyratorError> {
    let s = SymMatrix::new(sigma_inv.clone())?;
    let omega_star = solve_optimality(&s, temperatures, params)?;
    Ok(power_about_optimum(load, &omega_star, sigma_inv, params))
}

/// Mean extracted power `P = -(1/gamma) Tr[Omega Sigma^-1 Omega^T +
/// k_B Omega Sigma^-1 T]` of a skew load against a stationary covariance,
/// evaluated in completed-square form about the optimal load.
pub fn power_of_load(
    load: &SkewMatrix,
    sigma: &SymMatrix,
    temperatures: &[f64],
    params: &ModelParams,
) -> Result<f64, GyratorError> {
    if load.dim() != sigma.dim() || temperatures.len() != sigma.dim() {
        return Err(GyratorError::LoadDimensionMismatch {
            model: sigma.dim(),
            load: load.dim(),
        });
    }
    let sigma_inv = symmetric_inverse(sigma)?;
    power_with_inverse(load, &sigma_inv, temperatures, params)
}
