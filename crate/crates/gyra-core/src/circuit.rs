//! RC-network embodiment of the gyrator: two capacitors in thermal contact
//! with Johnson-Nyquist resistors at different temperatures, coupled through
//! an optional non-reciprocal two-port capacitance.
//!
//! With charge state `q`, total capacitance `C_hat = C + C_nr`, and
//! resistance `R`, the charges obey
//! `dq = -(1/R) C_hat^-1 q dt + sqrt(2 k_B T / R) dB`, so `R` plays the role
//! of the friction coefficient. The drift splits algebraically as
//! `C_hat^-1 = (C_hat^-1)' C C_hat^-1 + (C_hat^-1)' C_nr' C_hat^-1`, a
//! symmetric (conservative) part plus a non-reciprocal part. A `C_nr` is a
//! faithful load realization when the non-reciprocal coefficient has the
//! circulation form `Omega Sigma^-1` with `Omega` skew and `Sigma` the
//! covariance of the reciprocal circuit; then the mapped Langevin model with
//! `K_c = C^-1`, `gamma = R`, and load `Omega` reproduces the circuit's
//! power balance.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::gyrator::{GyratorError, LinearGyratorModel, ModelParams};
use crate::linalg::{LinalgError, SkewMatrix, SquareMatrix, SymMatrix};

/// Frobenius tolerance (relative to the load scale) for accepting the
/// implied load as a skew circulation.
pub const SKEW_REALIZABLE_TOL: f64 = 1e-8;

/// Fixed-point damping for the non-reciprocal synthesis.
const DESIGN_DAMPING: f64 = 0.5;
/// Iteration cap for the non-reciprocal synthesis.
const DESIGN_MAX_ITERATIONS: usize = 500;
/// Target residual on the realized skew load (`Omega` units, not the
/// coefficient `Omega Sigma^-1`, whose error the covariance amplifies).
const DESIGN_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("coupling capacitance must be non-negative, got {value}")]
    NegativeCoupling { value: f64 },
    #[error("non-reciprocal capacitance must be 2x2, got {found}x{found}")]
    WrongNonReciprocalDimension { found: usize },
    #[error("total capacitance C + C_nr is singular")]
    SingularCapacitance,
    #[error(
        "implied load times the reciprocal covariance is not skew (defect {defect:.3e}); \
         this C_nr does not preserve the covariance"
    )]
    NotSkewRealizable { defect: f64 },
    #[error(
        "load synthesis did not reach residual {target:.1e} after {iterations} iterations \
         (last residual {residual:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("capacitance matrix is not representable as (C1, C2, Cc) with positive C1, C2")]
    NotACapacitanceNetwork,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Gyrator(#[from] GyratorError),
}

/// A two-capacitor RC network with one shared coupling capacitor, equal
/// resistances `R` at bath temperatures `T1`, `T2`, and a non-reciprocal
/// two-port capacitance.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    pub c1: f64,
    pub c2: f64,
    pub cc: f64,
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    pub c_nr: SquareMatrix,
}

impl CircuitSpec {
    pub fn new(
        c1: f64,
        c2: f64,
        cc: f64,
        r: f64,
        t1: f64,
        t2: f64,
        c_nr: SquareMatrix,
    ) -> Result<Self, CircuitError> {
        let spec = Self {
            c1,
            c2,
            cc,
            r,
            t1,
            t2,
            c_nr,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A purely reciprocal network (`C_nr = 0`).
    pub fn reciprocal(
        c1: f64,
        c2: f64,
        cc: f64,
        r: f64,
        t1: f64,
        t2: f64,
    ) -> Result<Self, CircuitError> {
        Self::new(c1, c2, cc, r, t1, t2, SquareMatrix::zeros(2))
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for (name, value) in [
            ("C1", self.c1),
            ("C2", self.c2),
            ("R", self.r),
            ("T1", self.t1),
            ("T2", self.t2),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(CircuitError::NonPositiveParameter { name, value });
            }
        }
        if !(self.cc >= 0.0) || !self.cc.is_finite() {
            return Err(CircuitError::NegativeCoupling { value: self.cc });
        }
        if self.c_nr.dim() != 2 {
            return Err(CircuitError::WrongNonReciprocalDimension {
                found: self.c_nr.dim(),
            });
        }
        Ok(())
    }

    pub fn temperatures(&self) -> Vec<f64> {
        vec![self.t1, self.t2]
    }

    /// The reciprocal capacitance matrix of this network.
    pub fn capacitance(&self) -> Result<SymMatrix, CircuitError> {
        capacitance_matrix(self.c1, self.c2, self.cc)
    }

    /// Total capacitance `C + C_nr` seen by the charge dynamics.
    pub fn total_capacitance(&self) -> Result<SquareMatrix, CircuitError> {
        let c = self.capacitance()?;
        Ok(SquareMatrix::new(c.as_matrix() + self.c_nr.as_matrix())
            .expect("sum of finite square matrices"))
    }
}

/// Charge-to-voltage coefficient matrices of the drift decomposition.
///
/// `source_coeff * q` is the conservative force component (the negative
/// gradient of the effective network energy); the non-conservative force
/// component is `-load_coeff * q`, so the two force parts reconstruct the
/// full drift coefficient as `source_coeff - load_coeff = -C_hat^-1`. With
/// this orientation `load_coeff * Sigma` is the implied skew circulation.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageFields {
    pub source_coeff: SquareMatrix,
    pub load_coeff: SquareMatrix,
}

/// The shared-coupling capacitance matrix `[[C1+Cc, -Cc], [-Cc, C2+Cc]]`.
///
/// Positive definite for every valid parameter set; the guard exists to
/// protect downstream solves against pathological float inputs.
pub fn capacitance_matrix(c1: f64, c2: f64, cc: f64) -> Result<SymMatrix, CircuitError> {
    for (name, value) in [("C1", c1), ("C2", c2)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(CircuitError::NonPositiveParameter { name, value });
        }
    }
    if !(cc >= 0.0) || !cc.is_finite() {
        return Err(CircuitError::NegativeCoupling { value: cc });
    }
    let c = SymMatrix::from_row_slice(2, &[c1 + cc, -cc, -cc, c2 + cc])
        .expect("symmetric by construction");
    if c.as_matrix().clone().cholesky().is_none() {
        return Err(CircuitError::Linalg(LinalgError::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
            max_eigenvalue: f64::NAN,
        }));
    }
    Ok(c)
}

fn invert_total(spec: &CircuitSpec) -> Result<DMatrix<f64>, CircuitError> {
    spec.total_capacitance()?
        .as_matrix()
        .clone()
        .try_inverse()
        .ok_or(CircuitError::SingularCapacitance)
}

/// Symmetric positive-definite inverse via Cholesky.
fn spd_inverse(c: &SymMatrix) -> Result<SymMatrix, CircuitError> {
    let inv = c
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(CircuitError::SingularCapacitance)?
        .inverse();
    Ok(SymMatrix::new((&inv + inv.transpose()) * 0.5).expect("symmetrized inverse"))
}

/// The reciprocal (`C_nr = 0`) Langevin model of the network: stiffness
/// `C^-1`, friction `R`, bath temperatures `(T1, T2)`.
fn reciprocal_model(spec: &CircuitSpec, k_b: f64) -> Result<LinearGyratorModel, CircuitError> {
    let stiffness = spd_inverse(&spec.capacitance()?)?;
    Ok(LinearGyratorModel::new(
        stiffness,
        spec.temperatures(),
        ModelParams { k_b, gamma: spec.r },
    )?)
}

/// Splits the charge dynamics into conservative and non-reciprocal voltage
/// coefficients: `source_coeff = -(C_hat^-1)' C C_hat^-1` and
/// `load_coeff = (C_hat^-1)' C_nr' C_hat^-1`.
///
/// The difference `source_coeff - load_coeff` reconstructs `-C_hat^-1`
/// exactly up to rounding, and `source_coeff` is symmetric.
pub fn force_decomposition(spec: &CircuitSpec) -> Result<VoltageFields, CircuitError> {
    spec.validate()?;
    let inv = invert_total(spec)?;
    let source = -(inv.transpose() * spec.capacitance()?.as_matrix() * &inv);
    let load = inv.transpose() * spec.c_nr.as_matrix().transpose() * &inv;
    Ok(VoltageFields {
        source_coeff: SquareMatrix::new(source).expect("finite product"),
        load_coeff: SquareMatrix::new(load).expect("finite product"),
    })
}

/// Maps the network onto the Langevin model it embodies: stiffness `C^-1`,
/// friction `gamma = R`, temperatures `(T1, T2)`, and, for `C_nr != 0`, the
/// skew load implied by the non-reciprocal part of the drift.
///
/// # Errors
///
/// [`CircuitError::NotSkewRealizable`] when the non-reciprocal coefficient
/// is not a skew circulation over the reciprocal covariance, i.e. the
/// network does not embody any covariance-preserving load.
pub fn circuit_to_langevin(
    spec: &CircuitSpec,
    k_b: f64,
) -> Result<LinearGyratorModel, CircuitError> {
    spec.validate()?;
    let model = reciprocal_model(spec, k_b)?;
    let omega = implied_load(spec, &model)?;
    Ok(model.with_load(omega)?)
}

/// The skew circulation implied by `C_nr` over the reciprocal covariance.
fn implied_load(
    spec: &CircuitSpec,
    reciprocal: &LinearGyratorModel,
) -> Result<SkewMatrix, CircuitError> {
    let load_coeff = force_decomposition(spec)?.load_coeff;
    let circulation = load_coeff.as_matrix() * reciprocal.steady_state_covariance().as_matrix();
    let sym_defect = (&circulation + circulation.transpose()).norm() * 0.5;
    let scale = circulation.norm().max(1.0);
    if sym_defect > SKEW_REALIZABLE_TOL * scale {
        return Err(CircuitError::NotSkewRealizable { defect: sym_defect });
    }
    Ok(
        SkewMatrix::new((&circulation - circulation.transpose()) * 0.5)
            .expect("anti-symmetrized circulation"),
    )
}

/// Stationary charge covariance of the full network, solving
/// `C_hat^-1 Sigma + Sigma (C_hat^-1)' = 2 k_B T` (the resistance cancels).
pub fn circuit_steady_state(spec: &CircuitSpec, k_b: f64) -> Result<SymMatrix, CircuitError> {
    spec.validate()?;
    let coefficient = SquareMatrix::new(invert_total(spec)?).expect("finite inverse");
    let n = coefficient.dim();
    let q = SymMatrix::new(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * k_b * if i == 0 { spec.t1 } else { spec.t2 }
        } else {
            0.0
        }
    }))
    .expect("diagonal source");
    Ok(crate::linalg::solve_lyapunov_general(&coefficient, &q)?)
}

/// Synthesizes the non-reciprocal capacitance whose drift decomposition
/// realizes the target skew load over the reciprocal covariance of
/// `(C, T)`: solves `(C_hat^-1)' C_nr' C_hat^-1 = Omega Sigma^-1` for
/// `C_hat = C + C_nr` by damped fixed-point iteration from `C_hat = C`.
pub fn design_cnr(
    c: &SymMatrix,
    r: f64,
    temperatures: &[f64],
    omega_target: &SkewMatrix,
    params: &ModelParams,
) -> Result<CircuitSpec, CircuitError> {
    if c.dim() != 2 || omega_target.dim() != 2 || temperatures.len() != 2 {
        return Err(CircuitError::WrongNonReciprocalDimension {
            found: c.dim().max(omega_target.dim()).max(temperatures.len()),
        });
    }
    // Recover the network parameters; the off-diagonal entry is -Cc.
    let cc = -c[(0, 1)];
    let c1 = c[(0, 0)] - cc;
    let c2 = c[(1, 1)] - cc;
    if !(c1 > 0.0) || !(c2 > 0.0) || !(cc >= 0.0) {
        return Err(CircuitError::NotACapacitanceNetwork);
    }
    let mut spec = CircuitSpec::new(
        c1,
        c2,
        cc,
        r,
        temperatures[0],
        temperatures[1],
        SquareMatrix::zeros(2),
    )?;

    // Reciprocal covariance of (C, T); gamma drops out of the equation.
    let model = reciprocal_model(&spec, params.k_b)?;
    let target = omega_target.as_matrix() * model.covariance_inverse();

    let sigma = model.steady_state_covariance().as_matrix().clone();
    let c_mat = c.as_matrix().clone();
    let mut c_hat = c_mat.clone();
    let mut residual = f64::INFINITY;
    for iteration in 0..DESIGN_MAX_ITERATIONS {
        let inv = match c_hat.clone().try_inverse() {
            Some(inv) => inv,
            None => {
                return Err(CircuitError::NoConvergence {
                    iterations: iteration,
                    residual,
                    target: DESIGN_RESIDUAL_TOL,
                })
            }
        };
        let realized = inv.transpose() * (&c_hat - &c_mat).transpose() * &inv;
        residual = ((&realized - &target) * &sigma).norm();
        if residual <= DESIGN_RESIDUAL_TOL {
            spec.c_nr = SquareMatrix::new(&c_hat - &c_mat).expect("finite iterate");
            return Ok(spec);
        }
        let pushed = &c_mat + (c_hat.transpose() * &target * &c_hat).transpose();
        c_hat = &c_hat * (1.0 - DESIGN_DAMPING) + pushed * DESIGN_DAMPING;
    }
    Err(CircuitError::NoConvergence {
        iterations: DESIGN_MAX_ITERATIONS,
        residual,
        target: DESIGN_RESIDUAL_TOL,
    })
}

/// Average electrical power delivered into the non-reciprocal branch at
/// stationarity, computed analytically through the mapped model with
/// `gamma = R`.
///
/// Zero for a reciprocal network, maximal when the load voltage halves the
/// thermal source voltage.
pub fn circuit_power(spec: &CircuitSpec, k_b: f64) -> Result<f64, CircuitError> {
    let model = circuit_to_langevin(spec, k_b)?;
    let load = model.load().expect("mapped model carries its load").clone();
    Ok(model.power_of_load(&load)?)
}
