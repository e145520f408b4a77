//! Nonequilibrium steady states and power transfer for linear Langevin
//! systems driven by anisotropic thermal noise.
//!
//! The crate is organized around a two-terminal picture: a quadratic
//! potential couples degrees of freedom that sit in baths at different
//! temperatures, a linear non-conservative load extracts work from the
//! resulting circulation, and several backends evaluate the same physics:
//!
//! - [`linalg`]: dense Lyapunov solvers, matrix exponential, commutator.
//! - [`gyrator`]: steady-state covariances, load optimization, power and
//!   heat-flow formulas in closed form.
//! - [`simulation`]: Euler-Maruyama sampling with work and heat estimators,
//!   plus deterministic covariance transients.
//! - [`circuit`]: RC-network realizations whose nonreciprocal coupling
//!   implements a prescribed load.
//! - [`field`]: a finite-volume solver recovering the effective potential
//!   of a steady state from its density on a grid.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std`
//! feature enables parallel trajectory sampling. Results are deterministic
//! for a fixed seed regardless of thread count.

#![cfg_attr(not(feature = "std"), no_std)]
// Validation deliberately writes `!(x > 0.0)` so that NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod circuit;
pub mod field;
pub mod gyrator;
pub mod linalg;
pub mod simulation;

pub use circuit::{CircuitSpec, VoltageFields};
pub use field::{Grid2D, GridDensity, GridScalarField, GridVectorField};
pub use gyrator::{LinearGyratorModel, ModelParams, SteadyStateReport};
pub use linalg::{SkewMatrix, SquareMatrix, SymMatrix};
pub use simulation::{EstimateWithSe, InitialCovariance, SimulationConfig, TrajectoryStats};
