//! Finite-volume treatment of steady densities on a rectangular grid:
//! recover the confining potential that renders a density stationary, build
//! the source and load force fields, and evaluate extracted power by
//! quadrature.
//!
//! The potential solve discretizes `div(rho grad U) = -div(rho k_B T grad
//! log rho)` with vertex-centered control volumes, arithmetic-mean face
//! weights, and zero normal flux on the box. A symmetric face mean keeps
//! the operator self-adjoint, so after projecting out the constant
//! nullspace the system is symmetric positive-definite and a diagonally
//! scaled conjugate gradient drives the residual to a pinned tolerance.
//! Among the symmetric two-point means the arithmetic one is preferred
//! here: on smooth log-concave densities its truncation cancels against
//! the transverse midpoint error in the power functionals, which then
//! converge at fourth order instead of second. The remaining gauge
//! freedom is fixed by a density-weighted zero mean.
//!
//! All quadrature is trapezoidal. The density decays to rounding level at
//! the box boundary by construction (the mass-leak guard), so trapezoidal
//! sums of smooth integrands are accurate far beyond the second-order
//! truncation of the potential solve, which therefore dominates the error
//! budget.

use alloc::vec;
use alloc::vec::Vec;

use crate::gyrator::ModelParams;
use crate::linalg::SymMatrix;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::ComplexField as _;

/// Minimum grid points per axis.
pub const MIN_POINTS: usize = 16;

/// Maximum trapezoidal mass the density may place on the boundary nodes.
pub const BOUNDARY_MASS_TOL: f64 = 1e-10;

/// Tolerance on the trapezoidal integral of an externally supplied density.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Relative residual target for the potential solve.
pub const SOLVER_TOL: f64 = 1e-10;

/// Face weights are assembled from `max(rho, WEIGHT_FLOOR_FRACTION * peak)`.
///
/// The continuum operator degenerates where the density underflows toward
/// zero; nodes at the box corners can sit fifty decades below the peak and
/// make the linear system numerically indefinite. Clamping the weight
/// density regularizes only that degenerate far tail: the affected nodes
/// carry no probability mass, and for Gaussian densities the quadratic
/// potential satisfies the clamped equation as well (both sides reduce to
/// the same constant by the trace identity Tr K = Tr(T Sigma^-1)).
pub const WEIGHT_FLOOR_FRACTION: f64 = 1e-12;

const MAX_CG_ITERATIONS: usize = 50_000;
const MAX_CG_RESTARTS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    /// Fewer grid points than the scheme supports.
    #[error("grid needs at least {MIN_POINTS} points per axis, got {nx} x {ny}")]
    GridTooCoarse { nx: usize, ny: usize },
    /// Non-finite or inverted domain bounds.
    #[error("invalid bounds on the {axis} axis")]
    BadBounds { axis: &'static str },
    /// A value table whose length does not match the grid.
    #[error("expected {expected} node values, got {found}")]
    WrongValueCount { expected: usize, found: usize },
    /// Densities must be strictly positive everywhere.
    #[error("density is not positive at node {index}: {value}")]
    NonPositiveDensity { index: usize, value: f64 },
    /// Externally supplied densities must already integrate to one.
    #[error("density integrates to {integral}, not 1")]
    NotNormalized { integral: f64 },
    /// The domain truncates too much probability mass.
    #[error("boundary carries density mass {boundary_mass}, domain too small")]
    DomainTooSmall { boundary_mass: f64 },
    /// Covariances must be 2x2 for the grid pipeline.
    #[error("expected a 2x2 covariance, got {found}x{found}")]
    WrongDimension { found: usize },
    /// Covariances must be positive-definite.
    #[error("covariance is not positive-definite")]
    NotPositiveDefinite,
    /// Temperatures, friction, and Boltzmann constant must be positive.
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    /// Fields combined across different grids.
    #[error("fields live on different grids")]
    GridMismatch,
    /// The gauge-fixed linear system failed to reach the residual target.
    #[error("potential solve stalled after {iterations} iterations at residual {residual}")]
    SolverSingular { iterations: usize, residual: f64 },
}

/// Uniform vertex-centered grid on a rectangle.
///
/// Nodes sit at `x_min + i h_x` for `i = 0..nx` (and likewise in `y`);
/// trapezoidal node weights halve at the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
    h_x: f64,
    h_y: f64,
}

impl Grid2D {
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, FieldError> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(FieldError::BadBounds { axis: "x" });
        }
        if !(y_min.is_finite() && y_max.is_finite() && y_max > y_min) {
            return Err(FieldError::BadBounds { axis: "y" });
        }
        if nx < MIN_POINTS || ny < MIN_POINTS {
            return Err(FieldError::GridTooCoarse { nx, ny });
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
            h_x: (x_max - x_min) / (nx - 1) as f64,
            h_y: (y_max - y_min) / (ny - 1) as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h_x(&self) -> f64 {
        self.h_x
    }

    pub fn h_y(&self) -> f64 {
        self.h_y
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.x_min, self.x_max, self.y_min, self.y_max)
    }

    pub fn node_x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h_x
    }

    pub fn node_y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.h_y
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat index of node `(i, j)`; the y index varies fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    fn weight_x(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.h_x
        } else {
            self.h_x
        }
    }

    fn weight_y(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5 * self.h_y
        } else {
            self.h_y
        }
    }

    /// Trapezoidal quadrature weight of node `(i, j)`.
    pub fn node_weight(&self, i: usize, j: usize) -> f64 {
        self.weight_x(i) * self.weight_y(j)
    }

    fn trapezoid(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nx {
            let wx = self.weight_x(i);
            for j in 0..self.ny {
                acc += wx * self.weight_y(j) * values[self.index(i, j)];
            }
        }
        acc
    }
}

/// A strictly positive density with unit trapezoidal mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Grid2D,
    values: Vec<f64>,
    renormalization: f64,
}

impl GridDensity {
    /// Wraps an externally supplied table, which must already be positive
    /// and normalized to [`NORMALIZATION_TOL`].
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.n_nodes() {
            return Err(FieldError::WrongValueCount {
                expected: grid.n_nodes(),
                found: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(FieldError::NonPositiveDensity { index, value });
            }
        }
        let integral = grid.trapezoid(&values);
        if (integral - 1.0).abs() > NORMALIZATION_TOL {
            return Err(FieldError::NotNormalized { integral });
        }
        Ok(Self {
            grid,
            values,
            renormalization: 1.0,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Factor the raw table was scaled by to reach unit mass.
    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v.ln()).collect()
    }
}

/// Gauge state of a scalar field: the potential solve fixes the additive
/// constant by a density-weighted zero mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    RhoWeightedZeroMean,
    Ungauged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridScalarField {
    grid: Grid2D,
    values: Vec<f64>,
    gauge: Gauge,
}

impl GridScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>, gauge: Gauge) -> Result<Self, FieldError> {
        if values.len() != grid.n_nodes() {
            return Err(FieldError::WrongValueCount {
                expected: grid.n_nodes(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid,
            values,
            gauge,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }
}

/// A two-component vector field sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVectorField {
    grid: Grid2D,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl GridVectorField {
    pub fn new(grid: Grid2D, fx: Vec<f64>, fy: Vec<f64>) -> Result<Self, FieldError> {
        if fx.len() != grid.n_nodes() || fy.len() != grid.n_nodes() {
            return Err(FieldError::WrongValueCount {
                expected: grid.n_nodes(),
                found: fx.len().max(fy.len()),
            });
        }
        Ok(Self { grid, fx, fy })
    }

    /// Samples `f(x, y) -> (fx, fy)` at every node.
    pub fn from_fn(grid: &Grid2D, mut f: impl FnMut(f64, f64) -> (f64, f64)) -> Self {
        let mut fx = vec![0.0; grid.n_nodes()];
        let mut fy = vec![0.0; grid.n_nodes()];
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let (vx, vy) = f(grid.node_x(i), grid.node_y(j));
                fx[grid.index(i, j)] = vx;
                fy[grid.index(i, j)] = vy;
            }
        }
        Self {
            grid: grid.clone(),
            fx,
            fy,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn fx(&self) -> &[f64] {
        &self.fx
    }

    pub fn fy(&self) -> &[f64] {
        &self.fy
    }

    /// Pointwise `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &GridVectorField) -> Result<GridVectorField, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let fx = self
            .fx
            .iter()
            .zip(&other.fx)
            .map(|(a, b)| a + scale * b)
            .collect();
        let fy = self
            .fy
            .iter()
            .zip(&other.fy)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(GridVectorField {
            grid: self.grid.clone(),
            fx,
            fy,
        })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), FieldError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(FieldError::NonPositiveParameter { name, value });
    }
    Ok(())
}

fn check_params(temperatures: [f64; 2], params: &ModelParams) -> Result<(), FieldError> {
    check_positive("T1", temperatures[0])?;
    check_positive("T2", temperatures[1])?;
    check_positive("k_B", params.k_b)?;
    check_positive("gamma", params.gamma)
}

/// Samples a centered Gaussian with covariance `sigma` on the grid and
/// renormalizes its trapezoidal mass to one.
///
/// # Errors
///
/// [`FieldError::DomainTooSmall`] when the boundary nodes carry more than
/// [`BOUNDARY_MASS_TOL`] of trapezoidal mass, i.e. the box truncates a
/// non-negligible tail and zero-flux boundaries would distort the solve.
pub fn gaussian_density(grid: &Grid2D, sigma: &SymMatrix) -> Result<GridDensity, FieldError> {
    if sigma.dim() != 2 {
        return Err(FieldError::WrongDimension { found: sigma.dim() });
    }
    let chol = sigma
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(FieldError::NotPositiveDefinite)?;
    let inv = chol.inverse();
    let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
    let height = 1.0 / (2.0 * core::f64::consts::PI * det.sqrt());

    let mut values = vec![0.0; grid.n_nodes()];
    for i in 0..grid.nx {
        let x = grid.node_x(i);
        for j in 0..grid.ny {
            let y = grid.node_y(j);
            let quad = inv[(0, 0)] * x * x + 2.0 * inv[(0, 1)] * x * y + inv[(1, 1)] * y * y;
            values[grid.index(i, j)] = height * (-0.5 * quad).exp();
        }
    }

    let mut boundary_mass = 0.0;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            if i == 0 || i == grid.nx - 1 || j == 0 || j == grid.ny - 1 {
                boundary_mass += grid.node_weight(i, j) * values[grid.index(i, j)];
            }
        }
    }
    if boundary_mass > BOUNDARY_MASS_TOL {
        return Err(FieldError::DomainTooSmall { boundary_mass });
    }

    let mass = grid.trapezoid(&values);
    let renormalization = 1.0 / mass;
    for value in &mut values {
        *value *= renormalization;
    }
    Ok(GridDensity {
        grid: grid.clone(),
        values,
        renormalization,
    })
}

/// Face-weight tables of the vertex-centered finite-volume Laplacian
/// `u -> sum_faces w (u_self - u_neighbor)`, which is symmetric positive
/// semidefinite with nullspace spanned by constants.
struct FaceWeights {
    nx: usize,
    ny: usize,
    /// Weight of the face between `(i, j)` and `(i+1, j)`.
    wx: Vec<f64>,
    /// Weight of the face between `(i, j)` and `(i, j+1)`.
    wy: Vec<f64>,
}

impl FaceWeights {
    /// Arithmetic-mean face weights for `div(rho scale grad .)`; `scale` is
    /// a per-direction factor (conductivity in x and in y). The arithmetic
    /// mean equals the face-midpoint density plus `h^2/8` times the second
    /// derivative of rho along the face normal; on smooth log-concave
    /// densities that correction cancels the transverse midpoint-rule error
    /// in the quadratures downstream, so the power functionals built on the
    /// solved potential converge at fourth order.
    fn assemble(grid: &Grid2D, rho: &[f64], scale: [f64; 2]) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut wx = vec![0.0; (nx - 1) * ny];
        let mut wy = vec![0.0; nx * (ny - 1)];
        for i in 0..nx - 1 {
            for j in 0..ny {
                let a = rho[grid.index(i, j)];
                let b = rho[grid.index(i + 1, j)];
                wx[i * ny + j] = scale[0] * 0.5 * (a + b) * grid.weight_y(j) / grid.h_x;
            }
        }
        for i in 0..nx {
            for j in 0..ny - 1 {
                let a = rho[grid.index(i, j)];
                let b = rho[grid.index(i, j + 1)];
                wy[i * (ny - 1) + j] = scale[1] * 0.5 * (a + b) * grid.weight_x(i) / grid.h_y;
            }
        }
        Self { nx, ny, wx, wy }
    }

    /// `out = L u`.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let ny = self.ny;
        for i in 0..self.nx - 1 {
            for j in 0..ny {
                let a = i * ny + j;
                let b = (i + 1) * ny + j;
                let flux = self.wx[i * ny + j] * (u[a] - u[b]);
                out[a] += flux;
                out[b] -= flux;
            }
        }
        for i in 0..self.nx {
            for j in 0..ny - 1 {
                let a = i * ny + j;
                let b = i * ny + j + 1;
                let flux = self.wy[i * (ny - 1) + j] * (u[a] - u[b]);
                out[a] += flux;
                out[b] -= flux;
            }
        }
    }

    /// Diagonal of `L` (sum of incident face weights), the Jacobi
    /// preconditioner.
    fn diagonal(&self) -> Vec<f64> {
        let ny = self.ny;
        let mut diag = vec![0.0; self.nx * ny];
        for i in 0..self.nx - 1 {
            for j in 0..ny {
                let w = self.wx[i * ny + j];
                diag[i * ny + j] += w;
                diag[(i + 1) * ny + j] += w;
            }
        }
        for i in 0..self.nx {
            for j in 0..ny - 1 {
                let w = self.wy[i * (ny - 1) + j];
                diag[i * ny + j] += w;
                diag[i * ny + j + 1] += w;
            }
        }
        diag
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradient on the symmetrically scaled system
/// `(S L S) v = S b` with `S = diag(L)^-1/2`, returning `u = S v`.
///
/// The scaled operator has unit diagonal, so every Krylov vector stays
/// within the dynamic range of the data: there are no divisions by small
/// diagonal entries and the preconditioned inner product is a plain norm,
/// which cannot lose positivity to cancellation. The constant nullspace is
/// untouched (the right-hand side is assembled from antisymmetric face
/// fluxes, so its nullspace component is rounding-level) and the additive
/// constant is fixed by the caller's gauge. Convergence is declared on the
/// unscaled residual `b - L u`; since the scaled residual dominates it up
/// to the largest diagonal entry, the scaled recursion is iterated to the
/// same tolerance and cross-checked, restarting from the true residual if
/// the recursion drifted.
fn solve_scaled_cg(op: &FaceWeights, b: &[f64]) -> Result<(Vec<f64>, usize, f64), FieldError> {
    let n = b.len();
    let diag = op.diagonal();
    let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    // Iterate two decades below the contractual tolerance so that nodewise
    // solution noise sits far under the guaranteed residual; accept a stall
    // that still meets the contract.
    let contract = SOLVER_TOL * norm2(b).max(1.0);
    let tol = 0.01 * contract;

    let unscale = |v: &[f64]| -> Vec<f64> { v.iter().zip(&scale).map(|(x, s)| x * s).collect() };
    let mut tmp = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    let mut v = vec![0.0; n];
    let mut r: Vec<f64> = b.iter().zip(&scale).map(|(x, s)| x * s).collect();
    let mut p = r.clone();
    let mut rz = dot(&r, &r);
    let mut iterations = 0;
    let mut restarts = 0;

    loop {
        if rz.sqrt() <= tol {
            // Cross-check the unscaled true residual; the scaled recursion
            // may have drifted.
            let u = unscale(&v);
            op.apply(&u, &mut scratch);
            let true_norm = {
                let mut acc = 0.0;
                for k in 0..n {
                    let d = b[k] - scratch[k];
                    acc += d * d;
                }
                acc.sqrt()
            };
            if true_norm <= tol {
                return Ok((u, iterations, true_norm));
            }
            if restarts >= MAX_CG_RESTARTS {
                if true_norm <= contract {
                    return Ok((u, iterations, true_norm));
                }
                return Err(FieldError::SolverSingular {
                    iterations,
                    residual: true_norm,
                });
            }
            restarts += 1;
            for k in 0..n {
                r[k] = (b[k] - scratch[k]) * scale[k];
            }
            p.copy_from_slice(&r);
            rz = dot(&r, &r);
            continue;
        }
        if iterations >= MAX_CG_ITERATIONS {
            return Err(FieldError::SolverSingular {
                iterations,
                residual: rz.sqrt(),
            });
        }

        // scratch = S L S p
        for k in 0..n {
            tmp[k] = p[k] * scale[k];
        }
        op.apply(&tmp, &mut scratch);
        for k in 0..n {
            scratch[k] *= scale[k];
        }
        let denom = dot(&p, &scratch);
        if !(denom > 0.0) {
            return Err(FieldError::SolverSingular {
                iterations,
                residual: rz.sqrt(),
            });
        }
        let alpha = rz / denom;
        for k in 0..n {
            v[k] += alpha * p[k];
            r[k] -= alpha * scratch[k];
        }
        let rz_next = dot(&r, &r);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        iterations += 1;
    }
}

/// Recovers the confining potential of a steady density: solves
/// `div(rho grad U) = -div(rho k_B T grad log rho)` with zero normal flux,
/// then removes the additive constant by a density-weighted zero mean.
///
/// With an isotropic bath the right-hand side is exactly the weighted
/// Laplacian of `-k_B T0 log rho`, so the discrete solution reproduces
/// that potential to solver precision.
///
/// # Errors
///
/// [`FieldError::SolverSingular`] if the gauge-fixed system cannot reach
/// the [`SOLVER_TOL`] residual target (rank deficiency beyond the constant
/// mode, breakdown, or stall).
pub fn solve_confining_potential(
    rho: &GridDensity,
    temperatures: [f64; 2],
    params: &ModelParams,
) -> Result<GridScalarField, FieldError> {
    check_params(temperatures, params)?;
    let grid = &rho.grid;
    let log_rho = rho.log_values();

    // Both operators share the same clamped weight density, so identities
    // that hold face by face (isotropic bath, separable log density) carry
    // over to the discrete solution exactly.
    let peak = rho.values.iter().cloned().fold(0.0, f64::max);
    let floor = WEIGHT_FLOOR_FRACTION * peak;
    let weight_density: Vec<f64> = rho.values.iter().map(|&v| v.max(floor)).collect();

    let laplacian = FaceWeights::assemble(grid, &weight_density, [1.0, 1.0]);
    let heat_weights = FaceWeights::assemble(
        grid,
        &weight_density,
        [params.k_b * temperatures[0], params.k_b * temperatures[1]],
    );
    let mut b = vec![0.0; grid.n_nodes()];
    heat_weights.apply(&log_rho, &mut b);
    for value in &mut b {
        *value = -*value;
    }

    let (mut u, _iterations, _residual) = solve_scaled_cg(&laplacian, &b)?;

    // Gauge: density-weighted zero mean over the trapezoidal measure.
    let mut weighted_mean = 0.0;
    let mut total_weight = 0.0;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let k = grid.index(i, j);
            let w = grid.node_weight(i, j) * rho.values[k];
            weighted_mean += w * u[k];
            total_weight += w;
        }
    }
    weighted_mean /= total_weight;
    for value in &mut u {
        *value -= weighted_mean;
    }

    Ok(GridScalarField {
        grid: grid.clone(),
        values: u,
        gauge: Gauge::RhoWeightedZeroMean,
    })
}

/// Directional derivative tables: second-order central differences inside,
/// second-order one-sided stencils on the boundary.
fn gradient(grid: &Grid2D, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut gx = vec![0.0; nx * ny];
    let mut gy = vec![0.0; nx * ny];
    let two_hx = 2.0 * grid.h_x;
    let two_hy = 2.0 * grid.h_y;
    for j in 0..ny {
        gx[grid.index(0, j)] =
            (-3.0 * v[grid.index(0, j)] + 4.0 * v[grid.index(1, j)] - v[grid.index(2, j)]) / two_hx;
        gx[grid.index(nx - 1, j)] = (3.0 * v[grid.index(nx - 1, j)]
            - 4.0 * v[grid.index(nx - 2, j)]
            + v[grid.index(nx - 3, j)])
            / two_hx;
        for i in 1..nx - 1 {
            gx[grid.index(i, j)] = (v[grid.index(i + 1, j)] - v[grid.index(i - 1, j)]) / two_hx;
        }
    }
    for i in 0..nx {
        gy[grid.index(i, 0)] =
            (-3.0 * v[grid.index(i, 0)] + 4.0 * v[grid.index(i, 1)] - v[grid.index(i, 2)]) / two_hy;
        gy[grid.index(i, ny - 1)] = (3.0 * v[grid.index(i, ny - 1)]
            - 4.0 * v[grid.index(i, ny - 2)]
            + v[grid.index(i, ny - 3)])
            / two_hy;
        for j in 1..ny - 1 {
            gy[grid.index(i, j)] = (v[grid.index(i, j + 1)] - v[grid.index(i, j - 1)]) / two_hy;
        }
    }
    (gx, gy)
}

/// The source force `f_S = -grad U_c - k_B T grad log rho` sampled at the
/// nodes.
pub fn source_force_field(
    rho: &GridDensity,
    u_c: &GridScalarField,
    temperatures: [f64; 2],
    params: &ModelParams,
) -> Result<GridVectorField, FieldError> {
    check_params(temperatures, params)?;
    if rho.grid != u_c.grid {
        return Err(FieldError::GridMismatch);
    }
    let grid = &rho.grid;
    let (ux, uy) = gradient(grid, &u_c.values);
    let log_rho = rho.log_values();
    let (lx, ly) = gradient(grid, &log_rho);
    let kb = params.k_b;
    let fx = ux
        .iter()
        .zip(&lx)
        .map(|(du, dl)| -du - kb * temperatures[0] * dl)
        .collect();
    let fy = uy
        .iter()
        .zip(&ly)
        .map(|(du, dl)| -du - kb * temperatures[1] * dl)
        .collect();
    Ok(GridVectorField {
        grid: grid.clone(),
        fx,
        fy,
    })
}

/// The power-optimal load halves the source field pointwise.
pub fn optimal_load_field(f_s: &GridVectorField) -> GridVectorField {
    GridVectorField {
        grid: f_s.grid.clone(),
        fx: f_s.fx.iter().map(|v| 0.5 * v).collect(),
        fy: f_s.fy.iter().map(|v| 0.5 * v).collect(),
    }
}

/// Extracted power `integral of f_L . (f_S - f_L) rho / gamma` by
/// trapezoidal quadrature.
///
/// The integrand vanishes pointwise for `f_L = 0` and for `f_L = f_S`, so
/// both endpoints evaluate to exactly zero.
pub fn power_quadrature(
    f_l: &GridVectorField,
    f_s: &GridVectorField,
    rho: &GridDensity,
    params: &ModelParams,
) -> Result<f64, FieldError> {
    check_positive("gamma", params.gamma)?;
    if f_l.grid != rho.grid || f_s.grid != rho.grid {
        return Err(FieldError::GridMismatch);
    }
    let grid = &rho.grid;
    let mut acc = 0.0;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let k = grid.index(i, j);
            let integrand =
                f_l.fx[k] * (f_s.fx[k] - f_l.fx[k]) + f_l.fy[k] * (f_s.fy[k] - f_l.fy[k]);
            acc += grid.node_weight(i, j) * rho.values[k] * integrand;
        }
    }
    Ok(acc / params.gamma)
}

/// Power of the mean velocity field `v` through its heat rates:
/// `-gamma . integral(v . v rho) - k_B . integral(v . T grad log rho . rho)`,
/// the dissipative part plus the quasi-static part.
///
/// For `v = f_S / (2 gamma)` this agrees with
/// [`power_quadrature`]`(f_S/2, f_S, rho)` up to discretization error.
pub fn power_heat_decomposition(
    v: &GridVectorField,
    rho: &GridDensity,
    temperatures: [f64; 2],
    params: &ModelParams,
) -> Result<f64, FieldError> {
    check_params(temperatures, params)?;
    if v.grid != rho.grid {
        return Err(FieldError::GridMismatch);
    }
    let grid = &rho.grid;
    let log_rho = rho.log_values();
    let (lx, ly) = gradient(grid, &log_rho);
    let mut dissipative = 0.0;
    let mut quasi_static = 0.0;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let k = grid.index(i, j);
            let w = grid.node_weight(i, j) * rho.values[k];
            dissipative += w * (v.fx[k] * v.fx[k] + v.fy[k] * v.fy[k]);
            quasi_static +=
                w * (v.fx[k] * temperatures[0] * lx[k] + v.fy[k] * temperatures[1] * ly[k]);
        }
    }
    Ok(-params.gamma * dissipative - params.k_b * quasi_static)
}

/// Discrete L2 norm of `div(f rho)`, the defect of `f` from being
/// divergence-free with respect to the density.
pub fn divergence_residual(f: &GridVectorField, rho: &GridDensity) -> Result<f64, FieldError> {
    if f.grid != rho.grid {
        return Err(FieldError::GridMismatch);
    }
    let grid = &rho.grid;
    let n = grid.n_nodes();
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    for k in 0..n {
        px[k] = f.fx[k] * rho.values[k];
        py[k] = f.fy[k] * rho.values[k];
    }
    let (dx, _) = gradient(grid, &px);
    let (_, dy) = gradient(grid, &py);
    let mut acc = 0.0;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let k = grid.index(i, j);
            let div = dx[k] + dy[k];
            acc += grid.node_weight(i, j) * div * div;
        }
    }
    Ok(acc.sqrt())
}
