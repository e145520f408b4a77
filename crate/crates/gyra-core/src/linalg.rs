//! Dense matrix-equation solvers and utilities.
//!
//! The central objects are continuous-time Lyapunov equations. For symmetric
//! positive-definite `A` the equation `A Y + Y A = Q` is solved exactly in
//! the eigenbasis of `A`; for general stable `A` the equation
//! `A Y + Y A^T = Q` is solved by Kronecker vectorization. A
//! scaling-and-squaring matrix exponential is provided as an independent
//! route to the same quantities through the integral representation
//! `Y = integral of exp(-tau A) Q exp(-tau A) d tau`.

use nalgebra::{DMatrix, DVector};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use nalgebra::ComplexField as _;

/// Relative eigenvalue floor below which a symmetric matrix is rejected as
/// not positive definite: requires `lambda_min > 1e-10 * lambda_max`.
pub const PD_REL_TOL: f64 = 1e-10;

/// Relative asymmetry tolerance for [`SymMatrix`] and [`SkewMatrix`]
/// construction: `||A -+ A^T||_F <= 1e-12 * max(1, ||A||_F)`.
pub const SYMMETRY_REL_TOL: f64 = 1e-12;

/// Relative stability margin for the general Lyapunov solver: every
/// eigenvalue of `A` must satisfy `Re(lambda) > 1e-10 * rho(A)`.
pub const STABILITY_REL_TOL: f64 = 1e-10;

/// Largest dimension accepted by [`solve_lyapunov_general`]; the Kronecker
/// system is dense with `n^2` unknowns.
pub const MAX_GENERAL_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix entries must be finite")]
    NotFinite,
    #[error("asymmetry defect {defect:e} exceeds tolerance")]
    NotSymmetric { defect: f64 },
    #[error("skew-symmetry defect {defect:e} exceeds tolerance")]
    NotSkew { defect: f64 },
    #[error(
        "matrix is not positive definite: eigenvalues span [{min_eigenvalue:e}, {max_eigenvalue:e}]"
    )]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    #[error("matrix is not stable: smallest eigenvalue real part is {min_real_part:e}")]
    NotStable { min_real_part: f64 },
    #[error("dimension {n} exceeds the dense-solver limit of {limit}")]
    TooLarge { n: usize, limit: usize },
}

fn check_square(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NotFinite);
    }
    Ok(())
}

fn check_same_dim(n: usize, m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if m.nrows() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: m.nrows(),
        });
    }
    Ok(())
}

/// A finite square matrix with no structural constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix(DMatrix<f64>);

/// A symmetric matrix; the stored value is exactly symmetric (the
/// constructor averages away round-off asymmetry after validating it).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// A skew-symmetric matrix; the stored value is exactly skew.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix(DMatrix<f64>);

impl SquareMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square(&m)?;
        Ok(Self(m))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl SymMatrix {
    /// Validates `||A - A^T||_F <= 1e-12 * max(1, ||A||_F)` and stores
    /// `(A + A^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square(&m)?;
        let defect = (&m - m.transpose()).norm();
        if defect > SYMMETRY_REL_TOL * m.norm().max(1.0) {
            return Err(LinalgError::NotSymmetric { defect });
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl SkewMatrix {
    /// Validates `||A + A^T||_F <= 1e-12 * max(1, ||A||_F)` and stores
    /// `(A - A^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square(&m)?;
        let defect = (&m + m.transpose()).norm();
        if defect > SYMMETRY_REL_TOL * m.norm().max(1.0) {
            return Err(LinalgError::NotSkew { defect });
        }
        let skew = (&m - m.transpose()) * 0.5;
        Ok(Self(skew))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    /// The scalar multiple `s * A`, which is again skew.
    pub fn scaled(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

macro_rules! impl_deref {
    ($ty:ty) => {
        impl core::ops::Deref for $ty {
            type Target = DMatrix<f64>;
            fn deref(&self) -> &DMatrix<f64> {
                &self.0
            }
        }
    };
}

impl_deref!(SquareMatrix);
impl_deref!(SymMatrix);
impl_deref!(SkewMatrix);

struct SymEigen {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

/// Eigendecomposition gated on positive definiteness.
fn pd_eigen(a: &SymMatrix) -> Result<SymEigen, LinalgError> {
    let eig = a.0.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if !(min > PD_REL_TOL * max) || min <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(SymEigen {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    })
}

/// Shared core for the symmetric-coefficient equation `A Y + Y A = Q`.
/// In the eigenbasis `A = V L V^T` the solution is
/// `Y = V [ (V^T Q V)_ij / (l_i + l_j) ] V^T`.
fn lyapunov_sym_raw(a: &SymMatrix, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    check_same_dim(a.dim(), q)?;
    let eig = pd_eigen(a)?;
    let mut qt = eig.vectors.tr_mul(q) * &eig.vectors;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            qt[(i, j)] /= eig.values[i] + eig.values[j];
        }
    }
    Ok(&eig.vectors * qt * eig.vectors.transpose())
}

/// Solves `A Y + Y A = Q` for symmetric positive-definite `A` and symmetric
/// `Q`; the solution is symmetric and unique because every eigenvalue sum
/// `l_i + l_j` is positive.
///
/// The residual `||A Y + Y A - Q||_F` stays below `1e-12 * ||Q||_F` for
/// well-conditioned `A`.
///
/// # Errors
///
/// [`LinalgError::NotPositiveDefinite`] if `lambda_min(A) <= 1e-10 *
/// lambda_max(A)`, [`LinalgError::DimensionMismatch`] if the operands
/// disagree in size.
pub fn solve_lyapunov_sym(a: &SymMatrix, q: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let y = lyapunov_sym_raw(a, &q.0)?;
    // Mathematically symmetric; averaging removes reconstruction round-off.
    Ok(SymMatrix((&y + y.transpose()) * 0.5))
}

/// Solves `A Y + Y A = Q` for symmetric positive-definite `A` and skew `Q`.
/// The identical eigenbasis solve applies and yields a skew solution.
pub fn solve_lyapunov_skew(a: &SymMatrix, q: &SkewMatrix) -> Result<SkewMatrix, LinalgError> {
    let y = lyapunov_sym_raw(a, &q.0)?;
    Ok(SkewMatrix((&y - y.transpose()) * 0.5))
}

/// Solves `A Y + Y A^T = Q` for a general stable `A` (all eigenvalues in the
/// open right half-plane) by LU on the Kronecker system
/// `(I (x) A + A (x) I) vec(Y) = vec(Q)`. Dimension is capped at
/// [`MAX_GENERAL_DIM`].
///
/// # Errors
///
/// [`LinalgError::NotStable`] if some eigenvalue of `A` has real part
/// `<= 1e-10 * rho(A)`, [`LinalgError::TooLarge`] above the dimension cap.
pub fn solve_lyapunov_general(a: &SquareMatrix, q: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let n = a.dim();
    if n > MAX_GENERAL_DIM {
        return Err(LinalgError::TooLarge {
            n,
            limit: MAX_GENERAL_DIM,
        });
    }
    check_same_dim(n, &q.0)?;

    let eigs = a.0.complex_eigenvalues();
    let rho = eigs.iter().fold(0.0f64, |m, l| m.max(l.norm_sqr().sqrt()));
    let min_real = eigs.iter().fold(f64::INFINITY, |m, l| m.min(l.re));
    if min_real <= STABILITY_REL_TOL * rho {
        return Err(LinalgError::NotStable {
            min_real_part: min_real,
        });
    }

    let id = DMatrix::<f64>::identity(n, n);
    let system = id.kronecker(&a.0) + a.0.kronecker(&id);
    // Column-major flattening matches vec(.) in the Kronecker identities.
    let rhs = DVector::from_column_slice(q.0.as_slice());
    let solution = system.lu().solve(&rhs).ok_or(LinalgError::NotStable {
        min_real_part: min_real,
    })?;
    let y = DMatrix::from_column_slice(n, n, solution.as_slice());
    Ok(SymMatrix((&y + y.transpose()) * 0.5))
}

/// The commutator `A B - B A`.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SquareMatrix, LinalgError> {
    check_square(a)?;
    check_same_dim(a.nrows(), b)?;
    Ok(SquareMatrix(a * b - b * a))
}

/// The matrix exponential `exp(t A)` by scaling and squaring with a Taylor
/// kernel; accurate to about `1e-12` relative error for `||t A||_F <= 50`.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<SquareMatrix, LinalgError> {
    check_square(a)?;
    if !t.is_finite() {
        return Err(LinalgError::NotFinite);
    }
    let n = a.nrows();
    let at = a * t;
    let norm = at.norm();

    // Halve until the Taylor argument is small, then undo by squaring.
    let mut squarings = 0u32;
    let mut scale = 1.0f64;
    while norm / scale > 0.25 {
        squarings += 1;
        scale *= 2.0;
    }
    let arg = at / scale;

    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=64u32 {
        term = (&term * &arg) / f64::from(k);
        result += &term;
        if term.norm() <= f64::EPSILON * 0.01 * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(SquareMatrix(result))
}

/// Frobenius-norm residual of the symmetric-coefficient equation,
/// `||A Y + Y A - Q||_F`.
pub fn lyapunov_residual(a: &DMatrix<f64>, y: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (a * y + y * a.transpose() - q).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn assert_matrix_eq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        assert_eq!(a.nrows(), b.nrows());
        assert!(
            (a - b).norm() <= tol,
            "matrices differ by {:e}:\n{}\n{}",
            (a - b).norm(),
            a,
            b
        );
    }

    #[test]
    fn diagonal_coefficient_solves_entrywise() {
        let a = SymMatrix::from_diagonal(&[1.0, 3.0]);
        let q = SymMatrix::from_row_slice(2, &[2.0, 4.0, 4.0, 6.0]).unwrap();
        let y = solve_lyapunov_sym(&a, &q).unwrap();
        assert_matrix_eq(&y, &DMatrix::from_element(2, 2, 1.0), 1e-14);
    }

    #[test]
    fn coupled_coefficient_matches_hand_solution() {
        let a = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let q = SymMatrix::from_diagonal(&[2.0, 4.0]);
        let y = solve_lyapunov_sym(&a, &q).unwrap();
        let expected = dmatrix![0.75, -0.5; -0.5, 1.25];
        assert_matrix_eq(&y, &expected, 1e-12);
        assert!(lyapunov_residual(&a, &y, &q) <= 1e-12 * q.norm());
    }

    #[test]
    fn skew_right_hand_side_gives_skew_solution() {
        let a = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let q = SkewMatrix::from_row_slice(2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
        let y = solve_lyapunov_skew(&a, &q).unwrap();
        assert_relative_eq!(y[(0, 1)], -y[(1, 0)]);
        assert_eq!(y[(0, 0)], 0.0);
        assert!(lyapunov_residual(&a, &y, &q) <= 1e-12 * q.norm());
    }

    #[test]
    fn rejects_indefinite_and_near_singular_coefficients() {
        let a = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let q = SymMatrix::identity(2);
        assert!(matches!(
            solve_lyapunov_sym(&a, &q),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
        let a = SymMatrix::from_diagonal(&[1.0, 1e-12]);
        assert!(matches!(
            solve_lyapunov_sym(&a, &q),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn general_solver_agrees_with_symmetric_solver() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for n in [2usize, 3, 4] {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a_mat = &m * m.transpose() + DMatrix::identity(n, n);
            let a_sym = SymMatrix::new(a_mat.clone()).unwrap();
            let a_gen = SquareMatrix::new(a_mat).unwrap();
            let qm = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let q = SymMatrix::new(&qm + qm.transpose()).unwrap();
            let y1 = solve_lyapunov_sym(&a_sym, &q).unwrap();
            let y2 = solve_lyapunov_general(&a_gen, &q).unwrap();
            assert_matrix_eq(&y1, &y2, 1e-11 * q.norm());
        }
    }

    #[test]
    fn general_solver_handles_nonsymmetric_stable_drift() {
        let a = SquareMatrix::from_row_slice(2, &[1.0, 0.8, -0.3, 2.0]).unwrap();
        let q = SymMatrix::from_diagonal(&[2.0, 2.0]);
        let y = solve_lyapunov_general(&a, &q).unwrap();
        assert!(lyapunov_residual(&a, &y, &q) <= 1e-12 * q.norm());
        assert_relative_eq!(y[(0, 1)], y[(1, 0)]);
    }

    #[test]
    fn general_solver_rejects_unstable_drift() {
        let a = SquareMatrix::from_row_slice(2, &[-1.0, 0.0, 0.0, 2.0]).unwrap();
        let q = SymMatrix::identity(2);
        assert!(matches!(
            solve_lyapunov_general(&a, &q),
            Err(LinalgError::NotStable { .. })
        ));
    }

    #[test]
    fn general_solver_enforces_dimension_cap() {
        let n = MAX_GENERAL_DIM + 1;
        let a = SquareMatrix::new(DMatrix::identity(n, n)).unwrap();
        let q = SymMatrix::identity(n);
        assert!(matches!(
            solve_lyapunov_general(&a, &q),
            Err(LinalgError::TooLarge { .. })
        ));
    }

    #[test]
    fn exponential_of_zero_time_is_identity() {
        let a = dmatrix![3.0, 1.0; -2.0, 0.5];
        let e = matrix_exponential(&a, 0.0).unwrap();
        assert_matrix_eq(&e, &DMatrix::identity(2, 2), 1e-15);
    }

    #[test]
    fn exponential_of_diagonal_matrix() {
        let a = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0]));
        let e = matrix_exponential(&a, 1.0).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_row_slice(&[
            core::f64::consts::E,
            core::f64::consts::E * core::f64::consts::E,
        ]));
        assert_matrix_eq(&e, &expected, 1e-12);
    }

    #[test]
    fn exponential_matches_spectral_route_for_symmetric_input() {
        let a = dmatrix![2.0, 1.0; 1.0, 2.0];
        for t in [-3.0, -0.5, 0.7, 4.0] {
            let e = matrix_exponential(&a, t).unwrap();
            let eig = a.clone().symmetric_eigen();
            let exp_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (l * t).exp()));
            let expected = &eig.eigenvectors * exp_diag * eig.eigenvectors.transpose();
            assert_matrix_eq(&e, &expected, 1e-12 * expected.norm());
        }
    }

    #[test]
    fn exponential_satisfies_semigroup_property() {
        let a = dmatrix![0.3, 1.4, -0.2; -1.0, 0.1, 0.8; 0.5, -0.6, 0.9];
        let e_s = matrix_exponential(&a, 1.3).unwrap();
        let e_t = matrix_exponential(&a, 2.1).unwrap();
        let e_st = matrix_exponential(&a, 3.4).unwrap();
        assert_matrix_eq(
            &(e_s.as_matrix() * e_t.as_matrix()),
            &e_st,
            1e-12 * e_st.norm(),
        );
    }

    /// Composite-Simpson evaluation of
    /// `2 integral_0^L exp(-tau A) T exp(-tau A) d tau`
    /// built from repeated multiplication by one fixed step exponential.
    fn integral_oracle(a: &DMatrix<f64>, t_diag: &DMatrix<f64>, lambda_min: f64) -> DMatrix<f64> {
        let n = a.nrows();
        let panels = 40_000usize;
        let length = 40.0 / lambda_min;
        let h = length / panels as f64;
        let step = matrix_exponential(a, -h).unwrap().into_inner();
        let mut propagator = DMatrix::<f64>::identity(n, n);
        let mut acc = DMatrix::<f64>::zeros(n, n);
        for k in 0..=panels {
            let f = &propagator * t_diag * propagator.transpose();
            let weight = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += f * weight;
            propagator = &propagator * &step;
        }
        acc * (2.0 * h / 3.0)
    }

    #[test]
    fn eigenbasis_solve_matches_integral_representation() {
        let a = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let t_diag = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0]));
        let q = SymMatrix::new(2.0 * &t_diag).unwrap();
        let y = solve_lyapunov_sym(&a, &q).unwrap();
        let oracle = integral_oracle(&a, &t_diag, 1.0);
        assert_matrix_eq(&y, &oracle, 1e-8);
    }

    #[test]
    fn eigenbasis_solve_matches_integral_representation_random_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x1DA5);
        for n in 2..=5 {
            let mut w = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = rng.random_range(-1.0..1.0);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            // Spectrum of a is confined to [0.5, 1.5]: safely positive
            // definite and well within the quadrature resolution.
            let a = SymMatrix::new(DMatrix::identity(n, n) + &w / (2.0 * w.norm())).unwrap();
            let temps: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            let t_diag = DMatrix::from_diagonal(&DVector::from_row_slice(&temps));
            let q = SymMatrix::new(2.0 * &t_diag).unwrap();
            let y = solve_lyapunov_sym(&a, &q).unwrap();
            let oracle = integral_oracle(a.as_matrix(), &t_diag, 0.5);
            assert_matrix_eq(&y, &oracle, 1e-7);
        }
    }

    #[test]
    fn exponential_of_zero_matrix_is_identity() {
        let e = matrix_exponential(&DMatrix::zeros(3, 3), 1.0).unwrap();
        assert_eq!(e.as_matrix(), &DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn commutator_of_coupled_pair() {
        let k = dmatrix![2.0, 1.0; 1.0, 2.0];
        let s = dmatrix![0.75, -0.5; -0.5, 1.25];
        let c = commutator(&k, &s).unwrap();
        assert_matrix_eq(&c, &dmatrix![0.0, 0.5; -0.5, 0.0], 1e-14);
        let c_rev = commutator(&s, &k).unwrap();
        assert_matrix_eq(
            &(c.as_matrix() + c_rev.as_matrix()),
            &DMatrix::zeros(2, 2),
            1e-14,
        );
    }

    #[test]
    fn constructors_enforce_structure() {
        assert!(matches!(
            SymMatrix::from_row_slice(2, &[1.0, 2.0, 3.0, 4.0]),
            Err(LinalgError::NotSymmetric { .. })
        ));
        assert!(matches!(
            SkewMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]),
            Err(LinalgError::NotSkew { .. })
        ));
        assert!(matches!(
            SquareMatrix::new(DMatrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
        assert!(matches!(
            SymMatrix::from_row_slice(2, &[1.0, f64::NAN, f64::NAN, 1.0]),
            Err(LinalgError::NotFinite)
        ));
    }

    fn arb_spd_and_sym(n: usize) -> impl Strategy<Value = (SymMatrix, SymMatrix, SymMatrix)> {
        let entries = prop::collection::vec(-1.0f64..1.0, 2 * n * n);
        entries.prop_map(move |v| {
            let m = DMatrix::from_row_slice(n, n, &v[..n * n]);
            let a = SymMatrix::new(&m * m.transpose() + DMatrix::identity(n, n) * 0.5).unwrap();
            let r = DMatrix::from_row_slice(n, n, &v[n * n..]);
            let q1 = SymMatrix::new(&r + r.transpose()).unwrap();
            let q2 = SymMatrix::new(r.transpose() * &r).unwrap();
            (a, q1, q2)
        })
    }

    proptest! {
        #[test]
        fn solve_is_linear_in_the_right_hand_side(
            (a, q1, q2) in arb_spd_and_sym(3),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let combined = SymMatrix::new(alpha * q1.as_matrix() + beta * q2.as_matrix()).unwrap();
            let y = solve_lyapunov_sym(&a, &combined).unwrap();
            let y1 = solve_lyapunov_sym(&a, &q1).unwrap();
            let y2 = solve_lyapunov_sym(&a, &q2).unwrap();
            let recombined = alpha * y1.as_matrix() + beta * y2.as_matrix();
            prop_assert!((y.as_matrix() - &recombined).norm() <= 1e-9 * (1.0 + recombined.norm()));
        }

        #[test]
        fn residual_stays_small_on_random_inputs((a, q, _) in arb_spd_and_sym(4)) {
            let y = solve_lyapunov_sym(&a, &q).unwrap();
            prop_assert!(lyapunov_residual(&a, &y, &q) <= 1e-12 * q.norm().max(1.0));
        }
    }
}
