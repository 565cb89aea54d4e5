//! Dense pseudo-inverse and minimum-norm least-squares primitives.
//!
//! Everything here works on `nalgebra` dense matrices and is a pure function
//! of its inputs. The SVD and symmetric eigendecompositions are delegated to
//! `faer`. Singular values (or eigenvalue products, for the Kronecker
//! solver) at or below `rcond * max` are treated as exact zeros.

use faer::{MatRef, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance below which a nominally PSD eigenvalue may be negative
/// and still be clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Relative tolerance for the symmetry check on Kronecker factors.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Default rank cutoff for an `rows x cols` problem: machine epsilon times the
/// larger dimension.
pub fn default_rcond(rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols) as f64
}

pub(crate) fn ensure_finite_matrix(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid(format!("{what} has an empty dimension")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite entries")));
    }
    Ok(())
}

pub(crate) fn ensure_finite_vector(v: &Vector, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite entries")));
    }
    Ok(())
}

fn check_rcond(rcond: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rcond) {
        return Err(Error::invalid(format!("rcond {rcond} outside [0, 1)")));
    }
    Ok(())
}

fn faer_view(a: &Matrix) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(a.as_slice(), a.nrows(), a.ncols())
}

fn to_nalgebra(a: MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD `A = U diag(s) V^T`, singular values in non-increasing order.
struct ThinSvd {
    u: Matrix,
    singular_values: Vector,
    v: Matrix,
}

fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    let svd = faer_view(a).thin_svd().map_err(|_| {
        Error::Numerical(format!(
            "SVD of {}x{} matrix did not converge",
            a.nrows(),
            a.ncols()
        ))
    })?;
    let s = svd.S().column_vector();
    Ok(ThinSvd {
        u: to_nalgebra(svd.U()),
        singular_values: Vector::from_fn(s.nrows(), |i, _| s[i]),
        v: to_nalgebra(svd.V()),
    })
}

/// Reciprocal singular values with everything at or below the cutoff zeroed.
fn inverted_spectrum(singular: &Vector, rcond: f64) -> Vector {
    let smax = singular.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rcond * smax;
    singular.map(|s| if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 })
}

/// Moore-Penrose pseudo-inverse via a thin SVD.
///
/// `rcond = None` selects [`default_rcond`].
pub fn svd_pinv(a: &Matrix, rcond: Option<f64>) -> Result<Matrix> {
    ensure_finite_matrix(a, "matrix")?;
    let rcond = rcond.unwrap_or_else(|| default_rcond(a.nrows(), a.ncols()));
    check_rcond(rcond)?;

    let svd = thin_svd(a)?;
    let inv = inverted_spectrum(&svd.singular_values, rcond);

    // A+ = V diag(inv) U^T
    let mut v_scaled = svd.v;
    for (mut col, s) in v_scaled.column_iter_mut().zip(inv.iter()) {
        col *= *s;
    }
    Ok(v_scaled * svd.u.transpose())
}

/// Minimum-Euclidean-norm minimiser of `||b - A x||`, i.e. `A+ b`, computed
/// from a single SVD without forming the pseudo-inverse.
pub fn min_norm_lsq(a: &Matrix, b: &Vector) -> Result<Vector> {
    min_norm_lsq_rcond(a, b, None)
}

pub fn min_norm_lsq_rcond(a: &Matrix, b: &Vector, rcond: Option<f64>) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: matrix has {} rows, rhs has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    ensure_finite_matrix(a, "matrix")?;
    ensure_finite_vector(b, "rhs")?;
    let rcond = rcond.unwrap_or_else(|| default_rcond(a.nrows(), a.ncols()));
    check_rcond(rcond)?;

    let svd = thin_svd(a)?;
    let inv = inverted_spectrum(&svd.singular_values, rcond);

    let mut coords = svd.u.tr_mul(b);
    coords.component_mul_assign(&inv);
    Ok(&svd.v * coords)
}

/// Numerical rank: number of singular values above `rcond * sigma_max`.
pub fn numerical_rank(a: &Matrix, rcond: Option<f64>) -> Result<usize> {
    ensure_finite_matrix(a, "matrix")?;
    let rcond = rcond.unwrap_or_else(|| default_rcond(a.nrows(), a.ncols()));
    let svd = thin_svd(a)?;
    let smax = svd.singular_values.max();
    Ok(svd
        .singular_values
        .iter()
        .filter(|&&s| s > rcond * smax && s > 0.0)
        .count())
}

fn check_symmetric(m: &Matrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(Error::invalid(format!(
                    "{what} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Eigendecomposition of a symmetric PSD matrix with small negative
/// eigenvalues clamped to zero.
pub(crate) fn psd_eigen(m: &Matrix, what: &str) -> Result<(Vector, Matrix)> {
    check_symmetric(m, what)?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = faer_view(&sym)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Numerical(format!("eigendecomposition of {what} did not converge")))?;
    let s = eig.S().column_vector();
    let mut values = Vector::from_fn(s.nrows(), |i, _| s[i]);
    let lmax = values.iter().cloned().fold(0.0_f64, f64::max);
    for v in values.iter_mut() {
        if *v < 0.0 {
            if -*v > PSD_TOLERANCE * lmax {
                return Err(Error::invalid(format!(
                    "{what} is indefinite: eigenvalue {v:e} against max {lmax:e}"
                )));
            }
            *v = 0.0;
        }
    }
    Ok((values, to_nalgebra(eig.U())))
}

/// Solves `vec(B) = (P ⊗ Q)+ vec(C)` with column-major `vec`, so that
/// `(P ⊗ Q) vec(B) = vec(Q B P^T)`.
///
/// `P` is `q x q`, `Q` is `p x p` and `C` is `p x q`; both factors must be
/// symmetric PSD. The Kronecker product is never formed: with `P = U Λ U^T`
/// and `Q = W Μ W^T`, the solution is `W [(W^T C U) ⊘ (μ_i λ_j)] U^T`, with
/// products at or below `rcond * μ_max λ_max` dropped.
pub fn kron_min_norm_solve(p_factor: &Matrix, q_factor: &Matrix, c: &Matrix) -> Result<Matrix> {
    kron_min_norm_solve_rcond(p_factor, q_factor, c, None)
}

pub fn kron_min_norm_solve_rcond(
    p_factor: &Matrix,
    q_factor: &Matrix,
    c: &Matrix,
    rcond: Option<f64>,
) -> Result<Matrix> {
    ensure_finite_matrix(p_factor, "P")?;
    ensure_finite_matrix(q_factor, "Q")?;
    ensure_finite_matrix(c, "C")?;
    let q_dim = p_factor.nrows();
    let p_dim = q_factor.nrows();
    if c.nrows() != p_dim || c.ncols() != q_dim {
        return Err(Error::invalid(format!(
            "C must be {p_dim}x{q_dim}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let n = p_dim * q_dim;
    let rcond = rcond.unwrap_or_else(|| default_rcond(n, n));
    check_rcond(rcond)?;

    let (lambda_p, vec_p) = psd_eigen(p_factor, "P")?;
    let (lambda_q, vec_q) = psd_eigen(q_factor, "Q")?;

    let max_p = lambda_p.max();
    let max_q = lambda_q.max();
    let cutoff = rcond * max_p * max_q;

    let mut rotated = vec_q.tr_mul(c) * &vec_p;
    for j in 0..q_dim {
        for i in 0..p_dim {
            let prod = lambda_q[i] * lambda_p[j];
            rotated[(i, j)] = if prod > cutoff && prod > 0.0 {
                rotated[(i, j)] / prod
            } else {
                0.0
            };
        }
    }
    Ok(&vec_q * rotated * vec_p.transpose())
}

/// Column-major vectorisation.
pub fn vec_col_major(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_col_major`].
pub fn unvec_col_major(v: &Vector, rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

/// Dense Kronecker product `A ⊗ B`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}
