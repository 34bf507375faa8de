//! Dense kernels for square-root covariance propagation.
//!
//! Every factor in this crate is lower triangular: `P = L·Lᵀ`. The QR
//! kernel returns the transpose of its `R` so that callers never have to
//! think about which side a factor lives on.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative tolerance for the symmetry check on Cholesky input.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Pivot threshold (relative to the largest diagonal entry) below which a
/// matrix is not treated as positive definite.
pub const PD_PIVOT_TOL: f64 = 1e-12;
/// Diagonal magnitude below which an `R` column counts as dependent,
/// relative to the largest column norm of the input.
pub const RANK_TOL: f64 = 1e-12;
/// Smallest admissible diagonal entry for triangular solves.
pub const SINGULAR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) above the diagonal is nonzero")]
    NotTriangular { row: usize, col: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("Cholesky downdate failed at column {column}: result not positive semi-definite")]
    DowndateFailure { column: usize },
    #[error("triangular factor is singular (diagonal {index} = {value:e})")]
    SingularFactor { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Lower-triangular square-root factor with a non-negative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularFactor(DMatrix<f64>);

impl TriangularFactor {
    pub fn identity(order: usize) -> Self {
        Self(DMatrix::identity(order, order))
    }

    pub fn zeros(order: usize) -> Self {
        Self(DMatrix::zeros(order, order))
    }

    /// Diagonal factor with the given (non-negative) entries.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self, LinalgError> {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        Self::from_lower(m)
    }

    /// Wraps `m` after checking it is square, finite, lower triangular and
    /// has a non-negative diagonal.
    pub fn from_lower(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let n = m.nrows();
        for j in 0..n {
            for i in 0..j {
                if m[(i, j)] != 0.0 {
                    return Err(LinalgError::NotTriangular { row: i, col: j });
                }
            }
            if m[(j, j)] < 0.0 {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: m[(j, j)] });
            }
        }
        Ok(Self(m))
    }

    /// Builds a factor from any lower-triangular matrix by flipping the sign
    /// of columns with a negative diagonal entry. Entries above the diagonal
    /// are discarded.
    pub(crate) fn normalized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in 0..j {
                m[(i, j)] = 0.0;
            }
            if m[(j, j)] < 0.0 {
                for i in j..n {
                    m[(i, j)] = -m[(i, j)];
                }
            }
        }
        Self(m)
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.0 * self.0.transpose()
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.0.diagonal()
    }

    /// Block-diagonal concatenation of two factors.
    pub fn block_diag(&self, other: &TriangularFactor) -> TriangularFactor {
        let (a, b) = (self.order(), other.order());
        let mut m = DMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.0);
        m.view_mut((a, a), (b, b)).copy_from(&other.0);
        TriangularFactor(m)
    }
}

/// Side on which the triangular factor multiplies the unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solve `op(S)·X = B`.
    Left,
    /// Solve `X·op(S) = B`.
    Right,
}

fn max_abs_diag(p: &DMatrix<f64>) -> f64 {
    p.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Cholesky factorization `P = L·Lᵀ` of a symmetric positive-definite matrix.
pub fn cholesky(p: &DMatrix<f64>) -> Result<TriangularFactor, LinalgError> {
    if !p.is_square() {
        return Err(LinalgError::NotSquare { rows: p.nrows(), cols: p.ncols() });
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = p.nrows();
    let scale = max_abs_diag(p).max(f64::MIN_POSITIVE);
    let mut asymmetry = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            asymmetry = asymmetry.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    if asymmetry > SYMMETRY_TOL * scale.max(1.0) {
        return Err(LinalgError::NotSymmetric { asymmetry });
    }

    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > PD_PIVOT_TOL * scale) {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            // lower triangle of P is authoritative
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(TriangularFactor(l))
}

/// Triangular factor of the thin QR decomposition of a tall matrix.
///
/// Returns `L = Rᵀ` with a non-negative diagonal, so `L·Lᵀ = Aᵀ·A`.
/// Householder reflections, no pivoting.
pub fn qr_triangularize(a: &DMatrix<f64>) -> Result<TriangularFactor, LinalgError> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(LinalgError::DimensionMismatch { expected: cols, actual: rows });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let max_col_norm = a.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);

    let mut r = a.clone();
    for j in 0..cols {
        let norm = r.view((j, j), (rows - j, 1)).norm();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(j, j)] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place of the column
        let mut v = r.view((j, j), (rows - j, 1)).clone_owned();
        v[0] -= alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in j..cols {
            let mut dot = 0.0;
            for i in 0..(rows - j) {
                dot += v[i] * r[(j + i, c)];
            }
            let f = 2.0 * dot / vnorm2;
            for i in 0..(rows - j) {
                r[(j + i, c)] -= f * v[i];
            }
        }
    }

    let mut l = DMatrix::<f64>::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            l[(j, i)] = r[(i, j)];
        }
    }
    for j in 0..cols {
        if !(l[(j, j)].abs() > RANK_TOL * max_col_norm) {
            return Err(LinalgError::RankDeficient { column: j });
        }
    }
    Ok(TriangularFactor::normalized(l))
}

/// Rank-1 modification `R·Rᵀ = S·Sᵀ + weight·v·vᵀ`.
///
/// A negative `weight` is a downdate of magnitude `|weight|`; `v` is scaled
/// by `√|weight|` internally.
pub fn chol_rank1_update(
    s: &TriangularFactor,
    v: &DVector<f64>,
    weight: f64,
) -> Result<TriangularFactor, LinalgError> {
    let n = s.order();
    if v.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, actual: v.len() });
    }
    if !weight.is_finite() || v.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let mut l = s.0.clone();
    if weight == 0.0 {
        return Ok(TriangularFactor(l));
    }
    let mut x = v * weight.abs().sqrt();

    if weight > 0.0 {
        // Givens rotations of [L | x]; tolerates zero diagonals.
        for k in 0..n {
            let a = l[(k, k)];
            let b = x[k];
            let r = a.hypot(b);
            if r == 0.0 {
                continue;
            }
            let (c, sn) = (a / r, b / r);
            l[(k, k)] = r;
            for i in (k + 1)..n {
                let lik = l[(i, k)];
                l[(i, k)] = c * lik + sn * x[i];
                x[i] = c * x[i] - sn * lik;
            }
        }
    } else {
        // Hyperbolic rotations in the mixed (stable) form.
        for k in 0..n {
            let a = l[(k, k)];
            let b = x[k];
            if b == 0.0 {
                continue;
            }
            let arg = (a - b) * (a + b);
            if !(arg > 0.0) {
                return Err(LinalgError::DowndateFailure { column: k });
            }
            let r = arg.sqrt();
            let c = r / a;
            let sn = b / a;
            l[(k, k)] = r;
            for i in (k + 1)..n {
                let lik = (l[(i, k)] - sn * x[i]) / c;
                l[(i, k)] = lik;
                x[i] = c * x[i] - sn * lik;
            }
        }
    }
    Ok(TriangularFactor(l))
}

/// Applies `chol_rank1_update` with the same weight to every column of `u`.
pub fn chol_rank1_update_columns(
    s: &TriangularFactor,
    u: &DMatrix<f64>,
    weight: f64,
) -> Result<TriangularFactor, LinalgError> {
    let mut out = s.clone();
    for col in u.column_iter() {
        out = chol_rank1_update(&out, &col.clone_owned(), weight)?;
    }
    Ok(out)
}

fn check_nonsingular(s: &TriangularFactor) -> Result<(), LinalgError> {
    for (index, &value) in s.0.diagonal().iter().enumerate() {
        if !(value.abs() > SINGULAR_TOL) {
            return Err(LinalgError::SingularFactor { index, value });
        }
    }
    Ok(())
}

/// Forward substitution `L·X = B` in place.
fn solve_lower(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut acc = b[(i, c)];
            for k in 0..i {
                acc -= l[(i, k)] * b[(k, c)];
            }
            b[(i, c)] = acc / l[(i, i)];
        }
    }
}

/// Back substitution `Lᵀ·X = B` in place.
fn solve_lower_transposed(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut acc = b[(i, c)];
            for k in (i + 1)..n {
                acc -= l[(k, i)] * b[(k, c)];
            }
            b[(i, c)] = acc / l[(i, i)];
        }
    }
}

/// Solves `op(S)·X = B` (left) or `X·op(S) = B` (right), where `op` is the
/// identity or the transpose.
pub fn triangular_solve(
    s: &TriangularFactor,
    b: &DMatrix<f64>,
    side: Side,
    transpose: bool,
) -> Result<DMatrix<f64>, LinalgError> {
    check_nonsingular(s)?;
    let n = s.order();
    match side {
        Side::Left => {
            if b.nrows() != n {
                return Err(LinalgError::DimensionMismatch { expected: n, actual: b.nrows() });
            }
            let mut x = b.clone();
            if transpose {
                solve_lower_transposed(&s.0, &mut x);
            } else {
                solve_lower(&s.0, &mut x);
            }
            Ok(x)
        }
        Side::Right => {
            if b.ncols() != n {
                return Err(LinalgError::DimensionMismatch { expected: n, actual: b.ncols() });
            }
            // X·S = B  <=>  Sᵀ·Xᵀ = Bᵀ
            let mut xt = b.transpose();
            if transpose {
                solve_lower(&s.0, &mut xt);
            } else {
                solve_lower_transposed(&s.0, &mut xt);
            }
            Ok(xt.transpose())
        }
    }
}

/// `K = P_xy·(S·Sᵀ)⁻¹` via two triangular solves.
pub fn gain_from_factor(p_xy: &DMatrix<f64>, s_y: &TriangularFactor) -> Result<DMatrix<f64>, LinalgError> {
    let tmp = triangular_solve(s_y, p_xy, Side::Right, true)?;
    triangular_solve(s_y, &tmp, Side::Right, false)
}
