//! Square-root unscented Kalman filter.
//!
//! The covariance is carried as a lower-triangular factor `S` with
//! `P = S·Sᵀ`. Prediction triangularizes the weighted sigma-point deviations
//! stacked with `√Q` and folds in the (possibly negative) centre weight with
//! a rank-1 update; correction forms the innovation factor the same way,
//! computes the gain with two triangular solves, and removes `K·S_y` from
//! the predicted factor with rank-1 downdates.
//!
//! When a downdate is numerically indefinite the factor is rebuilt from the
//! nearest positive-definite covariance (eigenvalues clamped at
//! [`EIGEN_FLOOR`]); every such repair is counted on the [`FilterState`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::linalg::{self, chol_rank1_update, cholesky, qr_triangularize, LinalgError, TriangularFactor};
use crate::models::DiscreteModel;

/// Eigenvalue floor used when repairing an indefinite covariance.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("invalid unscented parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("non-finite values after {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which denominator the non-central weights use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// `Wᵢ = 1 / (2(ñ + λ))`; the mean weights sum to one.
    #[default]
    Standard,
    /// `Wᵢ = 1 / (2(ñ + κ))`; sums to one only when `λ = κ`.
    Kappa,
}

/// Scaling parameters and the derived sigma-point weights.
#[derive(Debug, Clone, PartialEq)]
pub struct UnscentedParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub dim: usize,
    pub lambda: f64,
    pub eta: f64,
    pub scheme: WeightScheme,
    wm: Vec<f64>,
    wc: Vec<f64>,
}

impl UnscentedParams {
    pub fn new(alpha: f64, beta: f64, kappa: f64, dim: usize, scheme: WeightScheme) -> Result<Self, FilterError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(FilterError::InvalidParams(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if dim == 0 {
            return Err(FilterError::InvalidParams("state dimension must be positive".into()));
        }
        if !beta.is_finite() || !kappa.is_finite() {
            return Err(FilterError::InvalidParams("beta and kappa must be finite".into()));
        }
        let n = dim as f64;
        // n + λ = α²(n + κ), formed directly to avoid cancellation for small α
        let spread = alpha * alpha * (n + kappa);
        let lambda = spread - n;
        if !(spread > 0.0) {
            return Err(FilterError::InvalidParams(format!("n + lambda = {spread} is not positive")));
        }
        let eta = spread.sqrt();
        let wi = match scheme {
            WeightScheme::Standard => 1.0 / (2.0 * spread),
            WeightScheme::Kappa => {
                if !(n + kappa > 0.0) {
                    return Err(FilterError::InvalidParams(format!("n + kappa = {} is not positive", n + kappa)));
                }
                1.0 / (2.0 * (n + kappa))
            }
        };
        let w0m = 1.0 - n / spread;
        let w0c = w0m + 1.0 - alpha * alpha + beta;
        let count = 2 * dim + 1;
        let mut wm = vec![wi; count];
        let mut wc = vec![wi; count];
        wm[0] = w0m;
        wc[0] = w0c;
        Ok(Self { alpha, beta, kappa, dim, lambda, eta, scheme, wm, wc })
    }

    /// `α = 10⁻³`, `β = 2`, `κ = 0` with standard weights.
    pub fn default_for(dim: usize) -> Result<Self, FilterError> {
        Self::new(1e-3, 2.0, 0.0, dim, WeightScheme::Standard)
    }

    pub fn mean_weights(&self) -> &[f64] {
        &self.wm
    }

    pub fn cov_weights(&self) -> &[f64] {
        &self.wc
    }
}

/// `2ñ+1` sigma points stored as matrix columns; column 0 is the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoints(DMatrix<f64>);

impl SigmaPoints {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.0.column(i).clone_owned()
    }

    pub fn weighted_mean(&self, weights: &[f64]) -> DVector<f64> {
        let mut mean = DVector::zeros(self.0.nrows());
        for (col, &w) in self.0.column_iter().zip(weights) {
            mean.axpy(w, &col, 1.0);
        }
        mean
    }

    /// Applies `f` to every point.
    pub fn map(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> SigmaPoints {
        let cols: Vec<DVector<f64>> = self.0.column_iter().map(|c| f(&c.clone_owned())).collect();
        SigmaPoints(DMatrix::from_columns(&cols))
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// `[x̂, x̂ + η·S, x̂ − η·S]`.
pub fn sigma_points(x: &DVector<f64>, s: &TriangularFactor, eta: f64) -> SigmaPoints {
    let n = x.len();
    let mut m = DMatrix::zeros(n, 2 * n + 1);
    m.set_column(0, x);
    for j in 0..n {
        let d = s.as_matrix().column(j) * eta;
        m.set_column(1 + j, &(x + &d));
        m.set_column(1 + n + j, &(x - &d));
    }
    SigmaPoints(m)
}

/// Estimate, square-root covariance and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: DVector<f64>,
    pub s: TriangularFactor,
    pub k: usize,
    /// Number of covariance repairs performed so far.
    pub repairs: usize,
}

impl FilterState {
    /// Initializes with `S₀ = chol(P₀)`.
    pub fn new(x0: DVector<f64>, p0: &DMatrix<f64>) -> Result<Self, FilterError> {
        if p0.nrows() != x0.len() {
            return Err(FilterError::DimensionMismatch { what: "initial covariance", expected: x0.len(), actual: p0.nrows() });
        }
        Ok(Self { s: cholesky(p0)?, x: x0, k: 0, repairs: 0 })
    }

    pub fn from_factor(x: DVector<f64>, s: TriangularFactor) -> Self {
        Self { x, s, k: 0, repairs: 0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.s.reconstruct()
    }
}

/// Block-diagonal process noise `Q̃ = blkdiag(Q_x, Q_θ)` and measurement noise `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl NoiseSpec {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        Self { q, r }
    }

    pub fn joint(q_x: &DMatrix<f64>, q_theta: &DMatrix<f64>, r: DMatrix<f64>) -> Self {
        Self { q: block_diag(q_x, q_theta), r }
    }

    /// Scaled identities: `Q̃ = blkdiag(q_x·I, q_θ·I)`, `R = r·I`.
    pub fn isotropic(n_x: usize, n_theta: usize, m: usize, q_x: f64, q_theta: f64, r: f64) -> Self {
        Self::joint(
            &(DMatrix::identity(n_x, n_x) * q_x),
            &(DMatrix::identity(n_theta, n_theta) * q_theta),
            DMatrix::identity(m, m) * r,
        )
    }
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut(a.shape(), b.shape()).copy_from(b);
    m
}

/// Square root of a noise covariance; the zero matrix maps to a zero factor.
pub fn noise_factor(q: &DMatrix<f64>) -> Result<TriangularFactor, FilterError> {
    if !q.is_square() {
        return Err(LinalgError::NotSquare { rows: q.nrows(), cols: q.ncols() }.into());
    }
    if q.iter().all(|&v| v == 0.0) {
        return Ok(TriangularFactor::zeros(q.nrows()));
    }
    Ok(cholesky(q)?)
}

/// Output of the prediction half-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub x: DVector<f64>,
    pub s: TriangularFactor,
    /// Sigma points after the transition.
    pub points: SigmaPoints,
    pub k: usize,
    pub repairs: usize,
}

/// Rebuilds a factor for the symmetric part of `p` with eigenvalues clamped
/// from below.
pub fn nearest_spd_factor(p: &DMatrix<f64>) -> Result<TriangularFactor, FilterError> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(FilterError::NonFinite("covariance repair"));
    }
    let sym = (p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    // keep the clamped spectrum above the Cholesky pivot threshold
    let floor = EIGEN_FLOOR * (10.0 * top).max(1.0);
    let clamped = eig.eigenvalues.map(|v| v.max(floor));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    let rebuilt = (&rebuilt + rebuilt.transpose()) * 0.5;
    Ok(cholesky(&rebuilt)?)
}

fn update_or_repair(
    s: &TriangularFactor,
    v: &DVector<f64>,
    weight: f64,
    repairs: &mut usize,
) -> Result<TriangularFactor, FilterError> {
    match chol_rank1_update(s, v, weight) {
        Ok(f) => Ok(f),
        Err(LinalgError::DowndateFailure { .. }) => {
            *repairs += 1;
            nearest_spd_factor(&(s.reconstruct() + v * v.transpose() * weight))
        }
        Err(e) => Err(e.into()),
    }
}

/// `qr([√W₁·(points₁..₂ₙ − mean), √N])` followed by the rank-1 update with the
/// centre deviation and `W₀⁽ᶜ⁾`.
fn sqrt_covariance(
    points: &DMatrix<f64>,
    mean: &DVector<f64>,
    noise: &TriangularFactor,
    params: &UnscentedParams,
    repairs: &mut usize,
) -> Result<TriangularFactor, FilterError> {
    let dim = points.nrows();
    let count = points.ncols();
    let wc = params.cov_weights();
    let w1 = wc[1];
    if !(w1 >= 0.0) {
        return Err(FilterError::InvalidParams(format!("non-central weight {w1} is negative")));
    }
    let sw = w1.sqrt();
    // compound matrix stored transposed: rows are the columns of [..]
    let mut stacked = DMatrix::zeros(count - 1 + dim, dim);
    for i in 1..count {
        let dev = (points.column(i) - mean) * sw;
        stacked.set_row(i - 1, &dev.transpose());
    }
    for j in 0..dim {
        stacked.set_row(count - 1 + j, &noise.as_matrix().column(j).transpose());
    }
    let s = qr_triangularize(&stacked)?;
    let centre = points.column(0) - mean;
    update_or_repair(&s, &centre, wc[0], repairs)
}

/// Prediction: propagate sigma points, form the mean and the square-root
/// covariance.
pub fn predict<F>(
    state: &FilterState,
    u: f64,
    transition: F,
    sqrt_q: &TriangularFactor,
    params: &UnscentedParams,
) -> Result<Prediction, FilterError>
where
    F: Fn(&DVector<f64>, f64) -> DVector<f64>,
{
    let n = state.dim();
    if params.dim != n {
        return Err(FilterError::DimensionMismatch { what: "unscented parameters", expected: n, actual: params.dim });
    }
    if sqrt_q.order() != n {
        return Err(FilterError::DimensionMismatch { what: "process noise", expected: n, actual: sqrt_q.order() });
    }
    let chi = sigma_points(&state.x, &state.s, params.eta);
    let propagated = chi.map(|p| transition(p, u));
    if propagated.as_matrix().nrows() != n {
        return Err(FilterError::DimensionMismatch {
            what: "transition output",
            expected: n,
            actual: propagated.as_matrix().nrows(),
        });
    }
    if !propagated.is_finite() {
        return Err(FilterError::NonFinite("state transition"));
    }
    let x_pred = propagated.weighted_mean(params.mean_weights());
    let mut repairs = state.repairs;
    let s_pred = sqrt_covariance(propagated.as_matrix(), &x_pred, sqrt_q, params, &mut repairs)?;
    Ok(Prediction { x: x_pred, s: s_pred, points: propagated, k: state.k, repairs })
}

/// Options that change how the correction treats the predicted sigma points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrectionOptions {
    /// Redraw sigma points from `(x̂⁻, S⁻)` before applying the measurement
    /// map, so the process noise is reflected in `P_yy` and `P_xy`. When
    /// false the transition outputs are reused directly.
    pub redraw_sigma_points: bool,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self { redraw_sigma_points: true }
    }
}

/// Measurement correction.
#[allow(clippy::too_many_arguments)]
pub fn correct<H>(
    pred: &Prediction,
    y: &DVector<f64>,
    u: f64,
    observe: H,
    sqrt_r: &TriangularFactor,
    params: &UnscentedParams,
    options: CorrectionOptions,
) -> Result<FilterState, FilterError>
where
    H: Fn(&DVector<f64>, f64) -> DVector<f64>,
{
    let m = y.len();
    if sqrt_r.order() != m {
        return Err(FilterError::DimensionMismatch { what: "measurement noise", expected: m, actual: sqrt_r.order() });
    }
    let chi = if options.redraw_sigma_points {
        sigma_points(&pred.x, &pred.s, params.eta)
    } else {
        pred.points.clone()
    };
    let ys = chi.map(|p| observe(p, u));
    if ys.as_matrix().nrows() != m {
        return Err(FilterError::DimensionMismatch { what: "measurement", expected: m, actual: ys.as_matrix().nrows() });
    }
    if !ys.is_finite() {
        return Err(FilterError::NonFinite("measurement map"));
    }
    let y_pred = ys.weighted_mean(params.mean_weights());
    let mut repairs = pred.repairs;
    let s_y = sqrt_covariance(ys.as_matrix(), &y_pred, sqrt_r, params, &mut repairs)?;

    let wc = params.cov_weights();
    let mut p_xy = DMatrix::zeros(pred.x.len(), m);
    for (i, &w) in wc.iter().enumerate() {
        let dx = chi.as_matrix().column(i) - &pred.x;
        let dy = ys.as_matrix().column(i) - &y_pred;
        p_xy += dx * dy.transpose() * w;
    }

    let gain = linalg::gain_from_factor(&p_xy, &s_y)?;
    let x = &pred.x + &gain * (y - &y_pred);
    let u_mat = &gain * s_y.as_matrix();

    let mut s = pred.s.clone();
    for col in u_mat.column_iter() {
        match chol_rank1_update(&s, &col.clone_owned(), -1.0) {
            Ok(next) => s = next,
            Err(LinalgError::DowndateFailure { .. }) => {
                repairs += 1;
                let p = pred.s.reconstruct() - &u_mat * u_mat.transpose();
                s = nearest_spd_factor(&p)?;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FilterError::NonFinite("correction"));
    }
    Ok(FilterState { x, s, k: pred.k + 1, repairs })
}

/// A configured filter: weights, noise factors (computed once) and options.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareRootUkf {
    pub params: UnscentedParams,
    pub sqrt_q: TriangularFactor,
    pub sqrt_r: TriangularFactor,
    pub options: CorrectionOptions,
}

impl SquareRootUkf {
    pub fn new(params: UnscentedParams, noise: &NoiseSpec) -> Result<Self, FilterError> {
        let sqrt_q = noise_factor(&noise.q)?;
        let sqrt_r = noise_factor(&noise.r)?;
        if sqrt_q.order() != params.dim {
            return Err(FilterError::DimensionMismatch { what: "process noise", expected: params.dim, actual: sqrt_q.order() });
        }
        Ok(Self { params, sqrt_q, sqrt_r, options: CorrectionOptions::default() })
    }

    pub fn with_options(mut self, options: CorrectionOptions) -> Self {
        self.options = options;
        self
    }

    pub fn predict<M: DiscreteModel + ?Sized>(&self, state: &FilterState, u: f64, model: &M) -> Result<Prediction, FilterError> {
        predict(state, u, |x, u| model.transition(x, u), &self.sqrt_q, &self.params)
    }

    pub fn correct<M: DiscreteModel + ?Sized>(
        &self,
        pred: &Prediction,
        y: &DVector<f64>,
        u: f64,
        model: &M,
    ) -> Result<FilterState, FilterError> {
        correct(pred, y, u, |x, u| model.observe(x, u), &self.sqrt_r, &self.params, self.options)
    }

    /// One full iteration: predict with `u` (the input applied over the
    /// step) and correct with the measurement `y` taken at its end.
    pub fn step<M: DiscreteModel + ?Sized>(
        &self,
        state: &FilterState,
        u: f64,
        y: &DVector<f64>,
        model: &M,
    ) -> Result<FilterState, FilterError> {
        let pred = self.predict(state, u, model)?;
        self.correct(&pred, y, u, model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn symmetric_weights_for_unit_alpha() {
        let p = UnscentedParams::new(1.0, 0.0, 0.0, 2, WeightScheme::Standard).unwrap();
        assert_eq!(p.lambda, 0.0);
        assert_eq!(p.mean_weights(), &[0.0, 0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn small_alpha_weights() {
        let p = UnscentedParams::new(1e-3, 2.0, 0.0, 3, WeightScheme::Standard).unwrap();
        // exact: λ = 3e-6 − 3, W₀ = 1 − 1e6, Wᵢ = 1 / 6e-6
        assert!((p.lambda + 2.999997).abs() < 1e-12);
        assert!((p.mean_weights()[0] / -999_999.0 - 1.0).abs() < 1e-12);
        assert!((p.mean_weights()[1] / 166_666.666_666_666_7 - 1.0).abs() < 1e-12);
        assert!((p.cov_weights()[0] - (p.mean_weights()[0] + 3.0 - 1e-6)).abs() < 1e-9);
        let sum: f64 = p.mean_weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kappa_weights_use_kappa_denominator() {
        let p = UnscentedParams::new(0.5, 2.0, 1.0, 2, WeightScheme::Kappa).unwrap();
        assert_eq!(p.mean_weights()[1], 1.0 / 6.0);
        let sum: f64 = p.mean_weights().iter().sum();
        // λ = 0.25·3 − 2 = −1.25 ≠ κ
        assert!((sum - 1.0).abs() > 0.1);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(UnscentedParams::new(0.0, 2.0, 0.0, 2, WeightScheme::Standard).is_err());
        assert!(UnscentedParams::new(1.5, 2.0, 0.0, 2, WeightScheme::Standard).is_err());
        assert!(UnscentedParams::new(1.0, 2.0, -3.0, 2, WeightScheme::Standard).is_err());
        assert!(UnscentedParams::new(1.0, 2.0, 0.0, 0, WeightScheme::Standard).is_err());
    }

    #[test]
    fn sigma_point_layout() {
        let p = UnscentedParams::default_for(1).unwrap();
        assert!((p.eta - 1e-3).abs() < 1e-15);
        let pts = sigma_points(&DVector::zeros(1), &TriangularFactor::identity(1), p.eta);
        assert_eq!(pts.as_matrix().as_slice(), &[0.0, p.eta, -p.eta]);

        let x = DVector::from_vec(vec![1.0, -2.0]);
        let zero = sigma_points(&x, &TriangularFactor::zeros(2), 3.0);
        for i in 0..zero.len() {
            assert_eq!(zero.point(i), x);
        }

        let s = TriangularFactor::from_lower(dmatrix![1.0, 0.0; 0.5, 2.0]).unwrap();
        let p = UnscentedParams::new(1.0, 2.0, 1.0, 2, WeightScheme::Standard).unwrap();
        let pts = sigma_points(&x, &s, p.eta);
        assert_eq!(pts.point(0), x);
        for j in 1..=2 {
            assert_eq!(pts.point(j) + pts.point(j + 2), &x * 2.0);
        }
        let mean = pts.weighted_mean(p.mean_weights());
        assert!((mean - x).norm() < 1e-14);
    }

    #[test]
    fn identity_prediction_preserves_moments() {
        let p = UnscentedParams::default_for(2).unwrap();
        let s0 = TriangularFactor::from_lower(dmatrix![0.3, 0.0; -0.1, 0.2]).unwrap();
        let state = FilterState::from_factor(DVector::from_vec(vec![0.5, 1.5]), s0.clone());
        let pred = predict(&state, 0.0, |x, _| x.clone(), &TriangularFactor::zeros(2), &p).unwrap();
        assert!((&pred.x - &state.x).norm() < 1e-10);
        let err = (pred.s.reconstruct() - s0.reconstruct()).abs().max();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn uninformative_measurement_leaves_prediction() {
        let p = UnscentedParams::default_for(2).unwrap();
        let s0 = TriangularFactor::from_lower(dmatrix![0.3, 0.0; -0.1, 0.2]).unwrap();
        let state = FilterState::from_factor(DVector::from_vec(vec![0.5, 1.5]), s0);
        let sqrt_q = TriangularFactor::from_diagonal(&[0.01, 0.01]).unwrap();
        let pred = predict(&state, 0.0, |x, _| x.clone(), &sqrt_q, &p).unwrap();
        let sqrt_r = TriangularFactor::from_diagonal(&[1e6]).unwrap();
        let y = DVector::from_element(1, 3.0);
        let post = correct(&pred, &y, 0.0, |x, _| DVector::from_element(1, x[0]), &sqrt_r, &p, CorrectionOptions::default())
            .unwrap();
        assert!((&post.x - &pred.x).norm() / pred.x.norm() < 1e-6);
        let rel = (post.s.reconstruct() - pred.s.reconstruct()).norm() / pred.s.reconstruct().norm();
        assert!(rel < 1e-6);
    }

    #[test]
    fn scalar_random_walk_matches_closed_form() {
        let p = UnscentedParams::default_for(1).unwrap();
        let (q, r) = (0.04, 0.25);
        let noise = NoiseSpec::new(dmatrix![q], dmatrix![r]);
        let ukf = SquareRootUkf::new(p, &noise).unwrap();
        struct Walk;
        impl DiscreteModel for Walk {
            fn state_dim(&self) -> usize {
                1
            }
            fn measurement_dim(&self) -> usize {
                1
            }
            fn transition(&self, x: &DVector<f64>, _u: f64) -> DVector<f64> {
                x.clone()
            }
            fn observe(&self, x: &DVector<f64>, _u: f64) -> DVector<f64> {
                x.clone()
            }
        }
        let mut state = FilterState::new(DVector::from_element(1, 0.0), &dmatrix![1.0]).unwrap();
        let (mut xk, mut pk) = (0.0, 1.0);
        for (k, &y) in [0.3, -0.1, 0.8, 0.5, 0.45].iter().enumerate() {
            state = ukf.step(&state, 0.0, &DVector::from_element(1, y), &Walk).unwrap();
            let pp = pk + q;
            let gain = pp / (pp + r);
            xk += gain * (y - xk);
            pk = (1.0 - gain) * pp;
            assert!((state.x[0] - xk).abs() < 1e-8, "step {k}");
            assert!((state.covariance()[(0, 0)] - pk).abs() < 1e-8, "step {k}");
        }
    }

    #[test]
    fn repair_clamps_negative_spectrum() {
        let p = dmatrix![1.0, 0.0; 0.0, -1e-3];
        let s = nearest_spd_factor(&p).unwrap();
        let rec = s.reconstruct();
        assert!((rec[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(rec[(1, 1)] > 0.0 && rec[(1, 1)] < 1e-9);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let p = UnscentedParams::default_for(3).unwrap();
        let noise = NoiseSpec::new(DMatrix::identity(2, 2), DMatrix::identity(1, 1));
        assert!(matches!(SquareRootUkf::new(p, &noise), Err(FilterError::DimensionMismatch { .. })));
        assert!(FilterState::new(DVector::zeros(2), &DMatrix::identity(3, 3)).is_err());
    }
}
