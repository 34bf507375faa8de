//! Sparsity-promoting joint filter.
//!
//! After the regular correction, the ℓ₁ norm of the coefficient block is
//! treated as a fictitious measurement observed as zero with noise variance
//! `r_pm`. Pseudo corrections repeat while more than `n_theta_act`
//! coefficients exceed the barrier `lambda_tilde`, up to `max_pseudo_iters`
//! times. The coefficient estimate is then blended with the pre-loop value
//! (`gamma` weight on the latter); the physical states are left untouched.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::TriangularFactor;
use crate::models::DiscreteModel;
use crate::ukf::{self, sigma_points, FilterError, FilterState, NoiseSpec, Prediction, SquareRootUkf, UnscentedParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparsityConfigError {
    #[error("lambda_tilde must be positive, got {0}")]
    Barrier(f64),
    #[error("n_theta_act must lie in 1..={n_theta}, got {value}")]
    ActiveTerms { value: usize, n_theta: usize },
    #[error("max_pseudo_iters must be at least 1")]
    Iterations,
    #[error("gamma must lie strictly between 0 and 1, got {0}")]
    Gamma(f64),
    #[error("r_pm must be positive, got {0}")]
    PseudoNoise(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityConfig {
    /// Magnitude above which a coefficient counts as active.
    pub lambda_tilde: f64,
    /// Number of active coefficients tolerated without pseudo updates.
    pub n_theta_act: usize,
    /// Hard bound on pseudo updates per time step.
    pub max_pseudo_iters: usize,
    /// Weight kept on the pre-loop coefficients when blending.
    pub gamma: f64,
    /// Pseudo-measurement noise variance.
    pub r_pm: f64,
    /// Run the state transition before each pseudo correction.
    pub pseudo_predict: bool,
}

impl Default for SparsityConfig {
    fn default() -> Self {
        Self { lambda_tilde: 0.1, n_theta_act: 3, max_pseudo_iters: 10, gamma: 0.2, r_pm: 1.0, pseudo_predict: true }
    }
}

impl SparsityConfig {
    pub fn validate(&self, n_theta: usize) -> Result<(), SparsityConfigError> {
        if !(self.lambda_tilde > 0.0 && self.lambda_tilde.is_finite()) {
            return Err(SparsityConfigError::Barrier(self.lambda_tilde));
        }
        if self.n_theta_act < 1 || self.n_theta_act > n_theta {
            return Err(SparsityConfigError::ActiveTerms { value: self.n_theta_act, n_theta });
        }
        if self.max_pseudo_iters < 1 {
            return Err(SparsityConfigError::Iterations);
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(SparsityConfigError::Gamma(self.gamma));
        }
        if !(self.r_pm > 0.0 && self.r_pm.is_finite()) {
            return Err(SparsityConfigError::PseudoNoise(self.r_pm));
        }
        Ok(())
    }
}

/// What the pseudo-update loop did within one time step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparsityDiagnostics {
    pub iterations: usize,
    pub active_before: usize,
    pub active_after: usize,
    pub l1_before: f64,
    pub l1_after: f64,
    /// The loop stopped on the iteration bound with too many active terms.
    pub hit_limit: bool,
    /// Set when a pseudo iteration failed; the last valid iterate was kept.
    pub aborted: Option<String>,
}

/// `‖θ‖₁` of the coefficient block (everything after the first `n_x` entries).
pub fn pseudo_measurement(x: &[f64], n_x: usize) -> f64 {
    x[n_x..].iter().map(|v| v.abs()).sum()
}

/// Number of coefficients with `|θᵢ| > barrier`.
pub fn active_count(theta: &[f64], barrier: f64) -> usize {
    theta.iter().filter(|v| v.abs() > barrier).count()
}

fn pseudo_iteration<M: DiscreteModel + ?Sized>(
    state: &FilterState,
    u: f64,
    model: &M,
    filter: &SquareRootUkf,
    sqrt_r_pm: &TriangularFactor,
    n_x: usize,
    config: &SparsityConfig,
) -> Result<FilterState, FilterError> {
    let pred = if config.pseudo_predict {
        filter.predict(state, u, model)?
    } else {
        Prediction {
            x: state.x.clone(),
            s: state.s.clone(),
            points: sigma_points(&state.x, &state.s, filter.params.eta),
            k: state.k,
            repairs: state.repairs,
        }
    };
    let zero = DVector::zeros(1);
    let h = |x: &DVector<f64>, _u: f64| DVector::from_element(1, pseudo_measurement(x.as_slice(), n_x));
    let mut next = ukf::correct(&pred, &zero, u, h, sqrt_r_pm, &filter.params, filter.options)?;
    next.k = state.k;
    Ok(next)
}

/// Pseudo-measurement loop on a corrected state. Never fails: an error inside
/// an iteration ends the loop with the last valid iterate.
pub fn sparsity_loop<M: DiscreteModel + ?Sized>(
    state: &FilterState,
    u: f64,
    model: &M,
    filter: &SquareRootUkf,
    n_x: usize,
    config: &SparsityConfig,
) -> (FilterState, SparsityDiagnostics) {
    let barrier = config.lambda_tilde;
    let theta_active = |s: &FilterState| active_count(&s.x.as_slice()[n_x..], barrier);
    let sqrt_r_pm = TriangularFactor::from_diagonal(&[config.r_pm.sqrt()]).expect("r_pm validated positive");

    let mut current = state.clone();
    let mut diag = SparsityDiagnostics {
        active_before: theta_active(state),
        l1_before: pseudo_measurement(state.x.as_slice(), n_x),
        ..Default::default()
    };
    while theta_active(&current) > config.n_theta_act && diag.iterations < config.max_pseudo_iters {
        match pseudo_iteration(&current, u, model, filter, &sqrt_r_pm, n_x, config) {
            Ok(next) => current = next,
            Err(e) => {
                diag.aborted = Some(e.to_string());
                break;
            }
        }
        diag.iterations += 1;
    }
    diag.active_after = theta_active(&current);
    diag.l1_after = pseudo_measurement(current.x.as_slice(), n_x);
    diag.hit_limit = diag.active_after > config.n_theta_act && diag.iterations >= config.max_pseudo_iters;
    (current, diag)
}

/// Final estimate: factor from the pseudo loop, physical states from the
/// regular correction, coefficients blended `(1−γ)·θ_pm + γ·θ_pre`.
pub fn soft_switch(pre: &FilterState, pm: &FilterState, n_x: usize, gamma: f64) -> FilterState {
    let mut x = pre.x.clone();
    for i in n_x..x.len() {
        x[i] = (1.0 - gamma) * pm.x[i] + gamma * pre.x[i];
    }
    FilterState { x, s: pm.s.clone(), k: pre.k, repairs: pm.repairs }
}

/// The joint filter: a square-root UKF over `(x, θ)` followed by the
/// sparsity loop and soft switching at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSqrtUkf {
    pub filter: SquareRootUkf,
    pub sparsity: SparsityConfig,
    pub n_x: usize,
}

impl JointSqrtUkf {
    pub fn new(
        params: UnscentedParams,
        noise: &NoiseSpec,
        sparsity: SparsityConfig,
        n_x: usize,
    ) -> Result<Self, FilterError> {
        let n_theta = params.dim.checked_sub(n_x).filter(|&n| n > 0).ok_or(FilterError::DimensionMismatch {
            what: "coefficient block",
            expected: n_x + 1,
            actual: params.dim,
        })?;
        sparsity.validate(n_theta).map_err(|e| FilterError::InvalidParams(e.to_string()))?;
        Ok(Self { filter: SquareRootUkf::new(params, noise)?, sparsity, n_x })
    }

    pub fn step<M: DiscreteModel + ?Sized>(
        &self,
        state: &FilterState,
        u: f64,
        y: &DVector<f64>,
        model: &M,
    ) -> Result<(FilterState, SparsityDiagnostics), FilterError> {
        let corrected = self.filter.step(state, u, y, model)?;
        let (pm, diag) = sparsity_loop(&corrected, u, model, &self.filter, self.n_x, &self.sparsity);
        Ok((soft_switch(&corrected, &pm, self.n_x, self.sparsity.gamma), diag))
    }
}

/// `P₀ = blkdiag(p_x·I, p_θ·I)`.
pub fn joint_initial_covariance(n_x: usize, n_theta: usize, p_x: f64, p_theta: f64) -> DMatrix<f64> {
    ukf::block_diag(&(DMatrix::identity(n_x, n_x) * p_x), &(DMatrix::identity(n_theta, n_theta) * p_theta))
}
