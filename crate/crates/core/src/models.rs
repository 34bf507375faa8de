//! Discrete-time models, the two benchmark systems and the joint model that
//! appends library coefficients to the physical state.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::library::FunctionLibrary;

/// Standard gravity in m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("library has {terms} terms but needs at least {required} (constant, every state, and the input)")]
    LibraryTooSmall { terms: usize, required: usize },
    #[error("sampling time must be positive and finite, got {0}")]
    InvalidStep(f64),
}

/// `x_{k+1} = f(x_k, u_k)`, `y_k = h(x_k, u_k)`; noise is added elsewhere.
pub trait DiscreteModel {
    fn state_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;
    fn transition(&self, x: &DVector<f64>, u: f64) -> DVector<f64>;
    fn observe(&self, x: &DVector<f64>, u: f64) -> DVector<f64>;
}

/// Continuous dynamics with one scalar term that may be unknown.
///
/// The unknown term `g` enters with a negative sign, i.e. the complete model
/// is `derivative_with_g(x, u, unknown_term(x, u))` and the incomplete model
/// is `derivative_with_g(x, u, 0)`.
pub trait PartialDynamics {
    fn state_dim(&self) -> usize;
    fn derivative_with_g(&self, x: &[f64], u: f64, g: f64) -> DVector<f64>;
    fn unknown_term(&self, x: &[f64], u: f64) -> f64;

    fn derivative(&self, x: &[f64], u: f64) -> DVector<f64> {
        self.derivative_with_g(x, u, self.unknown_term(x, u))
    }
}

/// Duffing oscillator `ẍ = −p₃ẋ − p₁x − p₂x³ + u`.
pub fn duffing_derivative(x: &[f64], u: f64, p: &[f64; 3]) -> DVector<f64> {
    DVector::from_vec(vec![x[1], -p[2] * x[1] - p[0] * x[0] - p[1] * x[0].powi(3) + u])
}

/// Golf-robot parameters: mass, lever arm, viscous damping, inertia,
/// friction radius and friction coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GolfParams {
    pub m: f64,
    pub a: f64,
    pub d: f64,
    pub j: f64,
    pub r: f64,
    pub mu: f64,
}

impl Default for GolfParams {
    /// Stand-in magnitudes for a small striking arm, dominated by bearing
    /// friction rather than viscous damping.
    fn default() -> Self {
        Self { m: 1.0, a: 0.3, d: 0.01, j: 0.1, r: 0.1, mu: 0.3 }
    }
}

/// Friction torque `M_F` of the golf robot.
pub fn golf_friction(x: &[f64], p: &GolfParams) -> f64 {
    let load = p.m * x[1] * x[1] * p.a + p.m * GRAVITY * x[0].cos();
    p.d * x[1] + 2.0 * p.r * p.mu * (1e3 * x[1]).atan() / PI * load.abs()
}

/// Golf robot `J·ẍ = −m·g·a·sin(x₁) − M_F + 4u`.
pub fn golf_derivative(x: &[f64], u: f64, p: &GolfParams) -> DVector<f64> {
    golf_with_g(x, u, p, golf_friction(x, p))
}

fn golf_with_g(x: &[f64], u: f64, p: &GolfParams, g: f64) -> DVector<f64> {
    DVector::from_vec(vec![x[1], (-p.m * GRAVITY * p.a * x[0].sin() - g + 4.0 * u) / p.j])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Duffing {
    pub p: [f64; 3],
}

impl Default for Duffing {
    fn default() -> Self {
        Self { p: [-1.0, 3.0, 0.1] }
    }
}

impl PartialDynamics for Duffing {
    fn state_dim(&self) -> usize {
        2
    }

    fn derivative_with_g(&self, x: &[f64], u: f64, g: f64) -> DVector<f64> {
        let p = &self.p;
        DVector::from_vec(vec![x[1], -p[2] * x[1] - p[0] * x[0] - g + u])
    }

    /// The cubic stiffness `p₂x₁³`.
    fn unknown_term(&self, x: &[f64], _u: f64) -> f64 {
        self.p[1] * x[0].powi(3)
    }

    fn derivative(&self, x: &[f64], u: f64) -> DVector<f64> {
        duffing_derivative(x, u, &self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Golf {
    pub p: GolfParams,
}

impl PartialDynamics for Golf {
    fn state_dim(&self) -> usize {
        2
    }

    fn derivative_with_g(&self, x: &[f64], u: f64, g: f64) -> DVector<f64> {
        golf_with_g(x, u, &self.p, g)
    }

    /// The friction torque `M_F`.
    fn unknown_term(&self, x: &[f64], _u: f64) -> f64 {
        golf_friction(x, &self.p)
    }

    fn derivative(&self, x: &[f64], u: f64) -> DVector<f64> {
        golf_derivative(x, u, &self.p)
    }
}

/// Either benchmark, selected at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Benchmark {
    Duffing(Duffing),
    Golf(Golf),
}

impl PartialDynamics for Benchmark {
    fn state_dim(&self) -> usize {
        2
    }

    fn derivative_with_g(&self, x: &[f64], u: f64, g: f64) -> DVector<f64> {
        match self {
            Benchmark::Duffing(b) => b.derivative_with_g(x, u, g),
            Benchmark::Golf(b) => b.derivative_with_g(x, u, g),
        }
    }

    fn unknown_term(&self, x: &[f64], u: f64) -> f64 {
        match self {
            Benchmark::Duffing(b) => b.unknown_term(x, u),
            Benchmark::Golf(b) => b.unknown_term(x, u),
        }
    }

    fn derivative(&self, x: &[f64], u: f64) -> DVector<f64> {
        match self {
            Benchmark::Duffing(b) => b.derivative(x, u),
            Benchmark::Golf(b) => b.derivative(x, u),
        }
    }
}

/// Classical fourth-order Runge–Kutta step with the input held constant.
pub fn rk4_step<F>(derivative: F, x: &DVector<f64>, u: f64, dt: f64) -> DVector<f64>
where
    F: Fn(&[f64], f64) -> DVector<f64>,
{
    let k1 = derivative(x.as_slice(), u);
    let k2 = derivative((x + &k1 * (0.5 * dt)).as_slice(), u);
    let k3 = derivative((x + &k2 * (0.5 * dt)).as_slice(), u);
    let k4 = derivative((x + &k3 * dt).as_slice(), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Explicit Euler step `x + dt·ẋ`.
pub fn euler_step<F>(derivative: F, x: &DVector<f64>, u: f64, dt: f64) -> DVector<f64>
where
    F: Fn(&[f64], f64) -> DVector<f64>,
{
    x + derivative(x.as_slice(), u) * dt
}

/// Measurement map shared by the models in this module.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// `y = x₁`
    FirstState,
    /// `y = H·x` on the physical state
    Linear(DMatrix<f64>),
}

impl Observation {
    pub fn dim(&self) -> usize {
        match self {
            Observation::FirstState => 1,
            Observation::Linear(h) => h.nrows(),
        }
    }

    /// Applies the map to the leading components of `x`.
    pub fn apply(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Observation::FirstState => DVector::from_element(1, x[0]),
            Observation::Linear(h) => h * DVector::from_column_slice(&x[..h.ncols()]),
        }
    }
}

/// Explicit-Euler discretization of a continuous vector field.
pub struct EulerModel<F> {
    derivative: F,
    state_dim: usize,
    dt: f64,
    observation: Observation,
}

impl<F> EulerModel<F>
where
    F: Fn(&[f64], f64) -> DVector<f64>,
{
    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Wraps `derivative` as a discrete model with `transition(x,u) = x + dt·ẋ`.
pub fn euler_discretize<F>(
    derivative: F,
    state_dim: usize,
    dt: f64,
    observation: Observation,
) -> Result<EulerModel<F>, ModelError>
where
    F: Fn(&[f64], f64) -> DVector<f64>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ModelError::InvalidStep(dt));
    }
    Ok(EulerModel { derivative, state_dim, dt, observation })
}

impl<F> DiscreteModel for EulerModel<F>
where
    F: Fn(&[f64], f64) -> DVector<f64>,
{
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn measurement_dim(&self) -> usize {
        self.observation.dim()
    }

    fn transition(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        euler_step(&self.derivative, x, u, self.dt)
    }

    fn observe(&self, x: &DVector<f64>, _u: f64) -> DVector<f64> {
        self.observation.apply(x.as_slice())
    }
}

/// The filter's model of a benchmark with its unknown term removed.
#[allow(clippy::type_complexity)]
pub fn incomplete_model<D: PartialDynamics>(
    dynamics: &D,
    dt: f64,
) -> Result<EulerModel<impl Fn(&[f64], f64) -> DVector<f64> + '_>, ModelError> {
    euler_discretize(
        move |x: &[f64], u: f64| dynamics.derivative_with_g(x, u, 0.0),
        dynamics.state_dim(),
        dt,
        Observation::FirstState,
    )
}

/// Joint model over `(x, θ)`: the physical part is stepped with
/// `g = θᵀΨ(x, u)` injected, the coefficients stay constant.
#[derive(Debug, Clone)]
pub struct JointModel<D> {
    dynamics: D,
    library: FunctionLibrary,
    dt: f64,
    observation: Observation,
}

pub fn make_joint_model<D: PartialDynamics>(
    dynamics: D,
    library: FunctionLibrary,
    dt: f64,
) -> Result<JointModel<D>, ModelError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ModelError::InvalidStep(dt));
    }
    let n_x = dynamics.state_dim();
    if library.required_state_dim() > n_x {
        return Err(ModelError::DimensionMismatch { expected: n_x, actual: library.required_state_dim() });
    }
    if library.len() < n_x + 2 {
        return Err(ModelError::LibraryTooSmall { terms: library.len(), required: n_x + 2 });
    }
    Ok(JointModel { dynamics, library, dt, observation: Observation::FirstState })
}

impl<D: PartialDynamics> JointModel<D> {
    pub fn physical_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn library(&self) -> &FunctionLibrary {
        &self.library
    }

    pub fn dynamics(&self) -> &D {
        &self.dynamics
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Current estimate of the unknown term. Non-finite library values
    /// propagate as NaN so the filter can detect them.
    fn injected(&self, x: &[f64], theta: &[f64], u: f64) -> f64 {
        self.library.terms().iter().zip(theta).map(|(t, c)| c * t.eval(x, u)).sum()
    }
}

impl<D: PartialDynamics> DiscreteModel for JointModel<D> {
    fn state_dim(&self) -> usize {
        self.dynamics.state_dim() + self.library.len()
    }

    fn measurement_dim(&self) -> usize {
        self.observation.dim()
    }

    fn transition(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        let n_x = self.dynamics.state_dim();
        let (phys, theta) = x.as_slice().split_at(n_x);
        let g = self.injected(phys, theta, u);
        let dx = self.dynamics.derivative_with_g(phys, u, g);
        let mut out = x.clone();
        for i in 0..n_x {
            out[i] = phys[i] + self.dt * dx[i];
        }
        out
    }

    fn observe(&self, x: &DVector<f64>, _u: f64) -> DVector<f64> {
        self.observation.apply(&x.as_slice()[..self.dynamics.state_dim()])
    }
}
