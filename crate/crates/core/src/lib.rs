//! Square-root unscented Kalman filtering with joint, sparsity-promoting
//! estimation of unknown partial dynamics.
//!
//! The physical state `x` is augmented with coefficients `θ` of a library of
//! candidate functions `Ψ(x, u)`; the filter estimates both while an ℓ₁
//! pseudo measurement keeps the number of active coefficients small, so the
//! identified correction `θᵀΨ` stays interpretable.
//!
//! Modules, bottom up:
//!
//! - [`linalg`]: Cholesky, QR triangularization, rank-1 update/downdate and
//!   triangular solves on lower-triangular factors.
//! - [`library`]: candidate function libraries and coefficient reports.
//! - [`models`]: discrete models, the Duffing and golf-robot benchmarks,
//!   Euler and RK4 stepping, and the joint model.
//! - [`ukf`]: the square-root UKF.
//! - [`sparse`]: the pseudo-measurement loop and soft switching.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod expr;
pub mod library;
pub mod linalg;
pub mod models;
pub mod sparse;
pub mod ukf;

pub use expr::ParseError;
pub use library::{CoefficientReport, FunctionLibrary, LibraryError, LibraryTerm};
pub use linalg::{LinalgError, TriangularFactor};
pub use models::{Benchmark, DiscreteModel, Duffing, Golf, GolfParams, JointModel, PartialDynamics};
pub use sparse::{JointSqrtUkf, SparsityConfig, SparsityDiagnostics};
pub use ukf::{FilterError, FilterState, NoiseSpec, SquareRootUkf, UnscentedParams, WeightScheme};
