//! Paired SQ-UKF / J-SQ-UKF runs on one measurement realization.

use nalgebra::{DMatrix, DVector};
use sparse_ukf::models::{incomplete_model, make_joint_model, PartialDynamics};
use sparse_ukf::sparse::{joint_initial_covariance, JointSqrtUkf, SparsityConfig, SparsityDiagnostics};
use sparse_ukf::ukf::{CorrectionOptions, FilterError, FilterState, NoiseSpec, SquareRootUkf, UnscentedParams};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::metrics::{summarize, MetricsError, MetricsSummary};
use crate::sim::{simulate_truth, Simulation};

/// Consecutive failed steps after which a filter counts as irrecoverable.
pub const MAX_CONSECUTIVE_FAILURES: usize = 10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("filter setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One row of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub truth: Vec<f64>,
    pub y: f64,
    pub sq: Vec<f64>,
    pub jsq: Vec<f64>,
    pub theta: Vec<f64>,
    pub active: Vec<bool>,
    /// `None` on the initial record.
    pub sparsity: Option<SparsityDiagnostics>,
}

impl StepRecord {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn pseudo_iters(&self) -> usize {
        self.sparsity.as_ref().map_or(0, |d| d.iterations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Sq,
    Jsq,
}

impl FilterKind {
    pub fn label(self) -> &'static str {
        match self {
            FilterKind::Sq => "SQ-UKF",
            FilterKind::Jsq => "J-SQ-UKF",
        }
    }
}

/// A failed filter step. The filter keeps its previous estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub step: usize,
    pub filter: FilterKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub n_x: usize,
    pub term_names: Vec<String>,
    pub barrier: f64,
    pub dt: f64,
    pub records: Vec<StepRecord>,
    pub failures: Vec<StepFailure>,
    /// Why the run stopped early, if it did.
    pub termination: Option<String>,
    pub sq_repairs: usize,
    pub jsq_repairs: usize,
}

impl RunTrace {
    pub fn n_theta(&self) -> usize {
        self.term_names.len()
    }

    pub fn is_complete(&self) -> bool {
        self.termination.is_none()
    }
}

fn finite(state: &FilterState) -> bool {
    state.x.iter().all(|v| v.is_finite()) && state.s.as_matrix().iter().all(|v| v.is_finite())
}

struct Tracked {
    state: FilterState,
    consecutive: usize,
}

impl Tracked {
    /// Applies a step result; returns false once the filter is irrecoverable.
    fn apply(
        &mut self,
        result: Result<FilterState, FilterError>,
        step: usize,
        kind: FilterKind,
        failures: &mut Vec<StepFailure>,
    ) -> bool {
        let message = match result {
            Ok(next) if finite(&next) => {
                self.state = next;
                self.consecutive = 0;
                return true;
            }
            Ok(_) => "non-finite filter state".to_string(),
            Err(e) => e.to_string(),
        };
        failures.push(StepFailure { step, filter: kind, message });
        self.state.k = step;
        self.consecutive += 1;
        self.consecutive < MAX_CONSECUTIVE_FAILURES
    }
}

fn params(config: &ExperimentConfig, dim: usize) -> Result<UnscentedParams, RunError> {
    let u = config.unscented;
    UnscentedParams::new(u.alpha, u.beta, u.kappa, dim, u.scheme()).map_err(|e| RunError::Setup(e.to_string()))
}

fn setup(e: impl ToString) -> RunError {
    RunError::Setup(e.to_string())
}

/// Runs both filters over an already simulated truth.
pub fn run_filters(config: &ExperimentConfig, sim: &Simulation) -> Result<RunTrace, RunError> {
    config.validate()?;
    let dynamics = config.benchmark_model();
    let library = config.library()?;
    let n_x = dynamics.state_dim();
    let n_theta = library.len();
    let term_names: Vec<String> = library.names().iter().map(|s| s.to_string()).collect();
    let noise = config.noise;
    let options = CorrectionOptions { redraw_sigma_points: config.unscented.redraw_sigma_points };
    let sparsity = SparsityConfig::from(config.sparsity);

    let incomplete = incomplete_model(&dynamics, config.dt).map_err(setup)?;
    let joint = make_joint_model(dynamics, library, config.dt).map_err(setup)?;

    let sq_filter = SquareRootUkf::new(params(config, n_x)?, &NoiseSpec::new(DMatrix::identity(n_x, n_x) * noise.q_x, DMatrix::identity(1, 1) * noise.r))
        .map_err(setup)?
        .with_options(options);
    let mut jsq_filter = JointSqrtUkf::new(
        params(config, n_x + n_theta)?,
        &NoiseSpec::isotropic(n_x, n_theta, 1, noise.q_x, noise.q_theta, noise.r),
        sparsity,
        n_x,
    )
    .map_err(setup)?;
    jsq_filter.filter = jsq_filter.filter.with_options(options);

    let x0 = config.initial_estimate();
    let mut joint_x0 = x0.clone();
    joint_x0.extend(std::iter::repeat_n(config.theta0, n_theta));
    let mut sq = Tracked {
        state: FilterState::new(DVector::from_vec(x0), &(DMatrix::identity(n_x, n_x) * noise.p0_x)).map_err(setup)?,
        consecutive: 0,
    };
    let mut jsq = Tracked {
        state: FilterState::new(
            DVector::from_vec(joint_x0),
            &joint_initial_covariance(n_x, n_theta, noise.p0_x, noise.p0_theta),
        )
        .map_err(setup)?,
        consecutive: 0,
    };

    let barrier = sparsity.lambda_tilde;
    let record = |k: usize, sq: &FilterState, jsq: &FilterState, diag: Option<SparsityDiagnostics>| {
        let theta = jsq.x.as_slice()[n_x..].to_vec();
        StepRecord {
            t: sim.times[k],
            truth: sim.truth[k].as_slice().to_vec(),
            y: sim.measurements[k],
            sq: sq.x.as_slice().to_vec(),
            jsq: jsq.x.as_slice()[..n_x].to_vec(),
            active: theta.iter().map(|v| v.abs() > barrier).collect(),
            theta,
            sparsity: diag,
        }
    };

    let mut trace = RunTrace {
        n_x,
        term_names,
        barrier,
        dt: config.dt,
        records: Vec::with_capacity(sim.len()),
        failures: Vec::new(),
        termination: None,
        sq_repairs: 0,
        jsq_repairs: 0,
    };
    trace.records.push(record(0, &sq.state, &jsq.state, None));

    for k in 1..sim.len() {
        let u = sim.inputs[k - 1];
        let y = DVector::from_element(1, sim.measurements[k]);

        let sq_ok = sq.apply(sq_filter.step(&sq.state, u, &y, &incomplete), k, FilterKind::Sq, &mut trace.failures);
        let mut diag = None;
        let jsq_result = jsq_filter.step(&jsq.state, u, &y, &joint).map(|(s, d)| {
            diag = Some(d);
            s
        });
        let jsq_ok = jsq.apply(jsq_result, k, FilterKind::Jsq, &mut trace.failures);

        if !(sq_ok && jsq_ok) {
            let kind = if sq_ok { FilterKind::Jsq } else { FilterKind::Sq };
            let last = trace.failures.iter().rev().find(|f| f.filter == kind).map(|f| f.message.clone()).unwrap_or_default();
            trace.termination = Some(format!(
                "{} failed {MAX_CONSECUTIVE_FAILURES} consecutive steps at t = {}: {last}",
                kind.label(),
                sim.times[k]
            ));
            break;
        }
        trace.records.push(record(k, &sq.state, &jsq.state, diag));
    }
    trace.sq_repairs = sq.state.repairs;
    trace.jsq_repairs = jsq.state.repairs;
    Ok(trace)
}

/// Simulates the truth, runs both filters on the same measurements and
/// summarizes the result.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(RunTrace, MetricsSummary), RunError> {
    let sim = simulate_truth(config)?;
    let trace = run_filters(config, &sim)?;
    let library = config.library()?;
    let summary = summarize(&trace, &library, config.transient_fraction)?;
    Ok((trace, summary))
}
