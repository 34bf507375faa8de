//! Error metrics and coefficient summaries.

use sparse_ukf::library::{CoefficientReport, FunctionLibrary};
use thiserror::Error;

use crate::run::RunTrace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("metrics window [{start}, {end}] contains no records")]
    EmptyWindow { start: f64, end: f64 },
    #[error("estimate and truth have different shapes")]
    ShapeMismatch,
    #[error("coefficient report failed: {0}")]
    Report(String),
}

/// Closed time interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

/// Per-component RMSE of `estimates` against `truth`.
pub fn rmse(estimates: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<f64>, MetricsError> {
    if estimates.len() != truth.len() {
        return Err(MetricsError::ShapeMismatch);
    }
    let Some(first) = truth.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    let mut sums = vec![0.0; n];
    for (e, t) in estimates.iter().zip(truth) {
        if e.len() != n || t.len() != n {
            return Err(MetricsError::ShapeMismatch);
        }
        for i in 0..n {
            let d = e[i] - t[i];
            sums[i] += d * d;
        }
    }
    Ok(sums.into_iter().map(|s| (s / truth.len() as f64).sqrt()).collect())
}

/// RMSE of both filters over the records whose time lies in `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRmse {
    pub window: Window,
    pub samples: usize,
    pub sq: Vec<f64>,
    pub jsq: Vec<f64>,
}

pub fn compute_rmse(trace: &RunTrace, window: Window) -> Result<WindowRmse, MetricsError> {
    // slack for grid times computed as k·dt
    let eps = 1e-9 * trace.dt;
    let rows: Vec<_> = trace.records.iter().filter(|r| r.t >= window.start - eps && r.t <= window.end + eps).collect();
    if rows.is_empty() {
        return Err(MetricsError::EmptyWindow { start: window.start, end: window.end });
    }
    let truth: Vec<Vec<f64>> = rows.iter().map(|r| r.truth.clone()).collect();
    let sq: Vec<Vec<f64>> = rows.iter().map(|r| r.sq.clone()).collect();
    let jsq: Vec<Vec<f64>> = rows.iter().map(|r| r.jsq.clone()).collect();
    Ok(WindowRmse { window, samples: rows.len(), sq: rmse(&sq, &truth)?, jsq: rmse(&jsq, &truth)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub full: WindowRmse,
    pub post_transient: WindowRmse,
    /// Coefficients at the last record.
    pub final_report: CoefficientReport,
    /// Mean `|θᵢ|` over the post-transient window.
    pub post_mean_abs_theta: Vec<f64>,
    /// Largest number of active terms in the blended coefficients at any
    /// post-transient record.
    pub post_max_active: usize,
    /// Largest active count at the exit of the pseudo-update loop (before
    /// blending) over the post-transient window.
    pub post_max_active_loop: usize,
    /// Post-transient steps where the loop stopped on its iteration bound.
    pub post_limit_hits: usize,
    /// 1-based indices of terms active at some post-transient record.
    pub post_active_union: Vec<usize>,
}

impl MetricsSummary {
    /// Name of the term with the largest final coefficient magnitude.
    pub fn dominant_term(&self) -> Option<&str> {
        self.final_report.strongest().map(|e| e.name.as_str())
    }

    /// 1-based index of the dominant term.
    pub fn dominant_index(&self) -> Option<usize> {
        self.final_report.strongest().map(|e| e.index)
    }

    /// 1-based index of the term with the largest post-transient mean `|θᵢ|`.
    pub fn post_dominant_index(&self) -> Option<usize> {
        self.post_mean_abs_theta.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i + 1)
    }

    /// Name of the term with the largest post-transient mean `|θᵢ|`. Less
    /// sensitive to the oscillation phase at the final step than
    /// [`Self::dominant_term`].
    pub fn post_dominant_term(&self) -> Option<&str> {
        self.post_dominant_index().map(|i| self.final_report.entries[i - 1].name.as_str())
    }

    pub fn jsq_beats_sq(&self) -> bool {
        let p = &self.post_transient;
        p.jsq.iter().zip(&p.sq).all(|(j, s)| j < s)
    }
}

/// Full-horizon and post-transient metrics. The post-transient window is the
/// final `1 − transient_fraction` of the recorded horizon.
pub fn summarize(
    trace: &RunTrace,
    library: &FunctionLibrary,
    transient_fraction: f64,
) -> Result<MetricsSummary, MetricsError> {
    let (first, last) = match (trace.records.first(), trace.records.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(MetricsError::EmptyWindow { start: 0.0, end: 0.0 }),
    };
    let full = compute_rmse(trace, Window { start: first, end: last })?;
    let start = first + transient_fraction * (last - first);
    let post_transient = compute_rmse(trace, Window { start, end: last })?;

    let final_record = trace.records.last().expect("non-empty");
    let final_report = library
        .dominant_terms(&final_record.theta, trace.barrier, trace.records.len() - 1)
        .map_err(|e| MetricsError::Report(e.to_string()))?;

    let post: Vec<_> = trace.records.iter().filter(|r| r.t >= start - 1e-9 * trace.dt).collect();
    let n_theta = trace.n_theta();
    let mut mean = vec![0.0; n_theta];
    let mut union = vec![false; n_theta];
    let mut post_max_active = 0;
    let mut post_max_active_loop = 0;
    let mut post_limit_hits = 0;
    for r in &post {
        if let Some(d) = &r.sparsity {
            post_max_active_loop = post_max_active_loop.max(d.active_after);
            post_limit_hits += usize::from(d.hit_limit);
        }
        for i in 0..n_theta {
            mean[i] += r.theta[i].abs() / post.len() as f64;
            union[i] |= r.active[i];
        }
        post_max_active = post_max_active.max(r.active_count());
    }
    let post_active_union = union.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i + 1).collect();
    Ok(MetricsSummary {
        full,
        post_transient,
        final_report,
        post_mean_abs_theta: mean,
        post_max_active,
        post_max_active_loop,
        post_limit_hits,
        post_active_union,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_identities() {
        let truth = vec![vec![1.0, -2.0]; 4];
        assert_eq!(rmse(&truth, &truth).unwrap(), vec![0.0, 0.0]);

        let offset: Vec<Vec<f64>> = truth.iter().map(|t| vec![t[0] + 0.3, t[1] - 0.3]).collect();
        let r = rmse(&offset, &truth).unwrap();
        assert!(r.iter().all(|v| (v - 0.3).abs() < 1e-15));

        let alternating: Vec<Vec<f64>> = truth
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let c = if k % 2 == 0 { 0.7 } else { -0.7 };
                vec![t[0] + c, t[1] + c]
            })
            .collect();
        let r = rmse(&alternating, &truth).unwrap();
        assert!(r.iter().all(|v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn rmse_shape_mismatch() {
        assert_eq!(rmse(&[vec![1.0]], &[]), Err(MetricsError::ShapeMismatch));
        assert_eq!(rmse(&[vec![1.0]], &[vec![1.0, 2.0]]), Err(MetricsError::ShapeMismatch));
    }
}
