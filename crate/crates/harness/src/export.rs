//! Run artifacts: `trace.csv`, `metrics.csv`, `report.txt` and a gnuplot
//! script `plots.gp` that reads the CSV.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! the CSV recovers the exact values.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics::{MetricsSummary, WindowRmse};
use crate::run::RunTrace;

pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const PLOT_FILE: &str = "plots.gp";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("non-finite value in column {column} at t = {t}")]
    NonFinite { column: String, t: f64 },
}

/// Number of `trace.csv` columns for the given dimensions.
pub fn trace_column_count(n_x: usize, n_theta: usize) -> usize {
    // t, truth, y, sq, jsq, theta, active_count, pseudo_iters
    1 + n_x + 1 + n_x + n_x + n_theta + 2
}

pub fn trace_header(n_x: usize, n_theta: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n_x).map(|i| format!("truth_x{i}")));
    h.push("y".into());
    h.extend((1..=n_x).map(|i| format!("sq_x{i}")));
    h.extend((1..=n_x).map(|i| format!("jsq_x{i}")));
    h.extend((1..=n_theta).map(|i| format!("theta_{i}")));
    h.push("active_count".into());
    h.push("pseudo_iters".into());
    h
}

/// Writes the per-step trace. An empty trace yields the header only.
pub fn write_trace_csv<W: Write>(trace: &RunTrace, out: W) -> Result<(), ExportError> {
    let header = trace_header(trace.n_x, trace.n_theta());
    assert_eq!(header.len(), trace_column_count(trace.n_x, trace.n_theta()));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for r in &trace.records {
        row.clear();
        let values = std::iter::once(r.t)
            .chain(r.truth.iter().copied())
            .chain(std::iter::once(r.y))
            .chain(r.sq.iter().copied())
            .chain(r.jsq.iter().copied())
            .chain(r.theta.iter().copied());
        for (col, v) in values.enumerate() {
            if !v.is_finite() {
                return Err(ExportError::NonFinite { column: header[col].clone(), t: r.t });
            }
            row.push(v.to_string());
        }
        row.push(r.active_count().to_string());
        row.push(r.pseudo_iters().to_string());
        assert_eq!(row.len(), header.len());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row per window, filter and state component.
pub fn write_metrics_csv<W: Write>(summary: Option<&MetricsSummary>, out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window", "start", "end", "samples", "filter", "component", "rmse"])?;
    if let Some(s) = summary {
        for (name, win) in [("full", &s.full), ("post_transient", &s.post_transient)] {
            for (filter, values) in [("sq", &win.sq), ("jsq", &win.jsq)] {
                for (i, v) in values.iter().enumerate() {
                    w.write_record([
                        name.to_string(),
                        win.window.start.to_string(),
                        win.window.end.to_string(),
                        win.samples.to_string(),
                        filter.to_string(),
                        format!("x{}", i + 1),
                        v.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn rmse_lines(out: &mut String, label: &str, w: &WindowRmse) {
    let _ = writeln!(out, "{label} [{:.3}, {:.3}] s, {} samples", w.window.start, w.window.end, w.samples);
    for (i, (s, j)) in w.sq.iter().zip(&w.jsq).enumerate() {
        let _ = writeln!(out, "  x{}: SQ-UKF {s:.6e}   J-SQ-UKF {j:.6e}", i + 1);
    }
}

/// Human-readable summary: dominant terms, RMSE and any failures.
pub fn report_text(trace: &RunTrace, summary: Option<&MetricsSummary>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "records: {}   terms: {}   barrier: {}", trace.records.len(), trace.n_theta(), trace.barrier);
    match summary {
        Some(s) => {
            let name = |i: usize| trace.term_names[i - 1].as_str();
            if let Some(i) = s.dominant_index() {
                let _ = writeln!(out, "dominant term at the final step: theta_{i} = {}", name(i));
            }
            if let Some(i) = s.post_dominant_index() {
                let _ = writeln!(
                    out,
                    "dominant term over the post-transient window: theta_{i} = {} (mean |theta| {:.4e})",
                    name(i),
                    s.post_mean_abs_theta[i - 1]
                );
            }
            let union: Vec<String> = s.post_active_union.iter().map(|&i| format!("theta_{i} ({})", name(i))).collect();
            let _ = writeln!(out, "terms active after the transient: {}", if union.is_empty() { "none".into() } else { union.join(", ") });
            let _ = writeln!(
                out,
                "max active terms after the transient: {} blended, {} at loop exit; iteration limit reached {} time(s)",
                s.post_max_active, s.post_max_active_loop, s.post_limit_hits
            );
            let _ = writeln!(out, "J-SQ-UKF beats SQ-UKF on every state after the transient: {}", if s.jsq_beats_sq() { "yes" } else { "no" });
            out.push('\n');
            out.push_str("final coefficients, ");
            let _ = write!(out, "{}", s.final_report);
            out.push('\n');
            rmse_lines(&mut out, "RMSE, full horizon", &s.full);
            rmse_lines(&mut out, "RMSE, post-transient", &s.post_transient);
        }
        None => out.push_str("no metrics (empty trace)\n"),
    }
    let _ = writeln!(out, "\ncovariance repairs: SQ-UKF {}, J-SQ-UKF {}", trace.sq_repairs, trace.jsq_repairs);
    if trace.failures.is_empty() {
        out.push_str("failed steps: none\n");
    } else {
        let _ = writeln!(out, "failed steps: {}", trace.failures.len());
        for f in trace.failures.iter().take(20) {
            let _ = writeln!(out, "  step {} {}: {}", f.step, f.filter.label(), f.message);
        }
        if trace.failures.len() > 20 {
            let _ = writeln!(out, "  ... {} more", trace.failures.len() - 20);
        }
    }
    if let Some(t) = &trace.termination {
        let _ = writeln!(out, "run terminated early: {t}");
    }
    out
}

/// Gnuplot script producing a state-estimate figure (one panel per state,
/// truth against both filters) and a coefficient figure (θ over time with
/// the ±barrier band).
pub fn plot_script(trace: &RunTrace) -> String {
    let n_x = trace.n_x;
    let n_theta = trace.n_theta();
    let truth = |i: usize| 1 + i;
    let sq = |i: usize| 2 + n_x + i;
    let jsq = |i: usize| 2 + 2 * n_x + i;
    let theta = |i: usize| 2 + 3 * n_x + i;

    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,700\n\n");
    let _ = writeln!(s, "set output 'states.png'\nset multiplot layout {n_x},1");
    for i in 1..=n_x {
        let _ = writeln!(s, "set ylabel 'x{i}'");
        if i == n_x {
            s.push_str("set xlabel 't [s]'\n");
        }
        let _ = writeln!(
            s,
            "plot '{TRACE_FILE}' using 1:{} with lines lw 2 title 'truth', \\\n     '' using 1:{} with lines title 'SQ-UKF', \\\n     '' using 1:{} with lines title 'J-SQ-UKF'",
            truth(i),
            sq(i),
            jsq(i)
        );
    }
    s.push_str("unset multiplot\nunset xlabel\n\n");

    let _ = writeln!(s, "set output 'coefficients.png'\nset xlabel 't [s]'\nset ylabel 'theta'");
    let b = trace.barrier;
    let mut parts = vec![format!("{b} with lines dt 2 lc 'black' title 'barrier'"), format!("{} with lines dt 2 lc 'black' notitle", -b)];
    for i in 1..=n_theta {
        let name = trace.term_names[i - 1].replace('\'', "");
        parts.push(format!("'{TRACE_FILE}' using 1:{} with lines title 'theta_{i}: {name}'", theta(i)));
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s.push_str("unset output\n");
    s
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExportError + '_ {
    move |source| ExportError::Io { path: path.to_path_buf(), source }
}

fn write_csv(path: PathBuf, f: impl FnOnce(io::BufWriter<fs::File>) -> Result<(), ExportError>) -> Result<PathBuf, ExportError> {
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    f(io::BufWriter::new(file))?;
    Ok(path)
}

fn write_text(path: PathBuf, body: String) -> Result<PathBuf, ExportError> {
    fs::write(&path, body).map_err(io_err(&path))?;
    Ok(path)
}

/// Writes all four artifacts into `dir`, creating it if needed. Returns the
/// written paths.
pub fn export_trace(trace: &RunTrace, summary: Option<&MetricsSummary>, dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(vec![
        write_csv(dir.join(TRACE_FILE), |w| write_trace_csv(trace, w))?,
        write_csv(dir.join(METRICS_FILE), |w| write_metrics_csv(summary, w))?,
        write_text(dir.join(REPORT_FILE), report_text(trace, summary))?,
        write_text(dir.join(PLOT_FILE), plot_script(trace))?,
    ])
}
