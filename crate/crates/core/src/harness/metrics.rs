//! Tracking metrics over a trace.

use serde::Serialize;

use super::trace::SimTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mean_abs_error: f64,
    pub rms_error: f64,
    pub max_abs_error: f64,
    /// Largest positive tracking error (speed above reference).
    pub max_overshoot: f64,
    /// Fraction of samples within 2% of the reference.
    pub settled_fraction: f64,
    pub samples: usize,
}

/// Metrics over rows with `t0 <= t < t1`.
pub fn window_metrics(trace: &SimTrace, t0: f64, t1: f64) -> Result<Metrics> {
    let errs: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter(|r| r.t >= t0 && r.t < t1)
        .map(|r| (r.tracking_error(), r.theta_ref))
        .collect();
    if errs.is_empty() {
        return Err(Error::invalid("metrics window", format!("no samples in [{t0}, {t1})")));
    }
    let n = errs.len() as f64;
    let mean_abs_error = errs.iter().map(|(e, _)| e.abs()).sum::<f64>() / n;
    let rms_error = (errs.iter().map(|(e, _)| e * e).sum::<f64>() / n).sqrt();
    let max_abs_error = errs.iter().map(|(e, _)| e.abs()).fold(0.0, f64::max);
    let max_overshoot = errs.iter().map(|(e, _)| *e).fold(0.0, f64::max);
    let settled = errs.iter().filter(|(e, r)| e.abs() <= 0.02 * r.abs()).count();
    Ok(Metrics {
        mean_abs_error,
        rms_error,
        max_abs_error,
        max_overshoot,
        settled_fraction: settled as f64 / n,
        samples: errs.len(),
    })
}

/// Metrics after the initial transient.
pub fn metrics(trace: &SimTrace, transient: f64) -> Result<Metrics> {
    window_metrics(trace, transient, f64::INFINITY)
}

/// Relative improvement `(e_base - e_new) / e_base` of mean absolute error.
/// Both traces must follow the same reference on the same grid.
pub fn improvement(new: &SimTrace, baseline: &SimTrace, transient: f64) -> Result<Option<f64>> {
    let same = new.rows.len() == baseline.rows.len()
        && new
            .rows
            .iter()
            .zip(&baseline.rows)
            .all(|(a, b)| a.t == b.t && a.theta_ref == b.theta_ref);
    if !same {
        return Err(Error::invalid("improvement", "traces follow different references"));
    }
    let e_new = metrics(new, transient)?.mean_abs_error;
    let e_base = metrics(baseline, transient)?.mean_abs_error;
    Ok(if e_base == 0.0 { None } else { Some((e_base - e_new) / e_base) })
}
