//! Tracking-error statistics over time windows, and side-by-side
//! comparison reports for paired controller runs.
//!
//! All statistics are computed in radians and converted to degrees only
//! at the reporting boundary. The standard deviation uses the population
//! (1/N) convention, so `rms² = mean² + std²` holds exactly; `rms` is
//! assembled from that identity, which agrees with the direct
//! root-mean-square of the samples to machine precision.

use thiserror::Error;

use crate::simulate::{Axis, Trace};

const DEG: f64 = 180.0 / std::f64::consts::PI;

/// Slack applied to window endpoints so ticks that land on a boundary
/// up to rounding (t = k·dt) are included deterministically.
const WINDOW_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("window [{t0}, {t1}] is not a valid time interval")]
    BadWindow { t0: f64, t1: f64 },
    #[error("window [{t0}, {t1}] holds {found} samples; at least 2 are required")]
    EmptyWindow { t0: f64, t1: f64, found: usize },
    #[error("per-axis statistics need a single axis, not Both")]
    BadAxis,
    #[error("traces do not share a grid/reference: {0}")]
    GridMismatch(String),
}

/// Tracking-error statistics of one axis over one window. All values in
/// radians; use the `*_deg` accessors at the reporting boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub axis: Axis,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub mean: f64,
    pub std: f64,
    pub rms: f64,
    pub max_abs: f64,
}

impl ErrorStats {
    pub fn mean_deg(&self) -> f64 {
        self.mean * DEG
    }

    pub fn std_deg(&self) -> f64 {
        self.std * DEG
    }

    pub fn rms_deg(&self) -> f64 {
        self.rms * DEG
    }

    pub fn max_abs_deg(&self) -> f64 {
        self.max_abs * DEG
    }
}

fn axis_error(trace: &Trace, axis: Axis, idx: usize) -> f64 {
    let rec = &trace.records[idx];
    match axis {
        Axis::Pitch => rec.theta - rec.theta_ref,
        Axis::Yaw => rec.psi - rec.psi_ref,
        Axis::Both => unreachable!("rejected before sampling"),
    }
}

/// Error statistics `e_k = y_k − y_d,k` for one axis over all samples
/// with `t ∈ [t0, t1]` (closed window, boundary-rounding tolerant).
pub fn compute_stats(
    trace: &Trace,
    axis: Axis,
    t0: f64,
    t1: f64,
) -> Result<ErrorStats, MetricsError> {
    if axis == Axis::Both {
        return Err(MetricsError::BadAxis);
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(MetricsError::BadWindow { t0, t1 });
    }
    let in_window: Vec<usize> = (0..trace.records.len())
        .filter(|&i| {
            let t = trace.records[i].t;
            t >= t0 - WINDOW_SLACK && t <= t1 + WINDOW_SLACK
        })
        .collect();
    if in_window.len() < 2 {
        return Err(MetricsError::EmptyWindow {
            t0,
            t1,
            found: in_window.len(),
        });
    }

    let n = in_window.len() as f64;
    let mut sum = 0.0;
    let mut max_abs: f64 = 0.0;
    for &i in &in_window {
        let e = axis_error(trace, axis, i);
        sum += e;
        max_abs = max_abs.max(e.abs());
    }
    let mean = sum / n;
    // two-pass population variance; rms from the exact identity
    let mut sq_dev = 0.0;
    for &i in &in_window {
        let d = axis_error(trace, axis, i) - mean;
        sq_dev += d * d;
    }
    let var = sq_dev / n;
    Ok(ErrorStats {
        axis,
        t_start: t0,
        t_end: t1,
        samples: in_window.len(),
        mean,
        std: var.sqrt(),
        rms: (mean * mean + var).sqrt(),
        max_abs,
    })
}

/// One comparison row: the same axis and window evaluated on both
/// traces.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub t0: f64,
    pub t1: f64,
    pub axis: Axis,
    pub a: ErrorStats,
    pub b: ErrorStats,
}

/// Which controller a row favors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    A,
    B,
}

impl ReportRow {
    /// Lower RMS wins; an exact tie has no winner.
    pub fn winner(&self) -> Option<Winner> {
        if self.a.rms < self.b.rms {
            Some(Winner::A)
        } else if self.b.rms < self.a.rms {
            Some(Winner::B)
        } else {
            None
        }
    }
}

/// A paired comparison of two controller runs of the same scenario.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub scenario: String,
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ReportRow>,
}

/// Reference yaw-RMS values measured on the physical rig under its
/// output-disturbance experiment, degrees, shown in every report for
/// context. They are bench results, not simulation targets, and are
/// never asserted.
pub const HARDWARE_BASELINE_YAW_RMS_DEG: (f64, f64) = (6.9951, 2.3304);

fn check_shared_grid(a: &Trace, b: &Trace) -> Result<(), MetricsError> {
    if a.records.len() != b.records.len() {
        return Err(MetricsError::GridMismatch(format!(
            "{} vs {} records",
            a.records.len(),
            b.records.len()
        )));
    }
    if a.dt != b.dt {
        return Err(MetricsError::GridMismatch(format!(
            "dt {} vs {}",
            a.dt, b.dt
        )));
    }
    for (i, (ra, rb)) in a.records.iter().zip(&b.records).enumerate() {
        if (ra.t - rb.t).abs() > WINDOW_SLACK
            || (ra.theta_ref - rb.theta_ref).abs() > WINDOW_SLACK
            || (ra.psi_ref - rb.psi_ref).abs() > WINDOW_SLACK
        {
            return Err(MetricsError::GridMismatch(format!(
                "time/reference differs at record {i}"
            )));
        }
    }
    Ok(())
}

/// Builds the paired comparison of two runs that share a grid and
/// reference: per interval and axis, statistics for both controllers
/// plus the RMS winner.
pub fn compare_report(
    scenario: &str,
    label_a: &str,
    trace_a: &Trace,
    label_b: &str,
    trace_b: &Trace,
    intervals: &[(f64, f64)],
) -> Result<ComparisonReport, MetricsError> {
    check_shared_grid(trace_a, trace_b)?;
    let mut rows = Vec::new();
    for &(t0, t1) in intervals {
        for axis in [Axis::Pitch, Axis::Yaw] {
            rows.push(ReportRow {
                t0,
                t1,
                axis,
                a: compute_stats(trace_a, axis, t0, t1)?,
                b: compute_stats(trace_b, axis, t0, t1)?,
            });
        }
    }
    Ok(ComparisonReport {
        scenario: scenario.to_string(),
        label_a: label_a.to_string(),
        label_b: label_b.to_string(),
        rows,
    })
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Pitch => "pitch",
        Axis::Yaw => "yaw",
        Axis::Both => "both",
    }
}

impl ComparisonReport {
    /// Renders the aligned human-readable table followed by
    /// machine-readable `data,` rows. Output is deterministic for equal
    /// inputs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("comparison: {}\n", self.scenario));
        out.push_str(&format!(
            "controllers: {} vs {}\n",
            self.label_a, self.label_b
        ));
        let mut last_window = (f64::NAN, f64::NAN);
        for row in &self.rows {
            if (row.t0, row.t1) != last_window {
                out.push_str(&format!("\ninterval [{:.3}, {:.3}] s\n", row.t0, row.t1));
                out.push_str(&format!(
                    "  {:<6} {:<6} {:>14} {:>14} {:>14} {:>14}\n",
                    "axis", "ctrl", "mean_deg", "rms_deg", "std_deg", "max_abs_deg"
                ));
                last_window = (row.t0, row.t1);
            }
            for (label, stats) in [(&self.label_a, &row.a), (&self.label_b, &row.b)] {
                out.push_str(&format!(
                    "  {:<6} {:<6} {:>14.6} {:>14.6} {:>14.6} {:>14.6}\n",
                    axis_name(row.axis),
                    label,
                    stats.mean_deg(),
                    stats.rms_deg(),
                    stats.std_deg(),
                    stats.max_abs_deg()
                ));
            }
            match row.winner() {
                Some(Winner::A) => out.push_str(&format!(
                    "  {:<6} winner: {} (rms {:.6} vs {:.6} deg)\n",
                    axis_name(row.axis),
                    self.label_a,
                    row.a.rms_deg(),
                    row.b.rms_deg()
                )),
                Some(Winner::B) => out.push_str(&format!(
                    "  {:<6} winner: {} (rms {:.6} vs {:.6} deg)\n",
                    axis_name(row.axis),
                    self.label_b,
                    row.b.rms_deg(),
                    row.a.rms_deg()
                )),
                None => out.push_str(&format!(
                    "  {:<6} winner: none (identical rms)\n",
                    axis_name(row.axis)
                )),
            }
        }
        out.push_str(&format!(
            "\ncontext: bench measurements on the physical rig under its output-disturbance \
             test gave yaw RMS {:.4} deg (classic) vs {:.4} deg (model-free); shown for \
             context, not asserted.\n",
            HARDWARE_BASELINE_YAW_RMS_DEG.0, HARDWARE_BASELINE_YAW_RMS_DEG.1
        ));
        out.push_str("\ndata,scenario,t0,t1,axis,controller,samples,mean_deg,rms_deg,std_deg,max_abs_deg\n");
        for row in &self.rows {
            for (label, stats) in [(&self.label_a, &row.a), (&self.label_b, &row.b)] {
                out.push_str(&format!(
                    "data,{},{:.3},{:.3},{},{},{},{:.8e},{:.8e},{:.8e},{:.8e}\n",
                    self.scenario,
                    row.t0,
                    row.t1,
                    axis_name(row.axis),
                    label,
                    stats.samples,
                    stats.mean_deg(),
                    stats.rms_deg(),
                    stats.std_deg(),
                    stats.max_abs_deg()
                ));
            }
        }
        out
    }
}
