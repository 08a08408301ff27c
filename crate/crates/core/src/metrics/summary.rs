//! MAE/RMSE aggregation and the tab-separated metrics report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bands::{band_label, BAND_COUNT};
use crate::error::{Error, Result};
use crate::metrics::decay::{BandMetrics, DecayTime, FitRange};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mae: f64,
    pub rmse: f64,
    pub count: usize,
}

impl ErrorStats {
    fn from_errors(errors: &[f64]) -> Option<Self> {
        if errors.is_empty() {
            return None;
        }
        let n = errors.len() as f64;
        let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        Some(Self { mae, rmse, count: errors.len() })
    }
}

/// Errors of one metric, pooled over every valid (scene, band) pair and
/// broken down per band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricErrors {
    pub pooled: Option<ErrorStats>,
    pub per_band: [Option<ErrorStats>; BAND_COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub rt60: MetricErrors,
    pub edt: MetricErrors,
}

fn metric_errors(
    estimates: &[[BandMetrics; BAND_COUNT]],
    ground_truth: &[[BandMetrics; BAND_COUNT]],
    pick: impl Fn(&BandMetrics) -> Option<f64>,
) -> MetricErrors {
    let per_band = std::array::from_fn(|band| {
        let errors: Vec<f64> = estimates
            .iter()
            .zip(ground_truth)
            .filter_map(|(e, g)| Some(pick(&e[band])? - pick(&g[band])?))
            .collect();
        ErrorStats::from_errors(&errors)
    });
    // Pooled in scene-major order.
    let mut ordered = Vec::with_capacity(estimates.len() * BAND_COUNT);
    for (e, g) in estimates.iter().zip(ground_truth) {
        for band in 0..BAND_COUNT {
            if let (Some(a), Some(b)) = (pick(&e[band]), pick(&g[band])) {
                ordered.push(a - b);
            }
        }
    }
    MetricErrors { pooled: ErrorStats::from_errors(&ordered), per_band }
}

/// MAE and RMSE of estimated against ground-truth RT60/EDT. Pairs where
/// either side is invalid are skipped.
pub fn error_summary(
    estimates: &[[BandMetrics; BAND_COUNT]],
    ground_truth: &[[BandMetrics; BAND_COUNT]],
) -> Result<ErrorSummary> {
    if estimates.len() != ground_truth.len() {
        return Err(Error::DegenerateInput(format!(
            "{} estimates vs {} ground-truth scenes",
            estimates.len(),
            ground_truth.len()
        )));
    }
    let summary = ErrorSummary {
        rt60: metric_errors(estimates, ground_truth, BandMetrics::rt60_seconds),
        edt: metric_errors(estimates, ground_truth, BandMetrics::edt_seconds),
    };
    if summary.rt60.pooled.is_none() && summary.edt.pooled.is_none() {
        return Err(Error::NoValidPairs);
    }
    Ok(summary)
}

impl BandMetrics {
    /// Ground truth known only as a reverberation time (no EDT).
    pub fn from_rt60(seconds: f64) -> Self {
        Self { rt60: Some(DecayTime { seconds, range: FitRange::T30 }), edt: None }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"))
}

fn fmt_stats(s: Option<ErrorStats>) -> String {
    match s {
        Some(s) => format!("{:.6}\t{:.6}\t{}", s.mae, s.rmse, s.count),
        None => "nan\tnan\t0".to_string(),
    }
}

/// One scene of a metrics report.
pub struct ReportRow<'a> {
    pub scene: &'a str,
    pub estimate: &'a [BandMetrics; BAND_COUNT],
    pub ground_truth: &'a [BandMetrics; BAND_COUNT],
}

/// Fixed column order `scene band rt60_est rt60_gt edt_est edt_gt`, then a
/// pooled summary block and per-band errors.
pub fn format_report(rows: &[ReportRow<'_>], summary: &ErrorSummary) -> String {
    let mut out = String::from("scene\tband\trt60_est\trt60_gt\tedt_est\tedt_gt\n");
    for row in rows {
        for band in 0..BAND_COUNT {
            let (e, g) = (&row.estimate[band], &row.ground_truth[band]);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                row.scene,
                band_label(band),
                fmt_opt(e.rt60_seconds()),
                fmt_opt(g.rt60_seconds()),
                fmt_opt(e.edt_seconds()),
                fmt_opt(g.edt_seconds()),
            );
        }
    }
    out.push_str("\n# summary\nmetric\tmae\trmse\tcount\n");
    let _ = writeln!(out, "rt60\t{}", fmt_stats(summary.rt60.pooled));
    let _ = writeln!(out, "edt\t{}", fmt_stats(summary.edt.pooled));
    out.push_str("\n# per band\nband\trt60_mae\trt60_rmse\trt60_count\tedt_mae\tedt_rmse\tedt_count\n");
    for band in 0..BAND_COUNT {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            band_label(band),
            fmt_stats(summary.rt60.per_band[band]),
            fmt_stats(summary.edt.per_band[band])
        );
    }
    out
}
