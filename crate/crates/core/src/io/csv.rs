//! CSV writers for fit traces, evaluation metrics, and sparsification
//! curves.  Numbers use Rust's shortest round-trip formatting; missing
//! values are empty cells.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::evalbench::metrics::SparsificationCurve;
use crate::losses::FitTraceRow;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One evaluated depth map.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    /// Row label, e.g. `view_003/fused` or `mean`.
    pub label: String,
    /// Fraction of ground-truth pixels carrying a prediction.
    pub completeness: f64,
    pub mae: Option<f64>,
    /// Fraction of predictions within the inlier threshold.
    pub inlier_fraction: Option<f64>,
    /// Area under the confidence sparsification curve.
    pub auc: Option<f64>,
}

/// Write per-epoch fit losses and gradient norms.
pub fn write_fit_trace(path: &Path, rows: &[FitTraceRow]) -> Result<()> {
    let mut text = String::from(
        "epoch,loss_depth,loss_coverage,loss_radius,loss_total,\
         grad_depth_norm,grad_coverage_norm,grad_radius_norm\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.loss_depth,
            r.loss_coverage,
            r.loss_radius,
            r.loss_total,
            r.grad_depth_norm,
            r.grad_coverage_norm,
            r.grad_radius_norm,
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Write one metrics row per evaluated map.
pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut text = String::from("label,completeness,mae,inlier_fraction,auc\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label,
            r.completeness,
            opt(r.mae),
            opt(r.inlier_fraction),
            opt(r.auc),
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Write a sparsification curve as `fraction,mae` rows.
pub fn write_sparsification(path: &Path, curve: &SparsificationCurve) -> Result<()> {
    let mut text = String::from("fraction,mae\n");
    for (f, m) in curve.fractions.iter().zip(&curve.mae) {
        text.push_str(&format!("{f},{m}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}
