use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Similarity;

/// Registration error against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegError {
    /// `‖(tx, ty) - (tx*, ty*)‖` in pixels.
    pub translation: f64,
    /// `|s - s*| / s*`.
    pub scale: f64,
}

impl RegError {
    pub fn between(estimate: &Similarity, truth: &Similarity) -> Self {
        Self {
            translation: (estimate.tx - truth.tx).hypot(estimate.ty - truth.ty),
            scale: (estimate.s - truth.s).abs() / truth.s,
        }
    }
}

/// Fraction of `errors` at or below each threshold.
pub fn cumulative_histogram(errors: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::invalid("no results to evaluate"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|t| sorted.partition_point(|e| e <= t) as f64 / n)
        .collect())
}

/// Cumulative histograms of translation and scale error.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramTable {
    pub translation_thresholds: Vec<f64>,
    pub translation: Vec<f64>,
    pub scale_thresholds: Vec<f64>,
    pub scale: Vec<f64>,
    pub runs: usize,
}

impl HistogramTable {
    /// Tab-separated rows `metric threshold fraction`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tthreshold\tfraction\n");
        for (t, f) in self.translation_thresholds.iter().zip(&self.translation) {
            let _ = writeln!(out, "translation_px\t{t}\t{f:.6}");
        }
        for (t, f) in self.scale_thresholds.iter().zip(&self.scale) {
            let _ = writeln!(out, "scale_rel\t{t}\t{f:.6}");
        }
        out
    }
}

pub const DEFAULT_TRANSLATION_THRESHOLDS: [f64; 8] = [0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
pub const DEFAULT_SCALE_THRESHOLDS: [f64; 7] = [0.001, 0.0025, 0.005, 0.01, 0.02, 0.05, 0.1];

pub fn evaluate(results: &[RegError], translation_thresholds: &[f64], scale_thresholds: &[f64]) -> Result<HistogramTable> {
    let dt: Vec<f64> = results.iter().map(|r| r.translation).collect();
    let ds: Vec<f64> = results.iter().map(|r| r.scale).collect();
    Ok(HistogramTable {
        translation_thresholds: translation_thresholds.to_vec(),
        translation: cumulative_histogram(&dt, translation_thresholds)?,
        scale_thresholds: scale_thresholds.to_vec(),
        scale: cumulative_histogram(&ds, scale_thresholds)?,
        runs: results.len(),
    })
}
