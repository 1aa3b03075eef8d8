//! Observed point set from a target label-probability map.

use log::warn;

use crate::error::{Error, Result};
use crate::model::{LabelProbMap, PointSet};

/// Minimum facade label probability for a pixel to become a point.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Stride of the coarse level of the two-level scheme.
pub const DEFAULT_STRIDE: usize = 2;

/// One point per pixel whose largest facade label probability reaches
/// `threshold`, in row-major order, carrying all `K` probabilities.
pub fn extract_points(map: &LabelProbMap, threshold: f64) -> Result<PointSet> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let k = map.num_labels();
    let mut points = PointSet::new(map.width(), map.height(), k);
    // Compare in the map's own precision so a stored 0.01 passes 0.01.
    let cut = threshold as f32;
    let mut prior = vec![0.0; k];
    for y in 0..map.height() {
        for x in 0..map.width() {
            let mut best = 0.0f32;
            for (j, slot) in prior.iter_mut().enumerate() {
                let v = map.get(j, x, y);
                *slot = v as f64;
                best = best.max(v);
            }
            if best >= cut {
                points.push(x as f64, y as f64, &prior)?;
            }
        }
    }
    if points.is_empty() {
        return Err(Error::NoFacadeEvidence);
    }
    Ok(points)
}

/// Keeps the points whose integer coordinates are both multiples of
/// `stride`. Coordinates stay in the full-resolution frame.
///
/// An empty result falls back to the full set.
pub fn downsample(points: &PointSet, stride: usize) -> Result<PointSet> {
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if stride == 1 {
        return Ok(points.clone());
    }
    let s = stride as i64;
    let kept = points.filter(|p| (p.x.round() as i64).rem_euclid(s) == 0 && (p.y.round() as i64).rem_euclid(s) == 0);
    if kept.is_empty() {
        warn!("downsampling by {stride} left no points; using the full set");
        return Ok(points.clone());
    }
    Ok(kept)
}
