use log::warn;

use crate::model::{LpMixtureModel, Responsibilities};

/// Numerators of the weight update are clamped to this value.
pub const NUMERATOR_FLOOR: f64 = 1e-8;

/// Dirichlet-MAP update of the mixture weights and of the outlier rate.
///
/// ```text
/// π_c ∝ max(Σ_i β_ic + α_c - 1, 1e-8)
/// α   = Σ_i γ_i / (Σ_ic β_ic + Σ_c (α_c - 1))
/// ```
///
/// Weights are renormalised to sum to one and `α` is clamped to `bounds`.
/// When every numerator hits the floor the previous weights are kept; when
/// the denominator is not positive the previous outlier rate is kept.
pub fn update_weights(
    resp: &Responsibilities,
    model: &LpMixtureModel,
    previous_weights: &[f64],
    previous_outlier_rate: f64,
    bounds: (f64, f64),
) -> (Vec<f64>, f64) {
    let totals = resp.component_totals();
    let pseudo: f64 = model.dirichlet().iter().map(|a| a - 1.0).sum();
    let denominator = totals.iter().sum::<f64>() + pseudo;

    let raw: Vec<f64> = totals.iter().zip(model.dirichlet()).map(|(b, a)| b + a - 1.0).collect();
    let weights = if raw.iter().all(|v| *v <= NUMERATOR_FLOOR) {
        warn!("every weight numerator is below the floor; keeping previous weights");
        previous_weights.to_vec()
    } else {
        let clamped: Vec<f64> = raw.iter().map(|v| v.max(NUMERATOR_FLOOR)).collect();
        let sum: f64 = clamped.iter().sum();
        clamped.into_iter().map(|v| v / sum).collect()
    };

    let outlier_rate = if denominator > 0.0 {
        (resp.outlier_total() / denominator).clamp(bounds.0, bounds.1)
    } else {
        previous_outlier_rate
    };
    (weights, outlier_rate)
}
