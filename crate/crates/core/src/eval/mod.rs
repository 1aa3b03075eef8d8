//! Synthetic instances, error metrics and brute-force oracles.

pub mod metrics;
pub mod oracle;
pub mod synth;

pub use metrics::{
    cumulative_histogram, evaluate, HistogramTable, RegError, DEFAULT_SCALE_THRESHOLDS, DEFAULT_TRANSLATION_THRESHOLDS,
};
pub use oracle::{grid_oracle, m_step_oracle, polish, Axis, GridRanges};
pub use synth::{
    generate_instance, perturb_box, Rect, RectGrid, SynthInstance, SynthPlan, SynthSpec, SynthTruth, ValueRange,
};
