//! Domain types, the Lp Gaussian density and the MAP objective.

mod density;
mod labels;
mod objective;
mod points;
mod transform;

pub use density::{
    component_density, ln_normalization_constant, lp_norm_term, normalization_constant, Exponent, LpComponent,
    LpMixtureModel, WEIGHT_SUM_TOLERANCE,
};
pub use labels::{LabelProbMap, LabelSet, PROB_SUM_TOLERANCE};
pub use objective::{
    dirichlet_log_prior, geometric_energy, map_objective, reduced_objective, Responsibilities, TransformState,
    WEIGHT_FLOOR,
};
pub(crate) use objective::{ComponentFrame, PointSupport};
pub use points::{Point, PointSet};
pub use transform::{apply_transform, Similarity};
