use log::warn;

use crate::model::{
    dirichlet_log_prior, ComponentFrame, LpMixtureModel, PointSet, PointSupport, Responsibilities, TransformState,
};

/// Posterior assignment of every point to the components and to the
/// outlier class.
pub fn e_step(points: &PointSet, model: &LpMixtureModel, state: &TransformState) -> Responsibilities {
    e_step_with_objective(points, model, state).0
}

/// E-step that also returns the MAP objective `R` at `state`; both come out
/// of the same per-point normalisers `D_i`.
pub fn e_step_with_objective(
    points: &PointSet,
    model: &LpMixtureModel,
    state: &TransformState,
) -> (Responsibilities, f64) {
    let m = model.len();
    let frame = ComponentFrame::new(model, state, points.frame_area());
    let mut resp = Responsibilities::zeros(points.len(), m);
    let mut log_likelihood = 0.0;
    let mut unsupported = 0usize;
    for i in 0..points.len() {
        let row = resp.beta_row_mut(i);
        let support = frame.point_terms(points.x(i), points.y(i), points.prior(i), row);
        log_likelihood += support.ln_total();
        let gamma = match support {
            PointSupport::Linear { total } => {
                let inv = 1.0 / total;
                row.iter_mut().for_each(|b| *b *= inv);
                frame.lambda / total
            }
            PointSupport::Log { lambda_fraction, .. } => lambda_fraction,
            PointSupport::Empty => {
                unsupported += 1;
                1.0
            }
        };
        resp.gamma_mut()[i] = gamma;
    }
    if unsupported > 0 {
        warn!("{unsupported} points have no support; assigned to the outlier class");
    }
    let objective = log_likelihood + dirichlet_log_prior(&state.weights, model.dirichlet());
    (resp, objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LabelSet, LpComponent, Similarity};
    use approx::assert_relative_eq;

    fn model(centers: &[[f64; 2]], weights: &[f64]) -> LpMixtureModel {
        let comps = centers
            .iter()
            .zip(weights)
            .map(|(c, w)| LpComponent {
                label: 0,
                center: *c,
                spread: [30.0, 30.0],
                weight: *w,
            })
            .collect();
        LpMixtureModel::new(
            LabelSet::new(["window", "door"]).unwrap(),
            crate::model::Exponent::QUARTIC,
            (50, 50),
            comps,
            weights.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn single_component_without_outliers_takes_everything() {
        let m = model(&[[10.0, 10.0]], &[1.0]);
        let state = TransformState::from_model(&m, Similarity::IDENTITY, 0.0);
        let mut ps = PointSet::new(50, 50, 2);
        for (x, y) in [(10.0, 10.0), (12.0, 9.0), (14.0, 14.0)] {
            ps.push(x, y, &[1.0, 0.0]).unwrap();
        }
        let r = e_step(&ps, &m, &state);
        for i in 0..3 {
            assert_relative_eq!(r.beta(i, 0), 1.0, epsilon = 1e-15);
            assert_eq!(r.gamma()[i], 0.0);
        }
    }

    #[test]
    fn zero_prior_point_is_an_outlier() {
        let m = model(&[[10.0, 10.0]], &[1.0]);
        let state = TransformState::from_model(&m, Similarity::IDENTITY, 0.2);
        let mut ps = PointSet::new(50, 50, 2);
        ps.push(10.0, 10.0, &[0.0, 0.7]).unwrap();
        let r = e_step(&ps, &m, &state);
        assert_eq!(r.gamma()[0], 1.0);
        assert_eq!(r.beta(0, 0), 0.0);
    }

    #[test]
    fn no_support_at_all_is_an_outlier() {
        let m = model(&[[10.0, 10.0]], &[1.0]);
        let state = TransformState::from_model(&m, Similarity::IDENTITY, 0.0);
        let mut ps = PointSet::new(50, 50, 2);
        ps.push(10.0, 10.0, &[0.0, 0.7]).unwrap();
        let r = e_step(&ps, &m, &state);
        assert_eq!(r.gamma()[0], 1.0);
    }

    #[test]
    fn equidistant_components_split_evenly() {
        let m = model(&[[10.0, 10.0], [20.0, 10.0]], &[0.5, 0.5]);
        let state = TransformState::from_model(&m, Similarity::IDENTITY, 0.1);
        let mut ps = PointSet::new(50, 50, 2);
        ps.push(15.0, 10.0, &[0.9, 0.0]).unwrap();
        let r = e_step(&ps, &m, &state);
        assert_relative_eq!(r.beta(0, 0), r.beta(0, 1), max_relative = 1e-14);
        assert_relative_eq!(r.beta(0, 0) + r.beta(0, 1) + r.gamma()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn objective_matches_map_objective() {
        let m = model(&[[10.0, 10.0], [30.0, 12.0]], &[0.3, 0.7]);
        let state = TransformState::from_model(&m, Similarity::new(1.5, -2.0, 1.1).unwrap(), 0.15);
        let mut ps = PointSet::new(50, 50, 2);
        for k in 0..40 {
            ps.push((k % 40) as f64 + 0.5, (k % 17) as f64 + 3.0, &[0.6, 0.1]).unwrap();
        }
        let (_, r) = e_step_with_objective(&ps, &m, &state);
        assert_relative_eq!(r, crate::model::map_objective(&ps, &m, &state), max_relative = 1e-14);
    }
}
