//! Posterior segmentation: responsibilities written back to pixel space.

use crate::error::{Error, Result};
use crate::model::{LabelProbMap, LpMixtureModel, PointSet, Responsibilities};

/// Per-point posterior over the `K` facade labels plus the outlier class.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPosteriors {
    /// `N × K` row-major.
    labels: Vec<f64>,
    outlier: Vec<f64>,
    num_labels: usize,
}

impl PointPosteriors {
    pub fn len(&self) -> usize {
        self.outlier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outlier.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn labels(&self, i: usize) -> &[f64] {
        &self.labels[i * self.num_labels..(i + 1) * self.num_labels]
    }

    pub fn outlier(&self, i: usize) -> f64 {
        self.outlier[i]
    }
}

/// `posterior_i(j) = Σ_{c of label j} β_ic`, `outlier_i = γ_i`.
pub fn posterior_labels(points: &PointSet, resp: &Responsibilities, model: &LpMixtureModel) -> Result<PointPosteriors> {
    if resp.num_points() != points.len() || resp.num_components() != model.len() {
        return Err(Error::invalid(format!(
            "responsibilities are {}x{}, expected {}x{}",
            resp.num_points(),
            resp.num_components(),
            points.len(),
            model.len()
        )));
    }
    let k = model.labels().len();
    let mut labels = vec![0.0; points.len() * k];
    for i in 0..points.len() {
        let row = &mut labels[i * k..(i + 1) * k];
        for (c, b) in resp.beta_row(i).iter().enumerate() {
            row[model.components()[c].label] += b;
        }
    }
    Ok(PointPosteriors {
        labels,
        outlier: resp.gamma().to_vec(),
        num_labels: k,
    })
}

/// Copy of `prior` with every point pixel replaced by its posterior label
/// probabilities. Outlier mass is left to the implicit non-facade residual
/// `1 - Σ_j`; other pixels keep their prior.
pub fn render_posterior_map(points: &PointSet, posteriors: &PointPosteriors, prior: &LabelProbMap) -> Result<LabelProbMap> {
    if posteriors.len() != points.len() || posteriors.num_labels() != prior.num_labels() {
        return Err(Error::invalid("posteriors do not match the point set or the prior map"));
    }
    if points.source_dims() != (prior.width(), prior.height()) {
        return Err(Error::invalid(format!(
            "points come from a {:?} frame, prior map is {}x{}",
            points.source_dims(),
            prior.width(),
            prior.height()
        )));
    }
    let mut out = prior.clone();
    for i in 0..points.len() {
        let (x, y) = (points.x(i) as usize, points.y(i) as usize);
        for (j, v) in posteriors.labels(i).iter().enumerate() {
            out.set(j, x, y, *v as f32);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::e_step;
    use crate::model::{Exponent, LabelSet, LpComponent, Similarity, TransformState};

    fn model() -> LpMixtureModel {
        let p = Exponent::QUARTIC;
        LpMixtureModel::new(
            LabelSet::new(["window", "door", "balcony"]).unwrap(),
            p,
            (40, 40),
            vec![
                LpComponent {
                    label: 0,
                    center: [10.0, 10.0],
                    spread: [p.spread_from_variance(8.0), p.spread_from_variance(8.0)],
                    weight: 0.5,
                },
                LpComponent {
                    label: 1,
                    center: [30.0, 25.0],
                    spread: [p.spread_from_variance(8.0), p.spread_from_variance(20.0)],
                    weight: 0.5,
                },
            ],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn concentrated_and_outlier_points() {
        let m = model();
        let mut ps = PointSet::new(40, 40, 3);
        ps.push(10.0, 10.0, &[0.9, 0.0, 0.0]).unwrap();
        ps.push(0.0, 39.0, &[0.0, 0.0, 0.5]).unwrap();
        let resp = Responsibilities::new(vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0], 2).unwrap();
        let post = posterior_labels(&ps, &resp, &m).unwrap();
        assert_eq!(post.labels(0), &[1.0, 0.0, 0.0]);
        assert_eq!(post.outlier(0), 0.0);
        assert_eq!(post.labels(1), &[0.0, 0.0, 0.0]);
        assert_eq!(post.outlier(1), 1.0);
    }

    #[test]
    fn door_geometry_overrides_a_window_prior() {
        let m = model();
        let mut ps = PointSet::new(40, 40, 3);
        ps.push(30.0, 26.0, &[0.6, 0.4, 0.0]).unwrap();
        let state = TransformState::from_model(&m, Similarity::IDENTITY, 0.1);
        let resp = e_step(&ps, &m, &state);
        let post = posterior_labels(&ps, &resp, &m).unwrap();
        assert!(post.labels(0)[1] > post.labels(0)[0], "{:?}", post.labels(0));
        let sum: f64 = post.labels(0).iter().sum::<f64>() + post.outlier(0);
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_point_set_keeps_the_prior() {
        let m = model();
        let mut prior = LabelProbMap::zeros(40, 40, m.labels().clone());
        prior.set(2, 3, 4, 0.7);
        let ps = PointSet::new(40, 40, 3);
        let resp = Responsibilities::new(vec![], vec![], 2).unwrap();
        let post = posterior_labels(&ps, &resp, &m).unwrap();
        assert_eq!(render_posterior_map(&ps, &post, &prior).unwrap(), prior);
    }

    #[test]
    fn identical_components_keep_prior_ratios() {
        let p = Exponent::QUARTIC;
        let comp = |label| LpComponent {
            label,
            center: [20.0, 20.0],
            spread: [p.spread_from_variance(30.0), p.spread_from_variance(30.0)],
            weight: 0.5,
        };
        let m = LpMixtureModel::new(
            LabelSet::new(["window", "door"]).unwrap(),
            p,
            (40, 40),
            vec![comp(0), comp(1)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let mut ps = PointSet::new(40, 40, 2);
        ps.push(22.0, 18.0, &[0.3, 0.6]).unwrap();
        ps.push(19.0, 21.0, &[0.7, 0.1]).unwrap();
        let resp = e_step(&ps, &m, &TransformState::from_model(&m, Similarity::IDENTITY, 0.2));
        let post = posterior_labels(&ps, &resp, &m).unwrap();
        assert!((post.labels(0)[1] / post.labels(0)[0] - 2.0).abs() < 1e-12);
        assert!((post.labels(1)[0] / post.labels(1)[1] - 7.0).abs() < 1e-12);
    }
}
