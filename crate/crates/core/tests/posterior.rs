mod common;

use facadereg::em::e_step;
use facadereg::model::{Exponent, LabelProbMap, Similarity, TransformState};
use facadereg::posterior::{posterior_labels, render_posterior_map};
use proptest::prelude::*;
use rand::Rng;

use common::{random_model, rng, scatter_points};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn posteriors_are_probability_vectors(
        seed in 0u64..100_000,
        m in 1usize..8,
        labels in 1usize..4,
        quartic in any::<bool>(),
        alpha in 0.01f64..0.9,
    ) {
        let mut rng = rng(seed);
        let p = if quartic { Exponent::QUARTIC } else { Exponent::GAUSSIAN };
        let labels = labels.min(m);
        let model = random_model(&mut rng, m, p, (80, 60), labels);
        let theta = Similarity::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0), rng.gen_range(0.7..1.4)).unwrap();
        let points = scatter_points(&mut rng, &model, &theta, (120, 100), 200, 30);
        let state = TransformState {
            similarity: theta,
            weights: model.components().iter().map(|c| c.weight).collect(),
            outlier_rate: alpha,
        };
        let resp = e_step(&points, &model, &state);
        let post = posterior_labels(&points, &resp, &model).unwrap();
        prop_assert_eq!(post.len(), points.len());
        for i in 0..post.len() {
            let row = post.labels(i);
            prop_assert!(row.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
            prop_assert!((0.0..=1.0).contains(&post.outlier(i)));
            let total = row.iter().sum::<f64>() + post.outlier(i);
            prop_assert!((total - 1.0).abs() <= 1e-9, "point {}: {}", i, total);
        }

        let prior = LabelProbMap::zeros(120, 100, model.labels().clone());
        let map = render_posterior_map(&points, &post, &prior).unwrap();
        map.validate().unwrap();
        for i in 0..points.len() {
            let (x, y) = (points.x(i) as usize, points.y(i) as usize);
            prop_assert!(map.pixel_sum(x, y) <= 1.0 + 1e-5);
        }
    }
}
