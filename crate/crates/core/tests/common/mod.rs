//! Shared builders for the integration tests.
#![allow(dead_code)]

use facadereg::em::BoundingBox;
use facadereg::eval::{generate_instance, perturb_box, SynthInstance, SynthSpec};
use facadereg::extraction::extract_points;
use facadereg::model::{Exponent, LabelSet, LpComponent, LpMixtureModel, PointSet, Similarity};
use facadereg::reference::build_model;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Facade layout and corruption of a registration case.
#[derive(Debug, Clone)]
pub struct Layout {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
    pub doors: (usize, usize),
    pub scale: (f64, f64),
    /// Translation range as a fraction of the target size.
    pub shift: (f64, f64),
    pub clutter: f64,
    pub prior_noise: f64,
    /// Edge displacement of the initialisation box.
    pub box_perturbation: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            rows: (3, 4),
            cols: (4, 5),
            doors: (1, 2),
            scale: (0.8, 1.25),
            shift: (0.02, 0.15),
            clutter: 0.1,
            prior_noise: 0.1,
            box_perturbation: 0.1,
        }
    }
}

pub struct Case {
    pub spec: SynthSpec,
    pub instance: SynthInstance,
    pub model: LpMixtureModel,
    pub points: PointSet,
    pub init_box: BoundingBox,
}

impl Case {
    pub fn truth(&self) -> Similarity {
        self.spec.truth
    }
}

/// Random facade drawn from `layout`; `edit` adjusts the spec (swaps,
/// occlusions) after the truth is sampled.
pub fn case_with(seed: u64, layout: &Layout, edit: impl FnOnce(&mut SynthSpec, &mut ChaCha8Rng)) -> Case {
    let mut rng = rng(seed);
    let rows = rng.gen_range(layout.rows.0..=layout.rows.1);
    let cols = rng.gen_range(layout.cols.0..=layout.cols.1);
    let doors = rng.gen_range(layout.doors.0..=layout.doors.1);
    let mut spec = SynthSpec::windows_and_doors(rows, cols, doors);
    let (tw, th) = spec.target_dims;
    spec.truth = Similarity::new(
        rng.gen_range(layout.shift.0..=layout.shift.1) * tw as f64,
        rng.gen_range(layout.shift.0..=layout.shift.1) * th as f64,
        rng.gen_range(layout.scale.0..=layout.scale.1),
    )
    .unwrap();
    spec.clutter_fraction = layout.clutter;
    spec.prior_noise = layout.prior_noise;
    spec.seed = seed;
    edit(&mut spec, &mut rng);
    let instance = generate_instance(&spec).unwrap();
    let model = build_model(&instance.reference, Exponent::QUARTIC).unwrap();
    let points = extract_points(&instance.target, 0.01).unwrap();
    let init_box = perturb_box(&instance.truth.facade_box, layout.box_perturbation, &mut rng);
    Case {
        spec,
        instance,
        model,
        points,
        init_box,
    }
}

pub fn case(seed: u64, layout: &Layout) -> Case {
    case_with(seed, layout, |_, _| {})
}

/// Random mixture with `m` components inside a `w × h` reference.
pub fn random_model(rng: &mut ChaCha8Rng, m: usize, p: Exponent, dims: (usize, usize), labels: usize) -> LpMixtureModel {
    let names: Vec<String> = (0..labels).map(|j| format!("l{j}")).collect();
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let comps: Vec<LpComponent> = raw
        .iter()
        .enumerate()
        .map(|(k, w)| {
            // spreads from an effective half-width of 2 to 10 px
            let width = [rng.gen_range(2.0..10.0), rng.gen_range(2.0..10.0)];
            LpComponent {
                label: k * labels / m,
                center: [rng.gen_range(10.0..dims.0 as f64 - 10.0), rng.gen_range(10.0..dims.1 as f64 - 10.0)],
                spread: [p.pow(width[0]), p.pow(width[1])],
                weight: w / total,
            }
        })
        .collect();
    let dirichlet = comps.iter().map(|c| c.weight).collect();
    LpMixtureModel::new(LabelSet::new(names).unwrap(), p, dims, comps, dirichlet).unwrap()
}

/// `n` points spread uniformly over the effective boxes of the components
/// of `model` under `theta`, plus `outliers` uniform points.
pub fn scatter_points(
    rng: &mut ChaCha8Rng,
    model: &LpMixtureModel,
    theta: &Similarity,
    frame: (usize, usize),
    n: usize,
    outliers: usize,
) -> PointSet {
    let k = model.num_labels();
    let mut points = PointSet::new(frame.0, frame.1, k);
    let mut prior = vec![0.0; k];
    let comps = model.components();
    let (fw, fh) = (frame.0 as f64, frame.1 as f64);
    while points.len() < n + outliers {
        let (x, y, label) = if points.len() < n {
            let c = &comps[rng.gen_range(0..comps.len())];
            let half = [c.spread[0].powf(1.0 / model.p().as_f64()), c.spread[1].powf(1.0 / model.p().as_f64())];
            let q = theta.apply([
                c.center[0] + rng.gen_range(-1.0..1.0) * half[0],
                c.center[1] + rng.gen_range(-1.0..1.0) * half[1],
            ]);
            (q[0], q[1], c.label)
        } else {
            (rng.gen_range(0.0..fw), rng.gen_range(0.0..fh), rng.gen_range(0..k))
        };
        if !(0.0..fw).contains(&x) || !(0.0..fh).contains(&y) {
            continue;
        }
        prior.iter_mut().for_each(|p| *p = rng.gen_range(0.0..0.1));
        prior[label] = rng.gen_range(0.5..0.85);
        points.push(x, y, &prior).unwrap();
    }
    points
}
