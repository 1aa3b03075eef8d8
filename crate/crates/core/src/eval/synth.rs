//! Procedural facades with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::em::BoundingBox;
use crate::error::{Error, Result};
use crate::model::{LabelProbMap, LabelSet, Similarity};
use crate::reference::ReferenceSegmentation;

/// Axis-aligned rectangle of reference pixels `[x, x + w) × [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub label: usize,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    /// Mean of the pixel indices covered.
    pub fn center(&self) -> [f64; 2] {
        [
            self.x as f64 + (self.w as f64 - 1.0) / 2.0,
            self.y as f64 + (self.h as f64 - 1.0) / 2.0,
        ]
    }

    fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.x + other.w && other.x < self.x + self.w && self.y < other.y + other.h && other.y < self.y + self.h
    }

    /// Continuous extent `[x0, x1] × [y0, y1]` in the target frame: each
    /// reference pixel covers a unit square around its index.
    pub fn in_target(&self, theta: &Similarity) -> [f64; 4] {
        let a = theta.apply([self.x as f64 - 0.5, self.y as f64 - 0.5]);
        let b = theta.apply([(self.x + self.w) as f64 - 0.5, (self.y + self.h) as f64 - 0.5]);
        [a[0], a[1], b[0], b[1]]
    }
}

/// `rows × cols` equally sized rectangles of one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RectGrid {
    pub label: usize,
    pub rows: usize,
    pub cols: usize,
    pub origin: [usize; 2],
    pub size: [usize; 2],
    pub pitch: [usize; 2],
}

impl RectGrid {
    pub fn rects(&self) -> impl Iterator<Item = Rect> + '_ {
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).map(move |c| Rect {
                label: self.label,
                x: self.origin[0] + c * self.pitch[0],
                y: self.origin[1] + r * self.pitch[1],
                w: self.size[0],
                h: self.size[1],
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub ref_dims: (usize, usize),
    pub labels: LabelSet,
    pub grids: Vec<RectGrid>,
    pub truth: Similarity,
    pub target_dims: (usize, usize),
    /// Prior of the true label inside a component.
    pub p_true: f64,
    /// Standard deviation of the noise on `p_true`.
    pub prior_noise: f64,
    /// Upper bound of the uniform per-label background prior.
    pub background_noise: f64,
    /// Components (in sorted order, see [`SynthInstance`]) whose prior
    /// favours the wrong label.
    pub swapped: Vec<usize>,
    /// Prior of the wrong label on swapped components.
    pub swap_prior: f64,
    /// Components whose whole target footprint is occluded.
    pub occluded: Vec<usize>,
    /// Extra occluded target rectangles `[x0, y0, x1, y1]`.
    pub occlusions: Vec<[f64; 4]>,
    /// Clutter pixels as a fraction of the facade pixel count.
    pub clutter_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// A facade of `rows × cols` windows above a row of doors; the reference
    /// frame fits the layout with a margin.
    pub fn windows_and_doors(rows: usize, cols: usize, doors: usize) -> Self {
        let margin = 8;
        let window = RectGrid {
            label: 0,
            rows,
            cols,
            origin: [margin + 5, margin],
            size: [11, 15],
            pitch: [24, 28],
        };
        let width = 2 * margin + cols * 24 + 2;
        let door_y = margin + rows * 28 + 2;
        let door_pitch = (width - 2 * margin).checked_div(doors).unwrap_or(0);
        let door = RectGrid {
            label: 1,
            rows: 1,
            cols: doors,
            origin: [margin + door_pitch / 2 - 7, door_y],
            size: [14, 24],
            pitch: [door_pitch, 0],
        };
        let height = door_y + 24 + margin;
        let mut grids = vec![window];
        if doors > 0 {
            grids.push(door);
        }
        Self {
            ref_dims: (width, height),
            labels: LabelSet::new(["window", "door"]).expect("static labels"),
            grids,
            truth: Similarity::IDENTITY,
            target_dims: (width * 3 / 2, height * 3 / 2),
            p_true: 0.8,
            prior_noise: 0.1,
            background_noise: 0.005,
            swapped: Vec::new(),
            swap_prior: 0.6,
            occluded: Vec::new(),
            occlusions: Vec::new(),
            clutter_fraction: 0.0,
            seed: 0,
        }
    }

    /// Reference rectangles sorted by `(label, center y, center x)`, the
    /// order in which the reference fit emits components.
    pub fn rects(&self) -> Vec<Rect> {
        let mut rects: Vec<Rect> = self.grids.iter().flat_map(|g| g.rects()).collect();
        rects.sort_by(|a, b| {
            a.label
                .cmp(&b.label)
                .then(a.center()[1].total_cmp(&b.center()[1]))
                .then(a.center()[0].total_cmp(&b.center()[0]))
        });
        rects
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.ref_dims;
        let rects = self.rects();
        if rects.is_empty() {
            return Err(Error::invalid("synthetic facade has no components"));
        }
        for (k, r) in rects.iter().enumerate() {
            if r.label >= self.labels.len() {
                return Err(Error::invalid(format!("component {k} has unknown label {}", r.label)));
            }
            if r.w == 0 || r.h == 0 || r.x + r.w > w || r.y + r.h > h {
                return Err(Error::invalid(format!("component {k} does not fit the {w}x{h} reference")));
            }
            if let Some(j) = rects[..k].iter().position(|o| o.label == r.label && o.overlaps(r)) {
                return Err(Error::invalid(format!("components {j} and {k} overlap")));
            }
        }
        for &k in self.swapped.iter().chain(&self.occluded) {
            if k >= rects.len() {
                return Err(Error::invalid(format!("component index {k} out of range")));
            }
        }
        if self.swapped.iter().any(|_| self.labels.len() < 2) {
            return Err(Error::invalid("label swaps need at least two labels"));
        }
        for (name, v) in [("p_true", self.p_true), ("swap_prior", self.swap_prior)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.prior_noise >= 0.0 && self.background_noise >= 0.0 && self.clutter_fraction >= 0.0) {
            return Err(Error::invalid("noise levels must be non-negative"));
        }
        if self.truth.s <= 0.0 {
            return Err(Error::invalid("true scale must be positive"));
        }
        let inside = self.facade_fraction_inside();
        if inside < 0.25 {
            return Err(Error::invalid(format!(
                "only {:.0}% of the facade lies inside the target frame",
                inside * 100.0
            )));
        }
        Ok(())
    }

    /// Area fraction of the transformed reference frame inside the target.
    pub fn facade_fraction_inside(&self) -> f64 {
        let b = BoundingBox::of_reference(&self.truth, self.ref_dims);
        let ox = (b.x + b.width).min(self.target_dims.0 as f64) - b.x.max(0.0);
        let oy = (b.y + b.height).min(self.target_dims.1 as f64) - b.y.max(0.0);
        (ox.max(0.0) * oy.max(0.0)) / (b.width * b.height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub similarity: Similarity,
    /// The transformed reference frame.
    pub facade_box: BoundingBox,
    /// Per target pixel: `0` background, `j + 1` label `j`.
    pub label_map: Vec<u8>,
    /// Reference rectangles in model component order.
    pub rects: Vec<Rect>,
    /// Number of clutter pixels written.
    pub clutter: usize,
}

impl SynthTruth {
    pub fn label_at(&self, x: usize, y: usize, width: usize) -> u8 {
        self.label_map[y * width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub reference: ReferenceSegmentation,
    pub target: LabelProbMap,
    pub truth: SynthTruth,
}

/// Box whose four edges are each moved by up to `fraction` of the box
/// extent along their axis.
pub fn perturb_box(b: &BoundingBox, fraction: f64, rng: &mut impl Rng) -> BoundingBox {
    let mut jitter = |extent: f64| {
        if fraction > 0.0 {
            rng.gen_range(-fraction..=fraction) * extent
        } else {
            0.0
        }
    };
    let x0 = b.x + jitter(b.width);
    let x1 = b.x + b.width + jitter(b.width);
    let y0 = b.y + jitter(b.height);
    let y1 = b.y + b.height + jitter(b.height);
    BoundingBox::new(x0, y0, x1 - x0, y1 - y0)
}

/// Closed interval sampled uniformly; `lo == hi` is a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    pub fn constant(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("bad range {lo}..{hi}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

/// A family of instances: a base spec whose true similarity is drawn per
/// instance, plus a perturbed initialisation box for each.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPlan {
    pub base: SynthSpec,
    pub tx: ValueRange,
    pub ty: ValueRange,
    pub s: ValueRange,
    pub instances: usize,
    /// Edge displacement of the initialisation box, fraction of the facade.
    pub box_perturbation: f64,
}

impl SynthPlan {
    /// Spec and initialisation box of instance `k`, seeded with
    /// `base.seed + k`.
    pub fn instance(&self, k: usize) -> Result<(SynthSpec, BoundingBox)> {
        let seed = self.base.seed.wrapping_add(k as u64);
        // separate stream from the pixel generator
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_edb0_c50f_f5e7);
        let truth = Similarity::new(self.tx.sample(&mut rng), self.ty.sample(&mut rng), self.s.sample(&mut rng))?;
        let spec = SynthSpec {
            truth,
            seed,
            ..self.base.clone()
        };
        let bbox = perturb_box(
            &BoundingBox::of_reference(&truth, spec.ref_dims),
            self.box_perturbation,
            &mut rng,
        );
        Ok((spec, bbox))
    }
}

fn pixel_span(lo: f64, hi: f64, limit: usize) -> std::ops::Range<usize> {
    // pixels whose index lies in [lo, hi)
    let a = lo.ceil().max(0.0) as usize;
    let b = (hi.ceil().max(0.0) as usize).min(limit);
    a..b.max(a)
}

/// Reference mask and corrupted target prior for `spec`. The same spec
/// always yields bit-identical output.
pub fn generate_instance(spec: &SynthSpec) -> Result<SynthInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rects = spec.rects();
    let k = spec.labels.len();
    let (rw, rh) = spec.ref_dims;
    let (tw, th) = spec.target_dims;

    let mut mask = vec![0u8; rw * rh];
    for r in &rects {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                mask[y * rw + x] = (r.label + 1) as u8;
            }
        }
    }
    let reference = ReferenceSegmentation::new(rw, rh, spec.labels.clone(), mask)?;

    let mut target = LabelProbMap::zeros(tw, th, spec.labels.clone());
    if spec.background_noise > 0.0 {
        for y in 0..th {
            for x in 0..tw {
                for j in 0..k {
                    let v = rng.gen::<f64>() * spec.background_noise / k as f64;
                    target.set(j, x, y, v as f32);
                }
            }
        }
    }

    let noise = Normal::new(0.0, spec.prior_noise.max(1e-300)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut label_map = vec![0u8; tw * th];
    let mut facade_pixels = 0usize;
    let mut prior = vec![0.0f64; k];
    for (idx, r) in rects.iter().enumerate() {
        let [x0, y0, x1, y1] = r.in_target(&spec.truth);
        let swapped = spec.swapped.contains(&idx);
        for y in pixel_span(y0, y1, th) {
            for x in pixel_span(x0, x1, tw) {
                label_map[y * tw + x] = (r.label + 1) as u8;
                facade_pixels += 1;
                prior.iter_mut().for_each(|v| *v = 0.0);
                if swapped {
                    let jitter = rng.gen_range(0.9..=1.0);
                    prior[(r.label + 1) % k] = spec.swap_prior * jitter;
                    prior[r.label] = (1.0 - spec.swap_prior) * jitter;
                } else {
                    let pt = if spec.prior_noise > 0.0 {
                        (spec.p_true + noise.sample(&mut rng)).clamp(0.05, 0.99)
                    } else {
                        spec.p_true
                    };
                    prior[r.label] = pt;
                    if k > 1 {
                        let rest = (1.0 - pt) * rng.gen::<f64>();
                        let other = (r.label + rng.gen_range(1..k)) % k;
                        prior[other] = rest;
                    }
                }
                for (j, v) in prior.iter().enumerate() {
                    target.set(j, x, y, *v as f32);
                }
            }
        }
    }

    let mut occlusions = spec.occlusions.clone();
    for &idx in &spec.occluded {
        let [x0, y0, x1, y1] = rects[idx].in_target(&spec.truth);
        occlusions.push([x0 - 1.0, y0 - 1.0, x1 + 1.0, y1 + 1.0]);
    }
    for [x0, y0, x1, y1] in occlusions {
        for y in pixel_span(y0, y1, th) {
            for x in pixel_span(x0, x1, tw) {
                for j in 0..k {
                    target.set(j, x, y, 0.0);
                }
            }
        }
    }

    let clutter = (spec.clutter_fraction * facade_pixels as f64).round() as usize;
    let mut written = 0;
    let mut attempts = 0;
    while written < clutter && attempts < clutter * 20 {
        attempts += 1;
        let x = rng.gen_range(0..tw);
        let y = rng.gen_range(0..th);
        if label_map[y * tw + x] != 0 {
            continue;
        }
        let j = rng.gen_range(0..k);
        for l in 0..k {
            target.set(l, x, y, 0.0);
        }
        target.set(j, x, y, rng.gen_range(0.2..0.9) as f32);
        written += 1;
    }

    Ok(SynthInstance {
        reference,
        target,
        truth: SynthTruth {
            similarity: spec.truth,
            facade_box: BoundingBox::of_reference(&spec.truth, spec.ref_dims),
            label_map,
            rects,
            clutter: written,
        },
    })
}
