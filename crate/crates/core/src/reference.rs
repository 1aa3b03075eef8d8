//! Reference model construction from a ground-truth segmentation.
//!
//! Every 4-connected component of every label becomes one Lp Gaussian. The
//! component is initialised from its pixel moments and then refined so that
//! `exp(-‖q - μ‖_{p,Σ}^p)` matches the component's indicator function.

use std::collections::VecDeque;

use log::warn;
use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::model::{Exponent, LabelSet, LpComponent, LpMixtureModel};

/// Components with fewer pixels are dropped.
pub const MIN_COMPONENT_PX: usize = 4;
/// Lower bound on the per-axis coordinate variance, in px².
pub const VARIANCE_FLOOR: f64 = 0.25;

const MAX_REFINE_ITERS: usize = 50;
const STEP_TOLERANCE: f64 = 1e-6;
const SPREAD_BOX: (f64, f64) = (0.25, 4.0);

/// Indexed label mask of the reference image: `0` is background, `j + 1`
/// is label `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSegmentation {
    width: usize,
    height: usize,
    labels: LabelSet,
    mask: Vec<u8>,
}

impl ReferenceSegmentation {
    pub fn new(width: usize, height: usize, labels: LabelSet, mask: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("segmentation must be non-empty"));
        }
        if mask.len() != width * height {
            return Err(Error::invalid(format!(
                "mask has {} pixels, expected {}x{}",
                mask.len(),
                width,
                height
            )));
        }
        if let Some(v) = mask.iter().find(|v| **v as usize > labels.len()) {
            return Err(Error::invalid(format!(
                "mask value {v} exceeds the number of labels ({})",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            mask,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.mask[y * self.width + x]
    }
}

/// A 4-connected set of pixels sharing one label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectedComponent {
    pub label: usize,
    pub pixels: Vec<(usize, usize)>,
}

impl ConnectedComponent {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)`.
    pub fn bounding_box(&self) -> (usize, usize, usize, usize) {
        let mut b = (usize::MAX, usize::MAX, 0, 0);
        for &(x, y) in &self.pixels {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }
}

/// 4-connected components of every label, in raster order of their first
/// pixel. Components smaller than `min_component_px` are discarded.
pub fn extract_components(seg: &ReferenceSegmentation, min_component_px: usize) -> Result<Vec<ConnectedComponent>> {
    let (w, h) = (seg.width, seg.height);
    let mut visited = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        let value = seg.mask[start];
        if value == 0 || visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % w, idx / w);
            pixels.push((x, y));
            let mut visit = |n: usize| {
                if !visited[n] && seg.mask[n] == value {
                    visited[n] = true;
                    queue.push_back(n);
                }
            };
            if x > 0 {
                visit(idx - 1);
            }
            if x + 1 < w {
                visit(idx + 1);
            }
            if y > 0 {
                visit(idx - w);
            }
            if y + 1 < h {
                visit(idx + w);
            }
        }
        if pixels.len() >= min_component_px {
            out.push(ConnectedComponent {
                label: value as usize - 1,
                pixels,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyReferenceModel);
    }
    Ok(out)
}

/// Center and spread from the pixel moments of a component.
///
/// The spread is chosen so that each 1D marginal of the Lp Gaussian has the
/// component's coordinate variance (floored at [`VARIANCE_FLOOR`]). The
/// returned weight is zero; it is assigned by [`build_model`].
pub fn moment_init(cc: &ConnectedComponent, p: Exponent) -> LpComponent {
    let n = cc.len() as f64;
    let (sx, sy) = cc
        .pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x as f64, b + y as f64));
    let mean = [sx / n, sy / n];
    let (vx, vy) = cc.pixels.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        let dx = x as f64 - mean[0];
        let dy = y as f64 - mean[1];
        (a + dx * dx, b + dy * dy)
    });
    let var = [(vx / n).max(VARIANCE_FLOOR), (vy / n).max(VARIANCE_FLOOR)];
    LpComponent {
        label: cc.label,
        center: mean,
        spread: [p.spread_from_variance(var[0]), p.spread_from_variance(var[1])],
        weight: 0.0,
    }
}

/// Outcome of [`refine_component`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    /// Iteration budget exhausted while still improving.
    MaxIterations,
    /// A spread left the safeguard box and was clamped.
    Clamped,
    /// The refinement failed; the moment initialisation is returned.
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedComponent {
    pub component: LpComponent,
    pub status: FitStatus,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_trace: Vec<f64>,
}

/// Residual window: indicator of the component over its bounding box
/// dilated by half its size on every side, clipped to the image.
struct FitWindow {
    xs: Vec<f64>,
    ys: Vec<f64>,
    target: Vec<f64>,
}

impl FitWindow {
    fn new(cc: &ConnectedComponent, image_dims: (usize, usize)) -> Self {
        let (x0, y0, x1, y1) = cc.bounding_box();
        let dx = (x1 - x0 + 1).div_ceil(2);
        let dy = (y1 - y0 + 1).div_ceil(2);
        let wx0 = x0.saturating_sub(dx);
        let wy0 = y0.saturating_sub(dy);
        let wx1 = (x1 + dx).min(image_dims.0 - 1);
        let wy1 = (y1 + dy).min(image_dims.1 - 1);
        let ww = wx1 - wx0 + 1;
        let wh = wy1 - wy0 + 1;
        let mut inside = vec![false; ww * wh];
        for &(x, y) in &cc.pixels {
            inside[(y - wy0) * ww + (x - wx0)] = true;
        }
        let mut win = FitWindow {
            xs: Vec::with_capacity(ww * wh),
            ys: Vec::with_capacity(ww * wh),
            target: Vec::with_capacity(ww * wh),
        };
        for j in 0..wh {
            for i in 0..ww {
                win.xs.push((wx0 + i) as f64);
                win.ys.push((wy0 + j) as f64);
                win.target.push(if inside[j * ww + i] { 1.0 } else { 0.0 });
            }
        }
        win
    }

    /// `Σ_q [1_cc(q) - exp(-ρ(q))]²` with params `(μx, μy, ln Σxx, ln Σyy)`.
    fn cost(&self, params: &Vector4<f64>, p: Exponent) -> f64 {
        let (ix, iy) = ((-params[2]).exp(), (-params[3]).exp());
        let mut cost = 0.0;
        for q in 0..self.xs.len() {
            let rho = p.pow(self.xs[q] - params[0]) * ix + p.pow(self.ys[q] - params[1]) * iy;
            let r = self.target[q] - (-rho).exp();
            cost += r * r;
        }
        cost
    }

    /// Normal equations `JᵀJ` and `Jᵀr` of the residual vector.
    fn normal_equations(&self, params: &Vector4<f64>, p: Exponent) -> (Matrix4<f64>, Vector4<f64>) {
        let pf = p.as_f64();
        let pm1 = p.get() as i32 - 1;
        let (ix, iy) = ((-params[2]).exp(), (-params[3]).exp());
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for q in 0..self.xs.len() {
            let dx = self.xs[q] - params[0];
            let dy = self.ys[q] - params[1];
            let px = p.pow(dx) * ix;
            let py = p.pow(dy) * iy;
            let e = (-(px + py)).exp();
            let r = self.target[q] - e;
            // r = t - exp(-ρ); ∂r/∂θ = exp(-ρ)·∂ρ/∂θ
            let j = Vector4::new(
                e * (-pf * dx.powi(pm1) * ix),
                e * (-pf * dy.powi(pm1) * iy),
                e * (-px),
                e * (-py),
            );
            jtj += j * j.transpose();
            jtr += j * r;
        }
        (jtj, jtr)
    }
}

/// Levenberg-damped Gauss-Newton fit of `(μ, Σ)` to the component indicator.
///
/// Parameters are `(μx, μy, ln Σxx, ln Σyy)`. The output cost never exceeds
/// the cost of `init`.
pub fn refine_component(
    cc: &ConnectedComponent,
    init: &LpComponent,
    p: Exponent,
    image_dims: (usize, usize),
) -> RefinedComponent {
    let window = FitWindow::new(cc, image_dims);
    let start = Vector4::new(init.center[0], init.center[1], init.spread[0].ln(), init.spread[1].ln());
    let initial_cost = window.cost(&start, p);
    let fallback = |status| RefinedComponent {
        component: init.clone(),
        status,
        initial_cost,
        final_cost: initial_cost,
        cost_trace: vec![initial_cost],
    };

    let mut params = start;
    let mut cost = initial_cost;
    let mut trace = vec![cost];
    let mut damping = 1e-3;
    let mut status = FitStatus::MaxIterations;
    for _ in 0..MAX_REFINE_ITERS {
        let (jtj, jtr) = window.normal_equations(&params, p);
        if !jtj.iter().chain(jtr.iter()).all(|v| v.is_finite()) {
            warn!("reference fit diverged for a component of label {}", cc.label);
            return fallback(FitStatus::Diverged);
        }
        if jtr.norm() == 0.0 {
            status = FitStatus::Converged;
            break;
        }
        let mut accepted = false;
        while damping < 1e12 {
            let mut lhs = jtj;
            for k in 0..4 {
                lhs[(k, k)] += damping * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = lhs.cholesky().map(|c| c.solve(&(-jtr))) else {
                damping *= 10.0;
                continue;
            };
            let candidate = params + step;
            let candidate_cost = window.cost(&candidate, p);
            if candidate_cost.is_finite() && candidate_cost < cost {
                params = candidate;
                cost = candidate_cost;
                trace.push(cost);
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                if step.norm() < STEP_TOLERANCE {
                    status = FitStatus::Converged;
                }
                break;
            }
            if step.norm() < STEP_TOLERANCE {
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            status = FitStatus::Converged;
            break;
        }
        if status == FitStatus::Converged {
            break;
        }
    }

    let mut spread = [params[2].exp(), params[3].exp()];
    for (v, s0) in spread.iter_mut().zip(init.spread) {
        let (lo, hi) = (s0 * SPREAD_BOX.0, s0 * SPREAD_BOX.1);
        if *v < lo || *v > hi {
            *v = v.clamp(lo, hi);
            status = FitStatus::Clamped;
        }
    }
    if status == FitStatus::Clamped {
        params[2] = spread[0].ln();
        params[3] = spread[1].ln();
        cost = window.cost(&params, p);
        if cost > initial_cost {
            warn!("clamped reference fit is worse than its initialisation; keeping moments");
            return fallback(FitStatus::Clamped);
        }
        trace.push(cost);
    }
    RefinedComponent {
        component: LpComponent {
            label: init.label,
            center: [params[0], params[1]],
            spread,
            weight: init.weight,
        },
        status,
        initial_cost,
        final_cost: cost,
        cost_trace: trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFitOptions {
    pub min_component_px: usize,
    /// Run the Gauss-Newton refinement after the moment initialisation.
    pub refine: bool,
}

impl Default for ReferenceFitOptions {
    fn default() -> Self {
        Self {
            min_component_px: MIN_COMPONENT_PX,
            refine: true,
        }
    }
}

/// Builds the reference mixture with default options.
pub fn build_model(seg: &ReferenceSegmentation, p: Exponent) -> Result<LpMixtureModel> {
    build_model_with(seg, p, &ReferenceFitOptions::default()).map(|(m, _)| m)
}

/// Builds the reference mixture; also returns the fit status of each
/// component in model order.
///
/// Weights are pixel-count ratios over all retained components and the
/// Dirichlet parameters equal these initial weights.
pub fn build_model_with(
    seg: &ReferenceSegmentation,
    p: Exponent,
    options: &ReferenceFitOptions,
) -> Result<(LpMixtureModel, Vec<FitStatus>)> {
    let ccs = extract_components(seg, options.min_component_px)?;
    let total: usize = ccs.iter().map(ConnectedComponent::len).sum();
    // Order by the moment centers: pixel means are exact, so rows of equal
    // height sort left to right regardless of refinement round-off.
    let mut inits: Vec<(&ConnectedComponent, LpComponent)> = ccs
        .iter()
        .map(|cc| {
            let init = LpComponent {
                weight: cc.len() as f64 / total as f64,
                ..moment_init(cc, p)
            };
            (cc, init)
        })
        .collect();
    inits.sort_by(|(_, a), (_, b)| {
        a.label
            .cmp(&b.label)
            .then(a.center[1].total_cmp(&b.center[1]))
            .then(a.center[0].total_cmp(&b.center[0]))
    });
    let fitted: Vec<(LpComponent, FitStatus)> = inits
        .into_iter()
        .map(|(cc, init)| {
            if options.refine {
                let r = refine_component(cc, &init, p, (seg.width, seg.height));
                (r.component, r.status)
            } else {
                (init, FitStatus::Converged)
            }
        })
        .collect();
    let (components, statuses): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let dirichlet = components.iter().map(|c| c.weight).collect();
    let model = LpMixtureModel::new(seg.labels.clone(), p, (seg.width, seg.height), components, dirichlet)?;
    Ok((model, statuses))
}
