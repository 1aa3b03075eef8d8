//! Registration state, posterior responsibilities and the MAP objective.

use super::density::{lp_norm_term_unchecked, Exponent, LpMixtureModel};
use super::points::PointSet;
use super::transform::Similarity;
use crate::error::{Error, Result};

/// Weights below this value are treated as this value inside logarithms.
pub const WEIGHT_FLOOR: f64 = 1e-8;

/// Smallest value of `ln D_i` reported for a point with no support at all.
const LN_SUPPORT_FLOOR: f64 = -745.0;

/// Full parameter vector Θ: similarity, mixture weights and outlier rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformState {
    pub similarity: Similarity,
    pub weights: Vec<f64>,
    pub outlier_rate: f64,
}

impl TransformState {
    /// State with the model's reference weights.
    pub fn from_model(model: &LpMixtureModel, similarity: Similarity, outlier_rate: f64) -> Self {
        Self {
            similarity,
            weights: model.weights(),
            outlier_rate,
        }
    }

    pub fn validate(&self, model: &LpMixtureModel) -> Result<()> {
        if !(self.similarity.s > 0.0 && self.similarity.s.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {}", self.similarity.s)));
        }
        if !(self.similarity.tx.is_finite() && self.similarity.ty.is_finite()) {
            return Err(Error::NonFinite("translation"));
        }
        if self.weights.len() != model.len() {
            return Err(Error::invalid(format!(
                "state has {} weights, model has {} components",
                self.weights.len(),
                model.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be non-negative"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > super::density::WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid(format!("weights sum to {sum}")));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(Error::invalid(format!("outlier rate {} outside [0, 1)", self.outlier_rate)));
        }
        Ok(())
    }
}

/// E-step output: `beta` is `N × M` row-major, `gamma` has length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    beta: Vec<f64>,
    gamma: Vec<f64>,
    num_components: usize,
}

impl Responsibilities {
    pub fn new(beta: Vec<f64>, gamma: Vec<f64>, num_components: usize) -> Result<Self> {
        if beta.len() != gamma.len() * num_components {
            return Err(Error::invalid("beta must be N x M"));
        }
        Ok(Self {
            beta,
            gamma,
            num_components,
        })
    }

    pub(crate) fn zeros(num_points: usize, num_components: usize) -> Self {
        Self {
            beta: vec![0.0; num_points * num_components],
            gamma: vec![0.0; num_points],
            num_components,
        }
    }

    pub fn num_points(&self) -> usize {
        self.gamma.len()
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    #[inline]
    pub fn beta_row(&self, i: usize) -> &[f64] {
        &self.beta[i * self.num_components..(i + 1) * self.num_components]
    }

    #[inline]
    pub(crate) fn beta_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.beta[i * self.num_components..(i + 1) * self.num_components]
    }

    #[inline]
    pub fn beta(&self, i: usize, c: usize) -> f64 {
        self.beta[i * self.num_components + c]
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub(crate) fn gamma_mut(&mut self) -> &mut [f64] {
        &mut self.gamma
    }

    /// `Σ_i β_{i,c}` per component.
    pub fn component_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.num_components];
        for row in self.beta.chunks_exact(self.num_components) {
            for (t, b) in totals.iter_mut().zip(row) {
                *t += b;
            }
        }
        totals
    }

    pub fn outlier_total(&self) -> f64 {
        self.gamma.iter().sum()
    }
}

/// Per-component quantities that depend on Θ but not on the point.
#[derive(Debug, Clone)]
pub(crate) struct ComponentFrame {
    pub label: Vec<usize>,
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
    /// `1/(s^p Σxx)`, `1/(s^p Σyy)`.
    pub inv_x: Vec<f64>,
    pub inv_y: Vec<f64>,
    /// `π_c / Z_c(s)`.
    pub coef: Vec<f64>,
    /// `ln π_c - ln Z_c(s)`.
    pub ln_coef: Vec<f64>,
    /// `α / (H·W)`.
    pub lambda: f64,
    pub p: Exponent,
}

impl ComponentFrame {
    pub fn new(model: &LpMixtureModel, state: &TransformState, frame_area: f64) -> Self {
        let p = model.p();
        let theta = state.similarity;
        let sp = p.pow(theta.s);
        let m = model.len();
        let mut frame = ComponentFrame {
            label: Vec::with_capacity(m),
            cx: Vec::with_capacity(m),
            cy: Vec::with_capacity(m),
            inv_x: Vec::with_capacity(m),
            inv_y: Vec::with_capacity(m),
            coef: Vec::with_capacity(m),
            ln_coef: Vec::with_capacity(m),
            lambda: state.outlier_rate / frame_area,
            p,
        };
        for (c, w) in model.components().iter().zip(&state.weights) {
            let center = theta.apply(c.center);
            let ln_coef = w.ln() - c.ln_normalizer(theta.s, p);
            frame.label.push(c.label);
            frame.cx.push(center[0]);
            frame.cy.push(center[1]);
            frame.inv_x.push(1.0 / (sp * c.spread[0]));
            frame.inv_y.push(1.0 / (sp * c.spread[1]));
            frame.coef.push(ln_coef.exp());
            frame.ln_coef.push(ln_coef);
        }
        frame
    }

    #[inline]
    fn rho(&self, c: usize, x: f64, y: f64) -> f64 {
        let p = self.p;
        p.pow(x - self.cx[c]) * self.inv_x[c] + p.pow(y - self.cy[c]) * self.inv_y[c]
    }

    /// Writes the unnormalized terms `π N_p prior` into `terms` and returns
    /// `ln D_i`, where `D_i = Σ terms + λ`.
    ///
    /// Terms are evaluated directly; when `D_i` underflows the point is
    /// re-evaluated in the log domain and `terms` hold the responsibilities
    /// themselves (see [`PointSupport::Log`]).
    #[inline]
    pub fn point_terms(&self, x: f64, y: f64, prior: &[f64], terms: &mut [f64]) -> PointSupport {
        let mut sum = 0.0;
        for c in 0..terms.len() {
            let pr = prior[self.label[c]];
            let t = if pr > 0.0 {
                self.coef[c] * pr * (-self.rho(c, x, y)).exp()
            } else {
                0.0
            };
            terms[c] = t;
            sum += t;
        }
        let total = sum + self.lambda;
        if total >= f64::MIN_POSITIVE * 1e3 {
            return PointSupport::Linear { total };
        }
        // Log-sum-exp fallback.
        let mut max = if self.lambda > 0.0 { self.lambda.ln() } else { f64::NEG_INFINITY };
        for c in 0..terms.len() {
            let pr = prior[self.label[c]];
            let l = if pr > 0.0 {
                self.ln_coef[c] + pr.ln() - self.rho(c, x, y)
            } else {
                f64::NEG_INFINITY
            };
            terms[c] = l;
            max = max.max(l);
        }
        if max == f64::NEG_INFINITY {
            terms.iter_mut().for_each(|t| *t = 0.0);
            return PointSupport::Empty;
        }
        let mut acc = if self.lambda > 0.0 {
            (self.lambda.ln() - max).exp()
        } else {
            0.0
        };
        for t in terms.iter_mut() {
            *t = (*t - max).exp();
            acc += *t;
        }
        let ln_total = max + acc.ln();
        // terms now hold exp(l_c - max); rescale to fractions of D_i.
        terms.iter_mut().for_each(|t| *t /= acc);
        PointSupport::Log {
            ln_total,
            lambda_fraction: if self.lambda > 0.0 {
                (self.lambda.ln() - ln_total).exp()
            } else {
                0.0
            },
        }
    }
}

/// How `D_i` was evaluated by [`ComponentFrame::point_terms`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PointSupport {
    /// `terms` hold the raw products; `total = D_i`.
    Linear { total: f64 },
    /// `terms` already hold `β` fractions; `lambda_fraction = γ`.
    Log { ln_total: f64, lambda_fraction: f64 },
    /// No component and no outlier mass: `D_i = 0`.
    Empty,
}

impl PointSupport {
    #[inline]
    pub fn ln_total(&self) -> f64 {
        match *self {
            PointSupport::Linear { total } => total.ln(),
            PointSupport::Log { ln_total, .. } => ln_total,
            PointSupport::Empty => LN_SUPPORT_FLOOR,
        }
    }
}

/// `Σ_c (α_c - 1)·ln π_c`, with `π` floored at [`WEIGHT_FLOOR`].
pub fn dirichlet_log_prior(weights: &[f64], dirichlet: &[f64]) -> f64 {
    weights
        .iter()
        .zip(dirichlet)
        .map(|(w, a)| if *a == 1.0 { 0.0 } else { (a - 1.0) * w.max(WEIGHT_FLOOR).ln() })
        .sum()
}

/// The MAP objective
/// `R = Σ_i ln[Σ_c π_c N_p(X_i | Tμ_c, s^pΣ_c) P(l_c | i) + α/(HW)] + Σ_c (α_c - 1) ln π_c`.
///
/// `H·W` is taken from the point set's source frame.
pub fn map_objective(points: &PointSet, model: &LpMixtureModel, state: &TransformState) -> f64 {
    let frame = ComponentFrame::new(model, state, points.frame_area());
    let mut terms = vec![0.0; model.len()];
    let mut total = 0.0;
    for i in 0..points.len() {
        total += frame
            .point_terms(points.x(i), points.y(i), points.prior(i), &mut terms)
            .ln_total();
    }
    total + dirichlet_log_prior(&state.weights, model.dirichlet())
}

/// `Σ_i β_{i,c} (ln Z_c(s) + ρ_{i,c})`, the Θ-dependent negative part of the
/// reduced M-step objective, evaluated by direct summation.
pub fn geometric_energy(points: &PointSet, model: &LpMixtureModel, resp: &Responsibilities, theta: &Similarity) -> f64 {
    let p = model.p();
    let mut total = 0.0;
    for (c, comp) in model.components().iter().enumerate() {
        let center = theta.apply(comp.center);
        let ln_z = comp.ln_normalizer(theta.s, p);
        for i in 0..points.len() {
            let b = resp.beta(i, c);
            if b == 0.0 {
                continue;
            }
            let d = [points.x(i) - center[0], points.y(i) - center[1]];
            total += b * (ln_z + lp_norm_term_unchecked(d, comp.spread, theta.s, p));
        }
    }
    total
}

/// Reduced M-step objective `R̃`: the terms of `Q + ln P(Θ)` that depend on Θ,
/// with the label-prior term dropped.
pub fn reduced_objective(
    points: &PointSet,
    model: &LpMixtureModel,
    resp: &Responsibilities,
    state: &TransformState,
) -> f64 {
    let totals = resp.component_totals();
    let weight_term: f64 = totals
        .iter()
        .zip(&state.weights)
        .map(|(b, w)| b * w.max(WEIGHT_FLOOR).ln())
        .sum();
    let lambda = state.outlier_rate / points.frame_area();
    let outlier_term = if resp.outlier_total() > 0.0 {
        resp.outlier_total() * lambda.ln()
    } else {
        0.0
    };
    -geometric_energy(points, model, resp, &state.similarity)
        + weight_term
        + outlier_term
        + dirichlet_log_prior(&state.weights, model.dirichlet())
}
