//! Axis-aligned Lp Gaussians and the reference mixture built from them.
//!
//! A component with center `μ` and spread `Σ = (Σxx, Σyy)`, transformed by a
//! similarity of scale `s`, has the density
//!
//! ```text
//! N_p(X | Tμ, s^p Σ) = exp(-(dx^p / (s^p Σxx) + dy^p / (s^p Σyy))) / Z
//! Z = (4 / p²) · Γ(1/p)² · s² · (Σxx Σyy)^(1/p)
//! ```
//!
//! where `(dx, dy) = X - Tμ`. `Z` is the exact integral of the numerator over
//! the plane, so the density is proper for every even `p`.

use statrs::function::gamma::{gamma, ln_gamma};

use super::labels::LabelSet;
use super::transform::Similarity;
use crate::error::{Error, Result};

/// Even exponent `p ≥ 2` of the Lp norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Exponent(u32);

impl Exponent {
    pub const GAUSSIAN: Exponent = Exponent(2);
    /// The default: nearly rectangular level sets at a tractable cost.
    pub const QUARTIC: Exponent = Exponent(4);

    pub fn new(p: u32) -> Result<Self> {
        if p < 2 || !p.is_multiple_of(2) {
            return Err(Error::invalid(format!("exponent p must be an even integer >= 2, got {p}")));
        }
        Ok(Exponent(p))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// `v^p` for the even exponent.
    #[inline]
    pub fn pow(self, v: f64) -> f64 {
        match self.0 {
            2 => v * v,
            4 => {
                let v2 = v * v;
                v2 * v2
            }
            p => v.powi(p as i32),
        }
    }

    /// `ln((4/p²)·Γ(1/p)²)`, the scale-free part of `ln Z`.
    pub fn ln_shape_constant(self) -> f64 {
        let p = self.as_f64();
        (4.0 / (p * p)).ln() + 2.0 * ln_gamma(1.0 / p)
    }

    /// Variance of the 1D density `∝ exp(-x^p / Σ)` divided by `Σ^(2/p)`.
    pub fn variance_factor(self) -> f64 {
        let p = self.as_f64();
        gamma(3.0 / p) / gamma(1.0 / p)
    }

    /// Moment constant `c_p` with `Σ = (c_p · var)^(p/2)`; `c_2 = 2`.
    pub fn moment_constant(self) -> f64 {
        1.0 / self.variance_factor()
    }

    /// Spread along one axis whose 1D marginal has variance `var`.
    pub fn spread_from_variance(self, var: f64) -> f64 {
        (self.moment_constant() * var).powf(self.as_f64() / 2.0)
    }

    /// Variance of the 1D marginal of a spread `Σ`.
    pub fn variance_from_spread(self, spread: f64) -> f64 {
        spread.powf(2.0 / self.as_f64()) * self.variance_factor()
    }
}

impl Default for Exponent {
    fn default() -> Self {
        Exponent::QUARTIC
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// `dx^p/(s^p Σxx) + dy^p/(s^p Σyy)`.
pub fn lp_norm_term(d: [f64; 2], spread: [f64; 2], s: f64, p: Exponent) -> Result<f64> {
    if !(d[0].is_finite() && d[1].is_finite() && spread[0].is_finite() && spread[1].is_finite() && s.is_finite()) {
        return Err(Error::NonFinite("lp norm input"));
    }
    if spread[0] <= 0.0 || spread[1] <= 0.0 || s <= 0.0 {
        return Err(Error::invalid("spread and scale must be positive"));
    }
    Ok(lp_norm_term_unchecked(d, spread, s, p))
}

#[inline]
pub(crate) fn lp_norm_term_unchecked(d: [f64; 2], spread: [f64; 2], s: f64, p: Exponent) -> f64 {
    (p.pow(d[0] / s) / spread[0]) + (p.pow(d[1] / s) / spread[1])
}

/// `Z = (4/p²)·Γ(1/p)²·s²·(Σxx Σyy)^(1/p)`.
pub fn normalization_constant(spread: [f64; 2], s: f64, p: Exponent) -> f64 {
    ln_normalization_constant(spread, s, p).exp()
}

pub fn ln_normalization_constant(spread: [f64; 2], s: f64, p: Exponent) -> f64 {
    p.ln_shape_constant() + 2.0 * s.ln() + (spread[0] * spread[1]).ln() / p.as_f64()
}

/// One Lp Gaussian of the reference model.
#[derive(Debug, Clone, PartialEq)]
pub struct LpComponent {
    /// 0-based index into the model's label set.
    pub label: usize,
    /// Center in the reference frame.
    pub center: [f64; 2],
    /// Denominators of the Lp norm, `(Σxx, Σyy)`.
    pub spread: [f64; 2],
    pub weight: f64,
}

impl LpComponent {
    pub fn validate(&self) -> Result<()> {
        if !(self.center.iter().chain(&self.spread).all(|v| v.is_finite()) && self.weight.is_finite()) {
            return Err(Error::NonFinite("component parameters"));
        }
        if self.spread[0] <= 0.0 || self.spread[1] <= 0.0 {
            return Err(Error::invalid(format!("component spread {:?} must be positive", self.spread)));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::invalid(format!("component weight {} outside [0, 1]", self.weight)));
        }
        Ok(())
    }

    /// `ln Z` of this component at scale `s`.
    pub fn ln_normalizer(&self, s: f64, p: Exponent) -> f64 {
        ln_normalization_constant(self.spread, s, p)
    }
}

/// `N_p(X | Tμ, s^p Σ)`; the component weight is not applied.
pub fn component_density(x: [f64; 2], component: &LpComponent, theta: &Similarity, p: Exponent) -> f64 {
    let c = theta.apply(component.center);
    let rho = lp_norm_term_unchecked([x[0] - c[0], x[1] - c[1]], component.spread, theta.s, p);
    (-rho - component.ln_normalizer(theta.s, p)).exp()
}

/// Tolerance on `Σ π = 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Reference facade model: Lp Gaussians grouped by label, with the
/// Dirichlet pseudo-parameters regularizing their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LpMixtureModel {
    labels: LabelSet,
    p: Exponent,
    /// `(w, h)` of the reference image.
    ref_dims: (usize, usize),
    components: Vec<LpComponent>,
    dirichlet: Vec<f64>,
}

impl LpMixtureModel {
    pub fn new(
        labels: LabelSet,
        p: Exponent,
        ref_dims: (usize, usize),
        components: Vec<LpComponent>,
        dirichlet: Vec<f64>,
    ) -> Result<Self> {
        Self::with_weight_tolerance(labels, p, ref_dims, components, dirichlet, WEIGHT_SUM_TOLERANCE)
    }

    pub(crate) fn with_weight_tolerance(
        labels: LabelSet,
        p: Exponent,
        ref_dims: (usize, usize),
        components: Vec<LpComponent>,
        dirichlet: Vec<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyReferenceModel);
        }
        if dirichlet.len() != components.len() {
            return Err(Error::invalid("one Dirichlet parameter per component is required"));
        }
        if ref_dims.0 == 0 || ref_dims.1 == 0 {
            return Err(Error::invalid("reference dimensions must be positive"));
        }
        for c in &components {
            c.validate()?;
            if c.label >= labels.len() {
                return Err(Error::invalid(format!("component label {} out of range", c.label)));
            }
        }
        if components.windows(2).any(|w| w[0].label > w[1].label) {
            return Err(Error::invalid("components must be grouped by label"));
        }
        if dirichlet.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::invalid("Dirichlet parameters must be positive"));
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::invalid(format!("component weights sum to {sum}, expected 1")));
        }
        Ok(Self {
            labels,
            p,
            ref_dims,
            components,
            dirichlet,
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn ref_dims(&self) -> (usize, usize) {
        self.ref_dims
    }

    pub fn components(&self) -> &[LpComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dirichlet(&self) -> &[f64] {
        &self.dirichlet
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// Number of components `m_j` per label.
    pub fn components_per_label(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_labels()];
        for c in &self.components {
            counts[c.label] += 1;
        }
        counts
    }
}
