//! Brute-force maximisers used to validate the M-step and EM outputs.

use crate::error::{Error, Result};
use crate::model::{
    geometric_energy, lp_norm_term, map_objective, LpMixtureModel, PointSet, Responsibilities, Similarity,
    TransformState,
};

/// Inclusive range `min, min + step, ..., ≤ max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min <= max && step > 0.0) {
            return Err(Error::invalid(format!("bad grid axis {min}..{max} step {step}")));
        }
        Ok(Self { min, max, step })
    }

    /// `center ± half_width`.
    pub fn around(center: f64, half_width: f64, step: f64) -> Result<Self> {
        Self::new(center - half_width, center + half_width, step)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(move |k| self.min + k as f64 * self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRanges {
    pub tx: Axis,
    pub ty: Axis,
    pub s: Axis,
}

impl GridRanges {
    /// `tx, ty ∈ ±40` px around `center` in steps of 0.5 and
    /// `s ∈ [0.6, 1.6]` in steps of 0.01.
    pub fn default_around(center: &Similarity) -> Self {
        Self {
            tx: Axis::around(center.tx, 40.0, 0.5).expect("finite center"),
            ty: Axis::around(center.ty, 40.0, 0.5).expect("finite center"),
            s: Axis::new(0.6, 1.6, 0.01).expect("static axis"),
        }
    }

    fn steps(&self) -> [f64; 3] {
        [self.tx.step, self.ty.step, self.s.step]
    }
}

/// Coordinate ascent with step halving from `start`; stops when every step
/// is below `1e-9` of its initial value.
pub fn polish(f: impl Fn(&Similarity) -> f64, start: Similarity, steps: [f64; 3]) -> (Similarity, f64) {
    let mut best = start;
    let mut value = f(&best);
    let mut step = steps;
    while step.iter().zip(&steps).any(|(s, s0)| *s > s0 * 1e-9) {
        let mut improved = false;
        for k in 0..3 {
            for sign in [1.0, -1.0] {
                loop {
                    let mut c = best;
                    match k {
                        0 => c.tx += sign * step[0],
                        1 => c.ty += sign * step[1],
                        _ => c.s += sign * step[2],
                    }
                    if c.s <= 0.0 {
                        break;
                    }
                    let v = f(&c);
                    if v > value {
                        best = c;
                        value = v;
                        improved = true;
                    } else {
                        break;
                    }
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s /= 2.0);
        }
    }
    (best, value)
}

/// Copy of `points` in a fixed order (by `y`, `x`, then prior), so sums over
/// it do not depend on the order the caller supplied.
fn canonical_order(points: &PointSet) -> PointSet {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points
            .y(a)
            .total_cmp(&points.y(b))
            .then(points.x(a).total_cmp(&points.x(b)))
            .then_with(|| {
                let (pa, pb) = (points.prior(a), points.prior(b));
                pa.iter().zip(pb).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    let (w, h) = points.source_dims();
    let mut out = PointSet::with_capacity(w, h, points.num_labels(), points.len());
    for i in order {
        let p = points.point(i);
        out.push(p.x, p.y, p.prior).expect("points were already validated");
    }
    out
}

/// Exhaustive argmax of `R` over `ranges` followed by [`polish`]. The result
/// does not depend on the order of `points`.
pub fn grid_oracle(
    points: &PointSet,
    model: &LpMixtureModel,
    weights: &[f64],
    outlier_rate: f64,
    ranges: &GridRanges,
) -> (Similarity, f64) {
    let points = canonical_order(points);
    let eval = |theta: &Similarity| {
        let state = TransformState {
            similarity: *theta,
            weights: weights.to_vec(),
            outlier_rate,
        };
        map_objective(&points, model, &state)
    };
    let mut best = (Similarity::IDENTITY, f64::NEG_INFINITY);
    for s in ranges.s.values() {
        if s <= 0.0 {
            continue;
        }
        for ty in ranges.ty.values() {
            for tx in ranges.tx.values() {
                let theta = Similarity { tx, ty, s };
                let v = eval(&theta);
                if v > best.1 {
                    best = (theta, v);
                }
            }
        }
    }
    polish(eval, best.0, ranges.steps())
}

/// Argmax of the geometric part of the M-step objective, `-Σ β (ln Z + ρ)`,
/// for fixed responsibilities.
///
/// At each grid scale the objective separates into a function of `tx` and
/// one of `ty`, so each is searched on its own axis before polishing the
/// joint optimum.
pub fn m_step_oracle(
    points: &PointSet,
    model: &LpMixtureModel,
    resp: &Responsibilities,
    ranges: &GridRanges,
) -> (Similarity, f64) {
    let p = model.p();
    let eval = |theta: &Similarity| -geometric_energy(points, model, resp, theta);
    let axis_energy = |s: f64, t: f64, axis: usize| -> f64 {
        let mut e = 0.0;
        for (c, comp) in model.components().iter().enumerate() {
            let center = s * comp.center[axis] + t;
            let mut spread = [1.0, 1.0];
            spread[axis] = comp.spread[axis];
            for i in 0..points.len() {
                let b = resp.beta(i, c);
                if b == 0.0 {
                    continue;
                }
                let coord = if axis == 0 { points.x(i) } else { points.y(i) };
                let mut d = [0.0, 0.0];
                d[axis] = coord - center;
                e += b * lp_norm_term(d, spread, s, p).unwrap_or(f64::INFINITY);
            }
        }
        e
    };
    let mut best = (Similarity::IDENTITY, f64::NEG_INFINITY);
    for s in ranges.s.values() {
        if s <= 0.0 {
            continue;
        }
        let pick = |axis: &Axis, k: usize| {
            axis.values()
                .map(|t| (t, axis_energy(s, t, k)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(t, _)| t)
                .unwrap_or(axis.min)
        };
        let theta = Similarity {
            tx: pick(&ranges.tx, 0),
            ty: pick(&ranges.ty, 1),
            s,
        };
        let v = eval(&theta);
        if v > best.1 {
            best = (theta, v);
        }
    }
    polish(eval, best.0, ranges.steps())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_are_inclusive() {
        let a = Axis::new(0.6, 1.6, 0.01).unwrap();
        let v: Vec<f64> = a.values().collect();
        assert_eq!(v.len(), 101);
        assert!((v[100] - 1.6).abs() < 1e-12);
        assert!(Axis::new(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn polish_finds_a_smooth_maximum() {
        let f = |t: &Similarity| -(t.tx - 1.234).powi(2) - 2.0 * (t.ty + 0.5).powi(2) - 50.0 * (t.s - 1.07).powi(2);
        let (best, _) = polish(f, Similarity::IDENTITY, [0.5, 0.5, 0.01]);
        assert!((best.tx - 1.234).abs() < 1e-6);
        assert!((best.ty + 0.5).abs() < 1e-6);
        assert!((best.s - 1.07).abs() < 1e-6);
    }
}
