use crate::error::{Error, Result};

/// Axis-aligned similarity `T(μ) = s·μ + t` between reference and target
/// frames. The aspect ratio is preserved; rectification happens upstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub tx: f64,
    pub ty: f64,
    pub s: f64,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        tx: 0.0,
        ty: 0.0,
        s: 1.0,
    };

    pub fn new(tx: f64, ty: f64, s: f64) -> Result<Self> {
        if !(tx.is_finite() && ty.is_finite() && s.is_finite()) {
            return Err(Error::NonFinite("similarity parameters"));
        }
        if s <= 0.0 {
            return Err(Error::invalid(format!("scale must be positive, got {s}")));
        }
        Ok(Self { tx, ty, s })
    }

    #[inline]
    pub fn apply(&self, mu: [f64; 2]) -> [f64; 2] {
        [self.s * mu[0] + self.tx, self.s * mu[1] + self.ty]
    }

    #[inline]
    pub fn apply_inverse(&self, x: [f64; 2]) -> [f64; 2] {
        [(x[0] - self.tx) / self.s, (x[1] - self.ty) / self.s]
    }

    pub fn inverse(&self) -> Similarity {
        Similarity {
            tx: -self.tx / self.s,
            ty: -self.ty / self.s,
            s: 1.0 / self.s,
        }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Similarity) -> Similarity {
        Similarity {
            tx: self.s * first.tx + self.tx,
            ty: self.s * first.ty + self.ty,
            s: self.s * first.s,
        }
    }

    /// Translates the output frame by `(dx, dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> Similarity {
        Similarity {
            tx: self.tx + dx,
            ty: self.ty + dy,
            s: self.s,
        }
    }
}

impl Default for Similarity {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// `T(Θ)·μ`.
#[inline]
pub fn apply_transform(mu: [f64; 2], theta: &Similarity) -> [f64; 2] {
    theta.apply(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_maps_origin_to_origin() {
        assert_eq!(apply_transform([0.0, 0.0], &Similarity::IDENTITY), [0.0, 0.0]);
    }

    #[test]
    fn direct_evaluation() {
        let theta = Similarity::new(5.0, -3.0, 2.0).unwrap();
        assert_eq!(apply_transform([10.0, 20.0], &theta), [25.0, 37.0]);
    }

    #[test]
    fn rejects_non_positive_scale() {
        assert!(Similarity::new(0.0, 0.0, 0.0).is_err());
        assert!(Similarity::new(0.0, 0.0, -1.0).is_err());
        assert!(Similarity::new(f64::NAN, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trip(mx in -500.0..500.0f64, my in -500.0..500.0f64,
                              tx in -100.0..100.0f64, ty in -100.0..100.0f64, s in 0.1..10.0f64) {
            let theta = Similarity::new(tx, ty, s).unwrap();
            let back = theta.apply_inverse(theta.apply([mx, my]));
            prop_assert!((back[0] - mx).abs() <= 1e-12 * (1.0 + mx.abs()) * 10.0);
            prop_assert!((back[1] - my).abs() <= 1e-12 * (1.0 + my.abs()) * 10.0);
        }

        #[test]
        fn composition_is_a_group_action(mx in -500.0..500.0f64, my in -500.0..500.0f64,
                                         t1 in -100.0..100.0f64, t2 in -100.0..100.0f64,
                                         s1 in 0.2..5.0f64, s2 in 0.2..5.0f64) {
            let a = Similarity::new(t1, -t2, s1).unwrap();
            let b = Similarity::new(t2, t1, s2).unwrap();
            let two_steps = b.apply(a.apply([mx, my]));
            let composed = b.compose(&a).apply([mx, my]);
            prop_assert!((two_steps[0] - composed[0]).abs() <= 1e-9);
            prop_assert!((two_steps[1] - composed[1]).abs() <= 1e-9);
        }
    }
}
