use crate::error::{Error, Result};
use crate::model::Similarity;

/// Axis-aligned rectangle in the target frame: top-left corner and size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self { x, y, width, height }
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x + self.width / 2.0, self.y + self.height / 2.0]
    }

    /// Parses `X,Y,W,H`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("bad box {text:?}: {e}")))?;
        match parts[..] {
            [x, y, w, h] => Ok(Self::new(x, y, w, h)),
            _ => Err(Error::invalid(format!("box {text:?} must be X,Y,W,H"))),
        }
    }

    /// The box covered by a `(w, h)` reference under `theta`.
    pub fn of_reference(theta: &Similarity, ref_dims: (usize, usize)) -> Self {
        Self::new(
            theta.tx,
            theta.ty,
            theta.s * ref_dims.0 as f64,
            theta.s * ref_dims.1 as f64,
        )
    }
}

/// Least-squares similarity mapping the reference corners
/// `(0,0), (w,0), (0,h), (w,h)` onto the corners of a detection box.
pub fn init_from_box(bbox: &BoundingBox, ref_dims: (usize, usize)) -> Result<Similarity> {
    if !(bbox.width > 0.0 && bbox.height > 0.0) {
        return Err(Error::DegenerateDetection(format!(
            "box size {}x{} must be positive",
            bbox.width, bbox.height
        )));
    }
    let (w, h) = (ref_dims.0 as f64, ref_dims.1 as f64);
    let s = (w * bbox.width + h * bbox.height) / (w * w + h * h);
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::DegenerateDetection(format!("scale {s} is not positive")));
    }
    let c = bbox.center();
    Similarity::new(c[0] - s * w / 2.0, c[1] - s * h / 2.0, s)
}

/// `α = 0.25·(1 - s²hw/(HW))`, clamped to `bounds`.
pub fn init_outlier_rate(s: f64, ref_dims: (usize, usize), target_dims: (usize, usize), bounds: (f64, f64)) -> f64 {
    let covered = s * s * (ref_dims.0 * ref_dims.1) as f64 / (target_dims.0 * target_dims.1) as f64;
    (0.25 * (1.0 - covered)).clamp(bounds.0, bounds.1)
}
