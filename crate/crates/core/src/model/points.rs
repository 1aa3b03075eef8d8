use crate::error::{Error, Result};

/// Borrowed view of one observed point: pixel coordinates and its prior
/// label probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<'a> {
    pub x: f64,
    pub y: f64,
    pub prior: &'a [f64],
}

/// The observed data set: target pixels that carry facade evidence.
///
/// Storage is struct-of-arrays; priors are `N × K` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    xs: Vec<f64>,
    ys: Vec<f64>,
    priors: Vec<f64>,
    num_labels: usize,
    width: usize,
    height: usize,
}

impl PointSet {
    pub fn new(width: usize, height: usize, num_labels: usize) -> Self {
        Self {
            xs: Vec::new(),
            ys: Vec::new(),
            priors: Vec::new(),
            num_labels,
            width,
            height,
        }
    }

    pub fn with_capacity(width: usize, height: usize, num_labels: usize, capacity: usize) -> Self {
        Self {
            xs: Vec::with_capacity(capacity),
            ys: Vec::with_capacity(capacity),
            priors: Vec::with_capacity(capacity * num_labels),
            num_labels,
            width,
            height,
        }
    }

    /// Appends a point, checking it lies inside the source frame and that
    /// its prior is a valid sub-probability vector.
    pub fn push(&mut self, x: f64, y: f64, prior: &[f64]) -> Result<()> {
        if prior.len() != self.num_labels {
            return Err(Error::invalid(format!(
                "point prior has {} entries, expected {}",
                prior.len(),
                self.num_labels
            )));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("point coordinates"));
        }
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return Err(Error::invalid(format!(
                "point ({x}, {y}) outside {}x{} frame",
                self.width, self.height
            )));
        }
        if prior.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::invalid("point prior entries must lie in [0, 1]"));
        }
        self.xs.push(x);
        self.ys.push(y);
        self.priors.extend_from_slice(prior);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// `(W, H)` of the image the points were extracted from.
    pub fn source_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of pixels `H·W` of the source frame, used by the uniform
    /// outlier density.
    pub fn frame_area(&self) -> f64 {
        (self.width * self.height) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.xs[i]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    #[inline]
    pub fn prior(&self, i: usize) -> &[f64] {
        &self.priors[i * self.num_labels..(i + 1) * self.num_labels]
    }

    pub fn point(&self, i: usize) -> Point<'_> {
        Point {
            x: self.xs[i],
            y: self.ys[i],
            prior: self.prior(i),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Point<'_>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// A copy keeping only the points selected by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(Point<'_>) -> bool) -> PointSet {
        let mut out = PointSet::new(self.width, self.height, self.num_labels);
        for i in 0..self.len() {
            let p = self.point(i);
            if keep(p) {
                out.xs.push(p.x);
                out.ys.push(p.y);
                out.priors.extend_from_slice(p.prior);
            }
        }
        out
    }
}
