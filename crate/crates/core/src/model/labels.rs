use crate::error::{Error, Result};

/// Ordered set of facade labels ("window", "door", ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::invalid("label set must contain at least one label"));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("label name {name:?} is empty or contains whitespace")));
            }
            if names[..i].contains(name) {
                return Err(Error::invalid(format!("duplicate label name {name:?}")));
            }
        }
        Ok(Self { names })
    }

    /// Parses a comma-separated list such as `window,door,balcony`.
    pub fn parse_list(list: &str) -> Result<Self> {
        Self::new(list.split(',').map(str::trim))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Per-pixel prior label probabilities of a target image.
///
/// Stored as `K` row-major planes of `f32`, the same layout as the `.lpm`
/// file format, so a map read from disk round-trips bit-exactly. The
/// per-pixel sum over the facade labels may be below one; the residual
/// mass belongs to labels that are not modelled (sky, road, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelProbMap {
    width: usize,
    height: usize,
    labels: LabelSet,
    planes: Vec<f32>,
}

/// Tolerance on the per-pixel label sum.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

impl LabelProbMap {
    /// A map with every probability set to zero.
    pub fn zeros(width: usize, height: usize, labels: LabelSet) -> Self {
        let planes = vec![0.0; width * height * labels.len()];
        Self {
            width,
            height,
            labels,
            planes,
        }
    }

    /// Builds a map from planar data, validating every invariant.
    pub fn from_planes(width: usize, height: usize, labels: LabelSet, planes: Vec<f32>) -> Result<Self> {
        if planes.len() != width * height * labels.len() {
            return Err(Error::invalid(format!(
                "expected {} probabilities for {}x{}x{}, got {}",
                width * height * labels.len(),
                width,
                height,
                labels.len(),
                planes.len()
            )));
        }
        let map = Self {
            width,
            height,
            labels,
            planes,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.planes.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite probability {v}")));
        }
        if let Some(v) = self.planes.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("probability {v} outside [0, 1]")));
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let sum = self.pixel_sum(x, y);
                if sum > 1.0 + PROB_SUM_TOLERANCE {
                    return Err(Error::invalid(format!("label probabilities at ({x}, {y}) sum to {sum}")));
                }
            }
        }
        Ok(())
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

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    fn offset(&self, label: usize, x: usize, y: usize) -> usize {
        (label * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, label: usize, x: usize, y: usize) -> f32 {
        self.planes[self.offset(label, x, y)]
    }

    #[inline]
    pub fn set(&mut self, label: usize, x: usize, y: usize, value: f32) {
        let o = self.offset(label, x, y);
        self.planes[o] = value;
    }

    /// Sum of the facade label probabilities at a pixel, in `f64`.
    pub fn pixel_sum(&self, x: usize, y: usize) -> f64 {
        (0..self.num_labels()).map(|j| self.get(j, x, y) as f64).sum()
    }

    /// Index of the most probable facade label at a pixel, or `None` when
    /// every facade probability is zero.
    pub fn argmax(&self, x: usize, y: usize) -> Option<usize> {
        let mut best: Option<(usize, f32)> = None;
        for j in 0..self.num_labels() {
            let v = self.get(j, x, y);
            if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Row-major planes, one per label.
    pub fn planes(&self) -> &[f32] {
        &self.planes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_set_rejects_bad_names() {
        assert!(LabelSet::new(Vec::<String>::new()).is_err());
        assert!(LabelSet::new(["window", "window"]).is_err());
        assert!(LabelSet::new(["window", ""]).is_err());
        let set = LabelSet::parse_list("window, door,balcony").unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.index_of("door"), Some(1));
    }

    #[test]
    fn map_rejects_excess_mass() {
        let labels = LabelSet::new(["window", "door"]).unwrap();
        let err = LabelProbMap::from_planes(1, 1, labels.clone(), vec![0.7, 0.6]);
        assert!(err.is_err());
        let ok = LabelProbMap::from_planes(1, 1, labels, vec![0.7, 0.3]).unwrap();
        assert_eq!(ok.argmax(0, 0), Some(0));
    }

    #[test]
    fn argmax_of_empty_pixel_is_none() {
        let labels = LabelSet::new(["window"]).unwrap();
        let map = LabelProbMap::zeros(2, 2, labels);
        assert_eq!(map.argmax(1, 1), None);
    }
}
