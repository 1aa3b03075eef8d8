//! `.lpmix` mixture models, plain text:
//!
//! ```text
//! LPMIX1 <p> <w> <h> <M>
//! <label names separated by spaces>
//! <j> <mu_x> <mu_y> <sigma_xx> <sigma_yy> <pi> <alpha_dir>    (M lines)
//! ```
//!
//! `j` is the label index. Reals are written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Exponent, LabelSet, LpComponent, LpMixtureModel, WEIGHT_SUM_TOLERANCE};

/// Largest accepted deviation of the weight sum from one.
pub const FILE_WEIGHT_TOLERANCE: f64 = 1e-6;

pub fn write_lpmix(model: &LpMixtureModel) -> String {
    let (w, h) = model.ref_dims();
    let mut out = format!("LPMIX1 {} {w} {h} {}\n", model.p().get(), model.len());
    out.push_str(&model.labels().names().join(" "));
    out.push('\n');
    for (c, a) in model.components().iter().zip(model.dirichlet()) {
        let _ = writeln!(
            out,
            "{} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
            c.label, c.center[0], c.center[1], c.spread[0], c.spread[1], c.weight, a
        );
    }
    out
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what}")))
}

pub fn read_lpmix(text: &str) -> Result<LpMixtureModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (n, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("LPMIX1") {
        return Err(Error::parse(n, "bad magic"));
    }
    let p: u32 = field(tok.next(), n, "exponent")?;
    let p = Exponent::new(p).map_err(|e| Error::parse(n, e.to_string()))?;
    let w: usize = field(tok.next(), n, "width")?;
    let h: usize = field(tok.next(), n, "height")?;
    let m: usize = field(tok.next(), n, "component count")?;
    if tok.next().is_some() {
        return Err(Error::parse(n, "trailing fields in header"));
    }
    let (n, names) = lines.next().ok_or_else(|| Error::parse(n + 1, "missing label line"))?;
    let labels = LabelSet::new(names.split_whitespace()).map_err(|e| Error::parse(n, e.to_string()))?;
    let mut components = Vec::with_capacity(m);
    let mut dirichlet = Vec::with_capacity(m);
    let mut last = n;
    for (n, line) in lines {
        last = n;
        if line.is_empty() {
            continue;
        }
        if components.len() == m {
            return Err(Error::parse(n, format!("more than {m} components")));
        }
        let mut tok = line.split_whitespace();
        let label: usize = field(tok.next(), n, "label index")?;
        let vals: Vec<f64> = ["mu_x", "mu_y", "sigma_xx", "sigma_yy", "pi", "alpha_dir"]
            .iter()
            .map(|what| field(tok.next(), n, what))
            .collect::<Result<_>>()?;
        if tok.next().is_some() {
            return Err(Error::parse(n, "trailing fields"));
        }
        let comp = LpComponent {
            label,
            center: [vals[0], vals[1]],
            spread: [vals[2], vals[3]],
            weight: vals[4],
        };
        comp.validate().map_err(|e| Error::parse(n, e.to_string()))?;
        if label >= labels.len() {
            return Err(Error::parse(n, format!("label index {label} out of range")));
        }
        components.push(comp);
        dirichlet.push(vals[5]);
    }
    if components.len() != m {
        return Err(Error::parse(last, format!("expected {m} components, found {}", components.len())));
    }
    let sum: f64 = components.iter().map(|c| c.weight).sum();
    if (sum - 1.0).abs() > FILE_WEIGHT_TOLERANCE {
        return Err(Error::parse(last, format!("weights sum to {sum}, expected 1")));
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        components.iter_mut().for_each(|c| c.weight /= sum);
    }
    LpMixtureModel::new(labels, p, (w, h), components, dirichlet)
}

pub fn read_lpmix_file(path: &Path) -> Result<LpMixtureModel> {
    read_lpmix(&std::fs::read_to_string(path)?)
}

pub fn write_lpmix_file(path: &Path, model: &LpMixtureModel) -> Result<()> {
    super::write_atomic(path, write_lpmix(model).as_bytes())
}
