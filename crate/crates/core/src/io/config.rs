//! `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Keys are unique; values are
//! trimmed. Errors carry the 1-based line of the offending entry.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{SynthPlan, SynthSpec, ValueRange};
use crate::model::Similarity;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::parse(line, format!("bad key `{key}`")));
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(Error::parse(line, format!("duplicate key `{key}` (first at line {})", prev.line)));
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.key.as_str())
    }

    /// Parsed value of `key`, `None` if absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.entry(key)
            .map(|e| {
                e.value
                    .parse::<T>()
                    .map_err(|err| Error::parse(e.line, format!("`{key}`: {err}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// A number or an inclusive `lo..hi` range.
    pub fn get_range(&self, key: &str) -> Result<Option<ValueRange>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|err| Error::parse(e.line, format!("`{key}`: {err}")))
        };
        let range = match e.value.split_once("..") {
            Some((lo, hi)) => ValueRange::new(num(lo)?, num(hi)?),
            None => {
                let v = num(&e.value)?;
                if v.is_finite() {
                    Ok(ValueRange::constant(v))
                } else {
                    Err(Error::invalid("non-finite value"))
                }
            }
        };
        range.map(Some).map_err(|err| Error::parse(e.line, format!("`{key}`: {err}")))
    }

    /// Comma-separated list; empty value gives an empty list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entry(key) else {
            return Ok(Vec::new());
        };
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|err| Error::parse(e.line, format!("`{key}`: {err}"))))
            .collect()
    }

    /// Rejects keys outside `known`, pointing at the first offender.
    pub fn ensure_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
            Some(e) => Err(Error::parse(e.line, format!("unknown key `{}`", e.key))),
            None => Ok(()),
        }
    }
}

const SYNTH_KEYS: &[&str] = &[
    "rows",
    "cols",
    "doors",
    "tx",
    "ty",
    "s",
    "target_width",
    "target_height",
    "p_true",
    "prior_noise",
    "background_noise",
    "clutter_fraction",
    "swap",
    "swap_prior",
    "occlude",
    "seed",
    "instances",
    "box_perturbation",
];

/// Builds a synthetic-instance plan from a config.
///
/// The facade is `rows × cols` windows above `doors` doors. `tx`, `ty` and
/// `s` are numbers or `lo..hi` ranges sampled per instance; translations
/// default to 2% to 15% of the target size and the scale to 1. `swap` and
/// `occlude` list component indices in reference-fit order.
pub fn synth_plan_from_config(cfg: &Config) -> Result<SynthPlan> {
    cfg.ensure_known(SYNTH_KEYS)?;
    let rows = cfg.get_or("rows", 3usize)?;
    let cols = cfg.get_or("cols", 4usize)?;
    let doors = cfg.get_or("doors", 1usize)?;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("rows and cols must be positive"));
    }
    let mut base = SynthSpec::windows_and_doors(rows, cols, doors);
    let (tw, th) = (
        cfg.get_or("target_width", base.target_dims.0)?,
        cfg.get_or("target_height", base.target_dims.1)?,
    );
    base.target_dims = (tw, th);
    base.p_true = cfg.get_or("p_true", base.p_true)?;
    base.prior_noise = cfg.get_or("prior_noise", base.prior_noise)?;
    base.background_noise = cfg.get_or("background_noise", base.background_noise)?;
    base.clutter_fraction = cfg.get_or("clutter_fraction", base.clutter_fraction)?;
    base.swap_prior = cfg.get_or("swap_prior", base.swap_prior)?;
    base.swapped = cfg.get_list("swap")?;
    base.occluded = cfg.get_list("occlude")?;
    base.seed = cfg.get_or("seed", 0u64)?;

    let tx = cfg
        .get_range("tx")?
        .unwrap_or(ValueRange::new(0.02 * tw as f64, 0.15 * tw as f64)?);
    let ty = cfg
        .get_range("ty")?
        .unwrap_or(ValueRange::new(0.02 * th as f64, 0.15 * th as f64)?);
    let s = cfg.get_range("s")?.unwrap_or(ValueRange::constant(1.0));
    if s.lo <= 0.0 {
        return Err(Error::invalid("scale must be positive"));
    }
    let instances = cfg.get_or("instances", 1usize)?;
    let box_perturbation = cfg.get_or("box_perturbation", 0.1)?;
    if !(0.0..0.5).contains(&box_perturbation) {
        return Err(Error::invalid("box_perturbation must lie in [0, 0.5)"));
    }
    let plan = SynthPlan {
        base,
        tx,
        ty,
        s,
        instances,
        box_perturbation,
    };
    // catch impossible layouts before any instance is drawn
    let probe = SynthSpec {
        truth: Similarity::new(tx.lo, ty.lo, s.lo)?,
        ..plan.base.clone()
    };
    probe.validate()?;
    Ok(plan)
}
