//! Registration result files and iterate traces.

use std::fmt::Write as _;

use crate::em::{EmReport, TraceRow};
use crate::error::{Error, Result};
use crate::model::Similarity;

/// Final estimate of one registration run, as written to `result.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub similarity: Similarity,
    pub outlier_rate: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the initialisation box that won, if several were tried.
    pub selected: Option<usize>,
}

impl RegistrationResult {
    pub fn from_report(report: &EmReport, selected: Option<usize>) -> Self {
        Self {
            similarity: report.state.similarity,
            outlier_rate: report.state.outlier_rate,
            objective: report.objective,
            iterations: report.total_iterations(),
            converged: report.converged,
            selected,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let get = |key: &str| -> Result<&str> {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::invalid(format!("result is missing `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("`{key}`: {e}")))
        };
        let similarity = Similarity::new(num("tx")?, num("ty")?, num("s")?)?;
        let iterations = get("iterations")?
            .parse()
            .map_err(|e| Error::invalid(format!("`iterations`: {e}")))?;
        let converged = match get("converged")? {
            "true" => true,
            "false" => false,
            other => return Err(Error::invalid(format!("`converged` must be true or false, got `{other}`"))),
        };
        let selected = match kv.iter().find(|(k, _)| k == "selected") {
            Some((_, v)) => Some(v.parse().map_err(|e| Error::invalid(format!("`selected`: {e}")))?),
            None => None,
        };
        Ok(Self {
            similarity,
            outlier_rate: num("alpha")?,
            objective: num("R")?,
            iterations,
            converged,
            selected,
        })
    }
}

/// One `key=value` per line; full precision so results can be re-read.
pub fn format_result(r: &RegistrationResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tx={}", r.similarity.tx);
    let _ = writeln!(out, "ty={}", r.similarity.ty);
    let _ = writeln!(out, "s={}", r.similarity.s);
    let _ = writeln!(out, "alpha={}", r.outlier_rate);
    let _ = writeln!(out, "R={}", r.objective);
    let _ = writeln!(out, "iterations={}", r.iterations);
    let _ = writeln!(out, "converged={}", r.converged);
    if let Some(k) = r.selected {
        let _ = writeln!(out, "selected={k}");
    }
    out
}

/// `key=value` pairs, one per line, blank lines and `#` comments skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(k + 1, "expected `key=value`"))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Tab-separated iterate trace. `t` counts accepted iterates across both
/// levels; the first row of each level is its starting point.
pub fn format_trace(trace: &[TraceRow]) -> String {
    let mut out = String::from("t\tR\ttx\tty\ts\talpha\tlevel\telapsed_ms\n");
    for (t, row) in trace.iter().enumerate() {
        let _ = writeln!(
            out,
            "{t}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}",
            row.objective,
            row.similarity.tx,
            row.similarity.ty,
            row.similarity.s,
            row.outlier_rate,
            row.level,
            row.elapsed.as_secs_f64() * 1e3,
        );
    }
    out
}
