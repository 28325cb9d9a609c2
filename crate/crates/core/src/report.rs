//! Experiment records, serialized as JSON lines or CSV.

use serde::Serialize;

use crate::bracket::serialize_bound;
use crate::error::{Error, Result};

/// One claim checked numerically: `lower <= value <= upper` against `target`
/// (`NaN` when there is nothing to compare with; serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub claim: String,
    #[serde(serialize_with = "serialize_bound")]
    pub target: f64,
    #[serde(serialize_with = "serialize_bound")]
    pub lower: f64,
    #[serde(serialize_with = "serialize_bound")]
    pub upper: f64,
    pub seed: u64,
    /// Wall-clock seconds; left out unless asked for so reports stay reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<f64>,
    pub pass: bool,
}

impl Record {
    /// `pass` defaults to whether the bracket contains the target up to `1e-6`.
    pub fn new(claim: impl Into<String>, target: f64, lower: f64, upper: f64, seed: u64) -> Self {
        let pass = lower <= target * (1.0 + 1e-6) + 1e-12 && upper >= target * (1.0 - 1e-6) - 1e-12;
        Self { claim: claim.into(), target, lower, upper, seed, runtime: None, pass }
    }

    pub fn relative_gap(&self) -> f64 {
        if self.target == 0.0 {
            return self.upper - self.lower;
        }
        ((self.upper - self.target).abs().max((self.target - self.lower).abs())) / self.target.abs()
    }
}

pub fn to_json(records: &[Record]) -> Result<String> {
    serde_json::to_string_pretty(records).map_err(|e| Error::Input(e.to_string()))
}

pub fn to_csv(records: &[Record]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let with_runtime = records.iter().any(|r| r.runtime.is_some());
    let mut header = vec!["claim", "target", "lower", "upper", "seed", "pass"];
    if with_runtime {
        header.push("runtime");
    }
    w.write_record(&header).map_err(|e| Error::Input(e.to_string()))?;
    for r in records {
        let mut row = vec![r.claim.clone(), fmt(r.target), fmt(r.lower), fmt(r.upper), r.seed.to_string(), r.pass.to_string()];
        if with_runtime {
            row.push(r.runtime.map(fmt).unwrap_or_default());
        }
        w.write_record(&row).map_err(|e| Error::Input(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_finite() {
        format!("{v:e}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
