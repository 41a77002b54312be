use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// A named acceptance check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value.is_finite() && value <= threshold,
        }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value.is_finite() && value > threshold,
        }
    }
}

/// A numerical failure attached to one job.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub context: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: &'static str,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub body: serde_json::Value,
    pub checks: Vec<Check>,
    pub errors: Vec<ErrorRecord>,
    pub passed: bool,
    /// Wall-clock milliseconds per phase; the only nondeterministic field.
    pub timings_ms: BTreeMap<String, f64>,
}

/// SHA-256 of the canonical (key-sorted, compact) JSON form of the config.
pub fn config_hash(canonical: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(canonical).expect("JSON values serialize");
    hex::encode(Sha256::digest(&bytes))
}

impl Report {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Human-readable summary lines.
    pub fn summary(&self) -> String {
        let mut out = format!("mode {} (config {})\n", self.mode, &self.config_hash[..12]);
        for c in &self.checks {
            out.push_str(&format!(
                "  {} {}: {:.3e} (threshold {:.1e})\n",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            ));
        }
        for e in &self.errors {
            out.push_str(&format!("  error in {}: {}\n", e.context, e.message));
        }
        out
    }
}
