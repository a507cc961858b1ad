//! CSV and JSON writers with fixed column orders.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::branching_system::FluctuationSample;
use crate::error::Result;

/// One check of a verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub suite: String,
    pub check: String,
    /// Time-scale index for Monte-Carlo checks.
    pub n: Option<f64>,
    pub estimate: f64,
    pub target: f64,
    /// Allowed deviation (or, for one-sided checks, the threshold).
    pub budget: f64,
    pub pass: bool,
}

/// `suite, check, n, estimate, target, budget, pass`.
pub fn write_report<W: Write>(rows: &[ReportRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["suite", "check", "n", "estimate", "target", "budget", "pass"])?;
    for r in rows {
        out.write_record([
            r.suite.clone(),
            r.check.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.estimate.to_string(),
            r.target.to_string(),
            r.budget.to_string(),
            r.pass.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `replicate, t, phi_id, value`.
pub fn write_samples<W: Write>(samples: &[FluctuationSample], times: &[f64], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["replicate", "t", "phi_id", "value"])?;
    for s in samples {
        for (t, row) in times.iter().zip(&s.values) {
            for (i, v) in row.iter().enumerate() {
                out.write_record([s.replicate.to_string(), t.to_string(), i.to_string(), v.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `replicate, h_id, phi_id, value` for the integrated functional.
pub fn write_integrated<W: Write>(samples: &[FluctuationSample], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["replicate", "h_id", "phi_id", "value"])?;
    for s in samples {
        for (h, row) in s.integrated.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                out.write_record([s.replicate.to_string(), h.to_string(), i.to_string(), v.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// One limit covariance value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovRow {
    pub regime: String,
    pub r: f64,
    pub t: f64,
    pub params_hash: String,
    pub value: f64,
    pub err: f64,
}

/// `regime, r, t, params_hash, value, err`.
pub fn write_covariances<W: Write>(rows: &[CovRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["regime", "r", "t", "params_hash", "value", "err"])?;
    for c in rows {
        out.write_record([
            c.regime.clone(),
            c.r.to_string(),
            c.t.to_string(),
            c.params_hash.clone(),
            c.value.to_string(),
            c.err.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Run metadata written next to the CSV files.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
}

impl Sidecar {
    pub fn new(command: &str, seed: u64, threads: usize, wall_time_s: f64) -> Self {
        Self { version: format!("v{}", env!("CARGO_PKG_VERSION")), command: command.into(), seed, threads, wall_time_s }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

/// FNV-1a digest, stable across platforms and releases.
pub fn stable_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}
