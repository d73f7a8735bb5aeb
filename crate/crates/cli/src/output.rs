//! CSV writers with versioned schemas. Every file carries its schema tag in
//! the first column of every row so downstream tooling can dispatch on it;
//! floats are written in shortest-roundtrip form, so identical runs produce
//! byte-identical files.

use std::path::Path;

use anyhow::{Context, Result};

pub const SUMMARY_SCHEMA: &str = "summary.v1";
pub const FUNNEL_SCHEMA: &str = "funnel.v1";
pub const CHAIN_SCHEMA: &str = "chain.v1";

pub const SUMMARY_HEADER: &[&str] = &[
    "schema",
    "sampler",
    "target",
    "d",
    "h",
    "step_policy",
    "scheme",
    "horizon",
    "steps",
    "events",
    "gradient_evaluations",
    "acceptance_rate",
    "ess_first_coordinate",
    "ess_per_step",
    "events_per_step",
    "gradients_per_event",
];

pub const FUNNEL_HEADER: &[&str] = &[
    "schema",
    "sampler",
    "label",
    "param",
    "steps",
    "x1_mean",
    "x1_std",
    "ess_x1",
    "gradient_evaluations",
    "chain_file",
];

/// One row of the scaling / single-run table.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub sampler: String,
    pub target: String,
    pub d: usize,
    pub h: f64,
    pub step_policy: String,
    pub scheme: String,
    pub horizon: f64,
    pub steps: usize,
    pub events: u64,
    pub gradient_evaluations: u64,
    pub acceptance_rate: f64,
    pub ess_first_coordinate: f64,
    pub ess_per_step: f64,
    pub events_per_step: f64,
    pub gradients_per_event: f64,
}

/// One row of the funnel comparison table.
#[derive(Debug, Clone)]
pub struct FunnelRow {
    pub sampler: String,
    pub label: String,
    pub param: f64,
    pub steps: usize,
    pub x1_mean: f64,
    pub x1_std: f64,
    pub ess_x1: f64,
    pub gradient_evaluations: u64,
    pub chain_file: String,
}

fn open_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(file))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            SUMMARY_SCHEMA,
            &r.sampler,
            &r.target,
            &r.d.to_string(),
            &fmt(r.h),
            &r.step_policy,
            &r.scheme,
            &fmt(r.horizon),
            &r.steps.to_string(),
            &r.events.to_string(),
            &r.gradient_evaluations.to_string(),
            &fmt(r.acceptance_rate),
            &fmt(r.ess_first_coordinate),
            &fmt(r.ess_per_step),
            &fmt(r.events_per_step),
            &fmt(r.gradients_per_event),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_funnel_csv(path: &Path, rows: &[FunnelRow]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(FUNNEL_HEADER)?;
    for r in rows {
        w.write_record([
            FUNNEL_SCHEMA,
            &r.sampler,
            &r.label,
            &fmt(r.param),
            &r.steps.to_string(),
            &fmt(r.x1_mean),
            &fmt(r.x1_std),
            &fmt(r.ess_x1),
            &r.gradient_evaluations.to_string(),
            &r.chain_file,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step first-coordinate dump for external plotting.
pub fn write_chain_csv(path: &Path, x1: &[f64]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["schema", "step", "x1"])?;
    for (i, v) in x1.iter().enumerate() {
        w.write_record([CHAIN_SCHEMA, &i.to_string(), &fmt(*v)])?;
    }
    w.flush()?;
    Ok(())
}
