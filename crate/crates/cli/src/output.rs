//! Output files and the run manifest.
//!
//! Column schemas (stable):
//! - `timeline.csv`: slot, backlog_total, cost, cost_real, delivered, dummy
//!   (block means over `K` slots; cost per slot)
//! - `throughput.csv`: service, dest_set, destination, delivered_rate,
//!   expected_rate (packets per slot)
//! - `sweep_lambda_<policy>.csv`: lambda_mbps, stable, growth, avg_backlog,
//!   stable_backlog, avg_cost, avg_cost_real (cost per second)
//! - `sweep_v_<policy>.csv`: v, stable, avg_backlog, avg_cost, avg_cost_real
//! - `plot_*.csv`: two columns; an unstable point has an empty second field

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mcsc::engine::{LambdaSweep, RunResult, Sample, Throughput, VSweep};
use mcsc::model::ScenarioConfig;
use mcsc::NetworkModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to reproduce a command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub cli_version: String,
    pub core_version: String,
    pub command: String,
    /// Built-in name or path, as given.
    pub scenario: String,
    /// SHA-256 of the effective scenario (overrides applied) as JSON.
    pub config_sha256: String,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub slots: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<Vec<f64>>,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(command: &str, scenario: &str, cfg: &ScenarioConfig) -> Self {
        let canonical = serde_json::to_vec(cfg).expect("scenario serializes");
        Self {
            tool: "mcsc".into(),
            cli_version: env!("CARGO_PKG_VERSION").into(),
            core_version: mcsc::VERSION.into(),
            command: command.into(),
            scenario: scenario.into(),
            config_sha256: sha256_hex(&canonical),
            config: cfg.clone(),
            seed: cfg.seed,
            slots: cfg.horizon_slots,
            grid: None,
            outputs: Vec::new(),
        }
    }

    /// Writes one output file and records its digest.
    pub fn write(&mut self, dir: &Path, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(OutputFile {
            file: name.into(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn finish(self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_vec_pretty(&self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().context("flushing csv")
}

pub fn timeline_csv(samples: &[Sample]) -> Result<Vec<u8>> {
    csv_bytes(samples)
}

#[derive(Serialize)]
struct ThroughputRow<'a> {
    service: &'a str,
    dest_set: &'a str,
    destination: &'a str,
    delivered_rate: f64,
    expected_rate: f64,
}

pub fn throughput_csv(model: &NetworkModel, rows: &[Throughput]) -> Result<Vec<u8>> {
    csv_bytes(rows.iter().map(|t| {
        let set = &model.dest_sets[t.dest_set];
        ThroughputRow {
            service: &model.services[t.service].name,
            dest_set: &set.name,
            destination: &model.nodes[set.members[t.k]].name,
            delivered_rate: t.delivered_rate,
            expected_rate: t.expected_rate,
        }
    }))
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    policy: &'a str,
    v: f64,
    lambda_mbps: f64,
    slots: u64,
    seed: u64,
    stable: bool,
    growth: f64,
    /// Absent when unstable.
    stable_backlog: Option<f64>,
    avg_backlog: f64,
    cost_per_s: f64,
    cost_real_per_s: f64,
    avg_dummy_per_slot: f64,
}

pub fn run_summary(cfg: &ScenarioConfig, r: &RunResult) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(&RunSummary {
        scenario: &cfg.name,
        policy: r.policy.as_str(),
        v: r.v,
        lambda_mbps: cfg.arrival_mbps,
        slots: r.slots,
        seed: cfg.seed,
        stable: r.verdict.stable,
        growth: r.verdict.growth,
        stable_backlog: r.verdict.stable.then_some(r.verdict.stable_mean),
        avg_backlog: r.averages.backlog,
        cost_per_s: r.cost_per_second(),
        cost_real_per_s: r.cost_real_per_second(),
        avg_dummy_per_slot: r.averages.dummy,
    })?)
}

#[derive(Serialize)]
struct LambdaRow {
    lambda_mbps: f64,
    stable: bool,
    growth: f64,
    avg_backlog: f64,
    stable_backlog: Option<f64>,
    avg_cost: f64,
    avg_cost_real: f64,
}

pub fn lambda_csv(s: &LambdaSweep) -> Result<Vec<u8>> {
    csv_bytes(s.points.iter().map(|p| LambdaRow {
        lambda_mbps: p.lambda_mbps,
        stable: p.stable,
        growth: p.growth,
        avg_backlog: p.avg_backlog,
        stable_backlog: p.stable.then_some(p.stable_backlog),
        avg_cost: p.avg_cost,
        avg_cost_real: p.avg_cost_real,
    }))
}

fn series(header: (&str, &str), points: impl IntoIterator<Item = (f64, Option<f64>)>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([header.0, header.1])?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    w.into_inner().context("flushing csv")
}

/// Rate against stable backlog.
pub fn lambda_plot(s: &LambdaSweep) -> Result<Vec<u8>> {
    series(
        ("lambda_mbps", "stable_backlog"),
        s.points.iter().map(|p| (p.lambda_mbps, p.stable.then_some(p.stable_backlog))),
    )
}

pub fn v_csv(s: &VSweep) -> Result<Vec<u8>> {
    csv_bytes(&s.points)
}

/// `V` against backlog and `V` against cost; unstable points left empty.
pub fn v_plots(s: &VSweep) -> Result<(Vec<u8>, Vec<u8>)> {
    let backlog = series(
        ("v", "avg_backlog"),
        s.points.iter().map(|p| (p.v, p.stable.then_some(p.avg_backlog))),
    )?;
    let cost = series(("v", "avg_cost"), s.points.iter().map(|p| (p.v, p.stable.then_some(p.avg_cost))))?;
    Ok((backlog, cost))
}
