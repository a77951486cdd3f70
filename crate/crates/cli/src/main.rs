//! `mcsc`: run, sweep and audit multicast service-chain scenarios.

mod output;
mod parse;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mcsc::audit::{audit_ledger, read_ledger_csv, write_ledger_csv, TrailRecorder};
use mcsc::engine::{derive_seed, run, run_observed, summarize_lambda, sweep_lambda, sweep_v, LambdaPoint, Policy, RunConfig};
use mcsc::model::ScenarioConfig;
use mcsc::policy::{PolicyKind, PolicyParams, RandomizedPolicySpec};
use mcsc::{scenarios, NetworkModel};
use rayon::prelude::*;

use output::Manifest;

#[derive(Parser)]
#[command(name = "mcsc", version, about = "Multicast service-chain simulator")]
struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, env = "MCSC_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One simulation: timeline, summary and optional ledger dump.
    Run(RunArgs),
    /// Capacity sweep over arrival rates.
    SweepLambda(SweepLambdaArgs),
    /// Backlog/cost tradeoff over V at a fixed rate.
    SweepV(SweepVArgs),
    /// Audit a ledger dump; exits 1 if any check fails.
    Audit(AuditArgs),
    /// Print the built-in scenarios.
    ListScenarios,
}

#[derive(Args, Clone)]
struct Common {
    /// Built-in scenario name or path to a TOML/JSON scenario file.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Per-stream rate, e.g. `20Mbps`, `1.5Gbps`, `20` (Mbps).
    #[arg(long, value_parser = parse::rate_mbps)]
    lambda: Option<f64>,
    #[arg(long = "V", alias = "v")]
    v: Option<f64>,
    /// Dump the ledger of the last N slots to `ledger.csv`.
    #[arg(long, value_name = "N")]
    ledger: Option<u64>,
}

#[derive(Args)]
struct SweepLambdaArgs {
    #[command(flatten)]
    common: Common,
    /// One or more of multicast, unicast, randomized, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "multicast")]
    policy: Vec<PolicyKind>,
    #[arg(long = "V", alias = "v", default_value_t = 0.0)]
    v: f64,
    /// Rates in Mbps: `30:52:2` (inclusive range) or `30,36,42`.
    #[arg(long, value_parser = parse::grid)]
    grid: Vec<parse::Grid>,
}

#[derive(Args)]
struct SweepVArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "multicast")]
    policy: Vec<PolicyKind>,
    #[arg(long, value_parser = parse::rate_mbps)]
    lambda: Option<f64>,
    /// V values: `0,1e5,3e5,1e6` or `start:stop:step`.
    #[arg(long, value_parser = parse::grid)]
    grid: Vec<parse::Grid>,
}

#[derive(Args)]
struct AuditArgs {
    /// Ledger CSV written by `run --ledger`.
    #[arg(long)]
    ledger: PathBuf,
    /// Scenario the ledger came from; defaults to the one in the
    /// neighbouring `manifest.json`.
    #[arg(long)]
    scenario: Option<String>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `Ok(false)` when the command ran but found a failure.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::SweepLambda(a) => cmd_sweep_lambda(a).map(|_| true),
        Command::SweepV(a) => cmd_sweep_v(a).map(|_| true),
        Command::Audit(a) => cmd_audit(a),
        Command::ListScenarios => {
            for name in scenarios::NAMES {
                println!("{name:<10} {}", scenarios::describe(name));
            }
            Ok(true)
        }
    }
}

fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    if scenarios::NAMES.contains(&spec) {
        return Ok(scenarios::by_name(spec)?);
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!("`{spec}` is neither a built-in scenario ({}) nor a file", scenarios::NAMES.join(", "));
    }
    ScenarioConfig::from_path(path).with_context(|| format!("reading scenario {spec}"))
}

/// Scenario with flag overrides applied, plus its model.
fn prepare(common: &Common, policy: Option<PolicyKind>, lambda: Option<f64>, v: Option<f64>) -> Result<(ScenarioConfig, NetworkModel)> {
    let mut cfg = load_scenario(&common.scenario)?;
    if let Some(k) = policy {
        cfg.policy.kind = k;
    }
    if let Some(v) = v {
        cfg.policy = PolicyParams::new(cfg.policy.kind, v)?;
    }
    if let Some(l) = lambda {
        cfg.arrival_mbps = l;
    }
    if let Some(t) = common.slots {
        cfg.horizon_slots = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let model = mcsc::build(&cfg)?;
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok((cfg, model))
}

fn policy_for(model: &NetworkModel, kind: PolicyKind, v: f64) -> Result<Policy> {
    Ok(match kind {
        PolicyKind::Randomized => Policy::Randomized(RandomizedPolicySpec::uniform(model, true)),
        k => Policy::MaxWeight(PolicyParams::new(k, v)?),
    })
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let (cfg, model) = prepare(&a.common, a.policy, a.lambda, a.v)?;
    let policy = policy_for(&model, cfg.policy.kind, cfg.policy.v)?;
    let run_cfg = RunConfig::new(cfg.horizon_slots, cfg.seed);
    let rate = cfg.arrival_packets_per_slot()?;
    let window_start = a.ledger.map(|n| cfg.horizon_slots.saturating_sub(n));
    let mut rec = TrailRecorder::new(&model);
    let result = run_observed(&model, policy, rate, &run_cfg, &mut |r| {
        if window_start.is_some_and(|w| r.slot >= w) {
            rec.observe(r);
        }
    })?;

    let out = &a.common.out;
    let mut manifest = Manifest::new("run", &a.common.scenario, &cfg);
    manifest.write(out, "timeline.csv", output::timeline_csv(&result.timeline)?)?;
    manifest.write(out, "throughput.csv", output::throughput_csv(&model, &result.throughput)?)?;
    manifest.write(out, "summary.json", output::run_summary(&cfg, &result)?)?;
    if window_start.is_some() {
        let mut buf = Vec::new();
        write_ledger_csv(&model, &rec.finish(), &mut buf)?;
        manifest.write(out, "ledger.csv", buf)?;
    }
    manifest.finish(out)?;

    println!(
        "{} {} lambda={} Mbps V={} slots={}: {}, growth {:.3}, backlog {:.1} packets, cost {:.3}/s (real {:.3}/s)",
        cfg.name,
        result.policy.as_str(),
        cfg.arrival_mbps,
        result.v,
        result.slots,
        if result.verdict.stable { "stable" } else { "unstable" },
        result.verdict.growth,
        result.averages.backlog,
        result.cost_per_second(),
        result.cost_real_per_second(),
    );
    Ok(())
}

fn cmd_sweep_lambda(a: SweepLambdaArgs) -> Result<()> {
    if a.grid.is_empty() {
        bail!("--grid is required");
    }
    let grid = parse::flatten(a.grid);
    let (cfg, model) = prepare(&a.common, None, None, Some(a.v))?;
    let run_cfg = RunConfig::new(cfg.horizon_slots, cfg.seed);
    let out = &a.common.out;
    let mut manifest = Manifest::new("sweep-lambda", &a.common.scenario, &cfg);
    manifest.grid = Some(grid.clone());
    let mut summaries = Vec::new();
    for kind in a.policy {
        let params = PolicyParams::new(kind, a.v)?;
        let sweep = if kind == PolicyKind::Randomized {
            let spec = RandomizedPolicySpec::uniform(&model, true);
            let points = grid
                .par_iter()
                .enumerate()
                .map(|(idx, &mbps)| {
                    let c = RunConfig {
                        seed: derive_seed(run_cfg.seed, idx as u64),
                        ..run_cfg
                    };
                    let r = run(&model, Policy::Randomized(spec.clone()), model.units.mbps_to_packets_per_slot(mbps), &c)?;
                    Ok(LambdaPoint {
                        lambda_mbps: mbps,
                        stable: r.verdict.stable,
                        growth: r.verdict.growth,
                        avg_backlog: r.averages.backlog,
                        stable_backlog: r.verdict.stable_mean,
                        avg_cost: r.cost_per_second(),
                        avg_cost_real: r.cost_real_per_second(),
                    })
                })
                .collect::<mcsc::Result<Vec<_>>>()?;
            summarize_lambda(params, points)
        } else {
            sweep_lambda(&model, params, &grid, &run_cfg)?
        };
        let tag = kind.as_str();
        manifest.write(out, &format!("sweep_lambda_{tag}.csv"), output::lambda_csv(&sweep)?)?;
        manifest.write(out, &format!("plot_lambda_backlog_{tag}.csv"), output::lambda_plot(&sweep)?)?;
        match sweep.boundary_mbps {
            Some(b) => println!("{tag}: boundary {b} Mbps"),
            None => println!("{tag}: no stable grid point"),
        }
        for w in &sweep.warnings {
            println!("{tag}: warning: {w}");
        }
        summaries.push(sweep);
    }
    manifest.write(out, "summary.json", serde_json::to_vec_pretty(&summaries)?)?;
    manifest.finish(out)?;
    Ok(())
}

fn cmd_sweep_v(a: SweepVArgs) -> Result<()> {
    if a.grid.is_empty() {
        bail!("--grid is required");
    }
    let grid = parse::flatten(a.grid);
    let (cfg, model) = prepare(&a.common, None, a.lambda, None)?;
    let run_cfg = RunConfig::new(cfg.horizon_slots, cfg.seed);
    let out = &a.common.out;
    let mut manifest = Manifest::new("sweep-v", &a.common.scenario, &cfg);
    manifest.grid = Some(grid.clone());
    let mut summaries = Vec::new();
    for kind in a.policy {
        if kind == PolicyKind::Randomized {
            bail!("sweep-v needs a max-weight policy; the randomized policy has no V");
        }
        let sweep = sweep_v(&model, kind, &grid, cfg.arrival_mbps, &run_cfg)?;
        let tag = kind.as_str();
        manifest.write(out, &format!("sweep_v_{tag}.csv"), output::v_csv(&sweep)?)?;
        let (backlog, cost) = output::v_plots(&sweep)?;
        manifest.write(out, &format!("plot_v_backlog_{tag}.csv"), backlog)?;
        manifest.write(out, &format!("plot_v_cost_{tag}.csv"), cost)?;
        for p in &sweep.points {
            println!("{tag}: V={:e} backlog {:.1} cost {:.3}/s", p.v, p.avg_backlog, p.avg_cost);
        }
        for w in &sweep.warnings {
            println!("{tag}: warning: {w}");
        }
        summaries.push(sweep);
    }
    manifest.write(out, "summary.json", serde_json::to_vec_pretty(&summaries)?)?;
    manifest.finish(out)?;
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<bool> {
    let scenario = match a.scenario {
        Some(s) => s,
        None => {
            let dir = a.ledger.parent().unwrap_or(Path::new("."));
            let m = Manifest::read(&dir.join("manifest.json"))
                .context("no --scenario given and no readable manifest.json next to the ledger")?;
            m.scenario
        }
    };
    let cfg = load_scenario(&scenario)?;
    let model = mcsc::build(&cfg)?;
    let file = fs::File::open(&a.ledger).with_context(|| format!("opening {}", a.ledger.display()))?;
    let rows = read_ledger_csv(&model, file)?;
    let report = audit_ledger(&model, &rows);
    let text = report.to_json();
    println!("{text}");
    if let Some(p) = a.out {
        fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("audit: {} failed, max violation {:e} > {:e}", c.name, c.max_violation, c.tolerance);
    }
    Ok(report.passed())
}
