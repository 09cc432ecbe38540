//! `lie-lab`: batch runner for the filament experiments.
//!
//! Every subcommand reads an optional TOML config, applies the flag
//! overrides and writes its artifacts under `--out`. The exit status is
//! zero exactly when every bound check passed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use lie_core::harness::acceptance::{CriterionOutcome, Suite};
use lie_core::harness::output::{run_simulation, write_experiment, write_simulation};
use lie_core::harness::sweep::{sweep, write_sweep_csv};
use lie_core::harness::{run_experiment, ExperimentKind, RunConfig};
use lie_core::io::write_json;

#[derive(Parser)]
#[command(name = "lie-lab", version, about = "Arc and ring filament experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid nodes (overrides `n_nodes`).
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Final time (overrides `solver.t_final`).
    #[arg(long, global = true)]
    tfinal: Option<f64>,
    /// Seed for random perturbations (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent runs; defaults to the core count.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One run of the configured filament; writes time series and snapshots.
    Simulate,
    /// Explicit-constant estimates over a perturbation corpus.
    Stability,
    /// Separation slopes of looped arcs.
    Optimality,
    /// Ring segmentation, ring bounds and ring slopes.
    Ring,
    /// Repeats an experiment over values of one config field.
    Sweep {
        /// Field to vary: theta, R, N, T, k, dt_factor or a dotted path.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; multiples of pi such as `3pi/4` are accepted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<String>,
        #[arg(long, value_enum, default_value_t = Kind::Stability)]
        experiment: Kind,
    },
    /// Runs the acceptance criteria (all when none are listed).
    Verify { criteria: Vec<u8> },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    ArcAccuracy,
    Conservation,
    Stability,
    Optimality,
    Ring,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::ArcAccuracy => ExperimentKind::ArcAccuracy,
            Kind::Conservation => ExperimentKind::Conservation,
            Kind::Stability => ExperimentKind::Stability,
            Kind::Optimality => ExperimentKind::Optimality,
            Kind::Ring => ExperimentKind::Ring,
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(n) = common.nodes {
        cfg.n_nodes = n;
    }
    if let Some(t) = common.tfinal {
        cfg.solver.t_final = t;
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `0.5`, `pi`, `pi/4`, `3pi/4` or `3*pi/4`.
fn parse_value(text: &str) -> Result<f64> {
    let t = text.trim().replace('π', "pi");
    let Some((pre, post)) = t.split_once("pi") else {
        return t.parse().with_context(|| format!("bad sweep value `{text}`"));
    };
    let pre = pre.trim_end_matches('*');
    let scale: f64 = match pre {
        "" => 1.0,
        "-" => -1.0,
        p => p.parse().with_context(|| format!("bad sweep value `{text}`"))?,
    };
    let div: f64 = match post.strip_prefix('/') {
        Some(d) => d.parse().with_context(|| format!("bad sweep value `{text}`"))?,
        None if post.is_empty() => 1.0,
        None => bail!("bad sweep value `{text}`"),
    };
    Ok(scale * std::f64::consts::PI / div)
}

fn experiment(kind: ExperimentKind, cfg: &RunConfig) -> Result<bool> {
    let out = run_experiment(kind, cfg)?;
    write_experiment(&cfg.output_dir, &out)?;
    for line in out.report.summary_lines() {
        println!("{line}");
    }
    for note in &out.report.notes {
        println!("  note: {note}");
    }
    info!("report written to {}", cfg.output_dir.join("report.json").display());
    Ok(out.report.passed)
}

fn simulate(cfg: &RunConfig) -> Result<bool> {
    let sim = run_simulation(cfg)?;
    write_simulation(&cfg.output_dir, &sim)?;
    let s = &sim.summary;
    println!(
        "simulated {} steps (dt = {:.3e}) to t = {:.6}",
        s.steps, s.dt, s.final_time
    );
    for (name, c) in &s.channels {
        println!(
            "  {name}: {:.6e} -> {:.6e} (drift {:.3e})",
            c.initial, c.last, c.absolute_drift
        );
    }
    if let Some(e) = s.exact_error {
        println!("  sup error vs exact solution: {e:.6e}");
    }
    for w in &s.warnings {
        println!("  warning: {w}");
    }
    Ok(true)
}

fn run_sweep(cfg: &RunConfig, axis: &str, values: &[String], kind: Kind) -> Result<bool> {
    let values: Vec<f64> = values
        .iter()
        .filter(|v| !v.trim().is_empty())
        .map(|v| parse_value(v))
        .collect::<Result<_>>()?;
    let entries = sweep(cfg, kind.into(), axis, &values)?;
    let dir = &cfg.output_dir;
    write_sweep_csv(&dir.join("sweep.csv"), axis, &entries)?;
    write_json(&dir.join("sweep.json"), &entries)?;
    for e in &entries {
        let status = match (&e.report, &e.error) {
            (Some(r), _) => format!(
                "{} ({} failed checks)",
                if r.passed { "PASS" } else { "FAIL" },
                r.failures().count()
            ),
            (None, Some(err)) => format!("ERROR {err}"),
            (None, None) => "ERROR".into(),
        };
        println!("{axis} = {:.6}: {status}", e.value);
    }
    Ok(entries.iter().all(|e| e.passed()))
}

fn print_outcome(o: &CriterionOutcome) {
    println!("{}", o.headline());
    for c in &o.checks {
        println!("      {}", c.describe());
    }
    for n in &o.notes {
        println!("      note: {n}");
    }
}

fn verify(out: &Path, criteria: &[u8]) -> Result<bool> {
    let outcomes = Suite::new().run_all(criteria);
    outcomes.iter().for_each(print_outcome);
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("acceptance: {passed} of {} criteria passed", outcomes.len());
    write_json(&out.join("verify.json"), &outcomes)?;
    Ok(passed == outcomes.len())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Stability => experiment(ExperimentKind::Stability, &cfg),
        Command::Optimality => experiment(ExperimentKind::Optimality, &cfg),
        Command::Ring => experiment(ExperimentKind::Ring, &cfg),
        Command::Sweep {
            axis,
            values,
            experiment,
        } => run_sweep(&cfg, &axis, &values, experiment),
        Command::Verify { criteria } => verify(&cfg.output_dir, &criteria),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
