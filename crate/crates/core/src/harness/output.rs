use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;

use super::config::RunConfig;
use super::experiments::{build_ring, simulate_arc, ExperimentOutput, PlotData};
use super::report::Provenance;
use crate::error::{Error, Result};
use crate::geometry::{Filament, Grid};
use crate::invariants::{absolute_drift, relative_drift, Channel, PerturbationObserver};
use crate::io::{write_curve_csv, write_json, write_plot_dat, write_timeseries_csv};
use crate::ring::perturbed_circle;
use crate::solver::{simulate, BoundaryCondition, SolverConfig, Trajectory};

/// Channels recorded by `simulate` when the config selects none.
pub const DEFAULT_CHANNELS: [Channel; 8] = [
    Channel::E,
    Channel::E1,
    Channel::E2,
    Channel::PhiL2,
    Channel::PhiSH1,
    Channel::Phi3Mean,
    Channel::PlaneLower,
    Channel::PlaneUpper,
];

#[derive(Debug, Clone, Serialize)]
pub struct ChannelSummary {
    pub initial: f64,
    pub last: f64,
    pub min: f64,
    pub max: f64,
    pub absolute_drift: f64,
    pub relative_drift: f64,
}

impl ChannelSummary {
    fn of(series: &[f64]) -> Self {
        Self {
            initial: series.first().copied().unwrap_or(f64::NAN),
            last: series.last().copied().unwrap_or(f64::NAN),
            min: series.iter().cloned().fold(f64::INFINITY, f64::min),
            max: series.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            absolute_drift: absolute_drift(series),
            relative_drift: relative_drift(series),
        }
    }
}

/// Self-describing record of one simulation; the config carries all defaults.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub config: RunConfig,
    pub provenance: Provenance,
    pub grid: Grid,
    pub steps: usize,
    pub dt: f64,
    pub final_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissibility_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_error: Option<f64>,
    pub channels: IndexMap<String, ChannelSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub summary: SimulationSummary,
}

/// One run of the configured filament and perturbation.
pub fn run_simulation(config: &RunConfig) -> Result<Simulation> {
    config.validate()?;
    let channels = if config.observers.is_empty() {
        DEFAULT_CHANNELS.to_vec()
    } else {
        config.observers.clone()
    };
    let spec = config.effective_perturbation();
    let (trajectory, grid, admissibility, exact_error) = match config.filament {
        Filament::Arc(_) => {
            let params = config.arc_params()?;
            let run = simulate_arc(
                &params,
                &spec,
                config.n_nodes,
                &config.solver,
                &channels,
                config.experiment.sample_interval,
            )?;
            let grid = run.phi0.grid;
            (
                run.trajectory,
                grid,
                Some(run.assumptions.max_residual()),
                run.exact_error,
            )
        }
        Filament::Ring { radius } => {
            let grid = Grid::periodic(2.0 * std::f64::consts::PI * radius, config.n_nodes)?;
            let phi = build_ring(&spec, radius, &grid)?;
            let x0 = perturbed_circle(&phi, radius)?;
            let solver = SolverConfig {
                observe_every: config.observe_stride(&config.solver, grid.spacing),
                ..config.solver
            };
            let obs = PerturbationObserver::for_ring(radius, &channels);
            (
                simulate(&x0, &BoundaryCondition::Periodic, &solver, &[&obs])?,
                grid,
                None,
                None,
            )
        }
    };
    let summary = SimulationSummary {
        config: config.clone(),
        provenance: Provenance::of(config),
        grid,
        steps: trajectory.steps,
        dt: trajectory.dt,
        final_time: trajectory.final_time(),
        admissibility_residual: admissibility,
        exact_error,
        channels: trajectory
            .channels
            .iter()
            .map(|(k, v)| (k.clone(), ChannelSummary::of(v)))
            .collect(),
        warnings: trajectory.warnings.clone(),
    };
    Ok(Simulation { trajectory, summary })
}

fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".write-test");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", dir.display())))
}

/// `timeseries.csv`, `summary.json`, `snapshots/*.csv` and `plots/channels.dat`.
pub fn write_simulation(dir: &Path, sim: &Simulation) -> Result<()> {
    ensure_writable(dir)?;
    let traj = &sim.trajectory;
    write_timeseries_csv(&dir.join("timeseries.csv"), traj)?;
    write_json(&dir.join("summary.json"), &sim.summary)?;
    for (i, snap) in traj.snapshots.iter().enumerate() {
        write_curve_csv(&dir.join("snapshots").join(format!("snapshot_{i:04}.csv")), &snap.curve)?;
    }
    let names: Vec<&str> = traj.channels.keys().map(String::as_str).collect();
    let plot = PlotData {
        name: "channels".into(),
        header: std::iter::once("t")
            .chain(names.iter().copied())
            .map(String::from)
            .collect(),
        columns: std::iter::once(traj.times.clone())
            .chain(traj.channels.values().cloned())
            .collect(),
    };
    write_plot(dir, &plot)
}

fn write_plot(dir: &Path, plot: &PlotData) -> Result<()> {
    let header: Vec<&str> = plot.header.iter().map(String::as_str).collect();
    let columns: Vec<&[f64]> = plot.columns.iter().map(Vec::as_slice).collect();
    write_plot_dat(&dir.join("plots").join(format!("{}.dat", plot.name)), &header, &columns)
}

/// `report.json` plus one `plots/<name>.dat` per plot.
pub fn write_experiment(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    ensure_writable(dir)?;
    write_json(&dir.join("report.json"), &out.report)?;
    for plot in &out.plots {
        write_plot(dir, plot)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbations::PerturbationSpec;

    fn small() -> RunConfig {
        let mut cfg = RunConfig {
            n_nodes: 128,
            perturbation: PerturbationSpec::SmoothRandom {
                seed: 5,
                amplitude: 0.01,
                margin: 0.1,
            },
            ..Default::default()
        };
        cfg.solver.t_final = 0.005;
        cfg.solver.snapshot_every = 200;
        cfg
    }

    #[test]
    fn writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let sim = run_simulation(&small()).unwrap();
        write_simulation(dir.path(), &sim).unwrap();
        for f in [
            "timeseries.csv",
            "summary.json",
            "plots/channels.dat",
            "snapshots/snapshot_0000.csv",
        ] {
            assert!(dir.path().join(f).is_file(), "{f} missing");
        }
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["config"]["solver"]["dt_factor"], 0.25);
    }

    #[test]
    fn identical_configs_give_identical_csv() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_simulation(a.path(), &run_simulation(&small()).unwrap()).unwrap();
        write_simulation(b.path(), &run_simulation(&small()).unwrap()).unwrap();
        for f in ["timeseries.csv", "snapshots/snapshot_0001.csv"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f} differs");
        }
    }

    #[test]
    fn ring_simulation_runs() {
        let mut cfg = RunConfig {
            n_nodes: 48,
            filament: Filament::Ring { radius: 1.0 },
            perturbation: PerturbationSpec::RingLooped { n: 2 },
            observers: vec![Channel::X3OffsetSup],
            ..Default::default()
        };
        cfg.solver.t_final = 0.01;
        let sim = run_simulation(&cfg).unwrap();
        assert!(sim.summary.channels.contains_key("x3_offset_sup"));
        assert!(sim.summary.admissibility_residual.is_none());
    }
}
