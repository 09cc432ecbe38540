use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::config::RunConfig;
use super::experiments::{run_experiment, ExperimentKind};
use super::report::ExperimentReport;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// One point of a sweep. Failed runs keep their error message.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ExperimentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepEntry {
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.passed)
    }
}

/// Short names for common axes.
fn resolve_axis(axis: &str) -> &str {
    match axis {
        "theta" | "θ" | "angle" => "filament.angle",
        "R" | "radius" => "filament.radius",
        "N" | "n" | "nodes" => "n_nodes",
        "T" | "t_final" | "tfinal" => "solver.t_final",
        "dt_factor" => "solver.dt_factor",
        "k" | "segments" => "experiment.segments",
        other => other,
    }
}

fn axis_node<'a>(root: &'a mut Value, axis: &str) -> Result<&'a mut Value> {
    let mut node = root;
    for key in resolve_axis(axis).split('.') {
        node = node
            .get_mut(key)
            .ok_or_else(|| Error::Config(format!("sweep axis `{axis}` is not a RunConfig field")))?;
    }
    if !node.is_number() {
        return Err(Error::Config(format!("sweep axis `{axis}` is not numeric")));
    }
    Ok(node)
}

/// Copy of `template` with the dotted field `axis` set to `value`.
pub fn set_axis(template: &RunConfig, axis: &str, value: f64) -> Result<RunConfig> {
    let mut root = serde_json::to_value(template)?;
    let node = axis_node(&mut root, axis)?;
    let integer = node.is_u64() || node.is_i64();
    *node = if integer {
        if value.fract() != 0.0 || value < 0.0 {
            return Err(Error::Config(format!(
                "axis `{axis}` takes non-negative integers, got {value}"
            )));
        }
        Value::from(value as u64)
    } else {
        Value::from(value)
    };
    let cfg: RunConfig = serde_json::from_value(root)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `kind` once per value. Runs are independent and execute
/// concurrently; results keep the order of `values`. Only an unknown axis
/// is an error; failures of individual runs are recorded.
pub fn sweep(template: &RunConfig, kind: ExperimentKind, axis: &str, values: &[f64]) -> Result<Vec<SweepEntry>> {
    axis_node(&mut serde_json::to_value(template)?, axis)?;
    Ok(values
        .par_iter()
        .map(|&value| {
            let outcome = set_axis(template, axis, value).and_then(|cfg| run_experiment(kind, &cfg));
            match outcome {
                Ok(out) => SweepEntry {
                    value,
                    report: Some(out.report),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep {axis} = {value}: {e}");
                    SweepEntry {
                        value,
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect())
}

/// Columns: axis value, pass flag, failed check count, then every metric
/// seen in any report (empty where a run lacks it).
pub fn write_sweep_csv(path: &Path, axis: &str, entries: &[SweepEntry]) -> Result<()> {
    let mut metrics: Vec<String> = Vec::new();
    for e in entries {
        if let Some(r) = &e.report {
            for k in r.metrics.keys() {
                if !metrics.contains(k) {
                    metrics.push(k.clone());
                }
            }
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        axis.to_string(),
        "passed".into(),
        "failed_checks".into(),
        "error".into(),
    ];
    header.extend(metrics.iter().cloned());
    w.write_record(&header)?;
    for e in entries {
        let mut row = vec![fmt_f64(e.value), e.passed().to_string()];
        match &e.report {
            Some(r) => {
                row.push(r.failures().count().to_string());
                row.push(String::new());
                row.extend(
                    metrics
                        .iter()
                        .map(|k| r.metrics.get(k).map(|v| fmt_f64(*v)).unwrap_or_default()),
                );
            }
            None => {
                row.push(String::new());
                row.push(e.error.clone().unwrap_or_default());
                row.extend(metrics.iter().map(|_| String::new()));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_nested_and_integer_fields() {
        let base = RunConfig::default();
        let c = set_axis(&base, "theta", 1.0).unwrap();
        assert_eq!(c.arc_params().unwrap().angle, 1.0);
        let c = set_axis(&base, "N", 128.0).unwrap();
        assert_eq!(c.n_nodes, 128);
        assert!(set_axis(&base, "N", 128.5).is_err());
        let c = set_axis(&base, "solver.t_final", 2.0).unwrap();
        assert_eq!(c.solver.t_final, 2.0);
    }

    #[test]
    fn unknown_axis_is_rejected() {
        let base = RunConfig::default();
        assert!(set_axis(&base, "nonexistent", 1.0).is_err());
        assert!(sweep(&base, ExperimentKind::ArcAccuracy, "nonexistent", &[1.0]).is_err());
    }

    #[test]
    fn empty_sweep_is_empty() {
        let base = RunConfig::default();
        let out = sweep(&base, ExperimentKind::Stability, "theta", &[]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn failures_are_recorded_and_the_sweep_continues() {
        let mut base = RunConfig::default();
        base.solver.t_final = 0.01;
        base.experiment.ladder = vec![32];
        base.n_nodes = 32;
        // 4 nodes is too small; the other value runs.
        let out = sweep(&base, ExperimentKind::ArcAccuracy, "N", &[4.0, 32.0]).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[0].error.is_some());
        assert!(out[1].report.is_some());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&path, "N", &out).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
