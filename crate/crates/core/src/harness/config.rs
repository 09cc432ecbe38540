use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{ArcParams, Filament, Grid};
use crate::invariants::Channel;
use crate::perturbations::PerturbationSpec;
use crate::solver::SolverConfig;

/// Everything needed to reproduce one experiment. Every field has a
/// default, so a config file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub filament: Filament,
    pub n_nodes: usize,
    pub solver: SolverConfig,
    pub perturbation: PerturbationSpec,
    /// Extra observer channels; empty keeps the experiment's own selection.
    pub observers: Vec<Channel>,
    pub output_dir: PathBuf,
    /// Replaces the seed of random perturbation families when set.
    pub seed: Option<u64>,
    pub experiment: ExperimentOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    /// Resolution ladder for arc convergence studies.
    pub ladder: Vec<usize>,
    /// Resolution ladder for ring segmentation studies (divisible by the
    /// segment count, with an even number of nodes per segment).
    pub ring_ladder: Vec<usize>,
    /// Winding numbers for the looped-arc optimality study.
    pub loops: Vec<u32>,
    /// Number of reflective segments `k` for ring experiments.
    pub segments: usize,
    /// Number of consecutive seeds in a random corpus.
    pub corpus_size: usize,
    /// Target time between recorded observations.
    pub sample_interval: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            ladder: vec![128, 256, 512],
            ring_ladder: vec![192, 384, 768],
            loops: vec![1, 2, 4],
            segments: 4,
            corpus_size: 10,
            sample_interval: 0.01,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            filament: Filament::Arc(ArcParams {
                radius: 1.0,
                angle: FRAC_PI_2,
            }),
            n_nodes: 256,
            solver: SolverConfig::default(),
            perturbation: PerturbationSpec::None,
            observers: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed: None,
            experiment: ExperimentOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match self.filament {
            Filament::Arc(p) => {
                ArcParams::new(p.radius, p.angle)?;
                if self.perturbation.is_ring_family() {
                    return Err(Error::Config(format!(
                        "perturbation family `{}` needs a ring filament",
                        self.perturbation.family()
                    )));
                }
            }
            Filament::Ring { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "ring radius must be positive, got {radius}"
                    )));
                }
                if !matches!(self.perturbation, PerturbationSpec::None) && !self.perturbation.is_ring_family() {
                    return Err(Error::Config(format!(
                        "perturbation family `{}` is defined on arcs only",
                        self.perturbation.family()
                    )));
                }
            }
        }
        if self.n_nodes < Grid::MIN_NODES {
            return Err(Error::GridTooSmall {
                needed: Grid::MIN_NODES,
                got: self.n_nodes,
            });
        }
        self.solver.validate()?;
        self.effective_perturbation().validate()?;
        let ex = &self.experiment;
        if let Some(&n) = ex.ladder.iter().chain(&ex.ring_ladder).find(|&&n| n < Grid::MIN_NODES) {
            return Err(Error::GridTooSmall {
                needed: Grid::MIN_NODES,
                got: n,
            });
        }
        if ex.loops.contains(&0) {
            return Err(Error::Config("loop counts must be at least 1".into()));
        }
        if ex.segments == 0 {
            return Err(Error::Config("segments must be at least 1".into()));
        }
        if ex.corpus_size == 0 {
            return Err(Error::Config("corpus_size must be at least 1".into()));
        }
        if !(ex.sample_interval > 0.0 && ex.sample_interval.is_finite()) {
            return Err(Error::Config(format!(
                "sample_interval must be positive, got {}",
                ex.sample_interval
            )));
        }
        Ok(())
    }

    pub fn arc_params(&self) -> Result<ArcParams> {
        match self.filament {
            Filament::Arc(p) => ArcParams::new(p.radius, p.angle),
            Filament::Ring { .. } => Err(Error::Config("experiment needs an arc filament".into())),
        }
    }

    pub fn ring_radius(&self) -> Result<f64> {
        match self.filament {
            Filament::Ring { radius } => Ok(radius),
            Filament::Arc(_) => Err(Error::Config("experiment needs a ring filament".into())),
        }
    }

    /// The configured perturbation with the seed override applied.
    pub fn effective_perturbation(&self) -> PerturbationSpec {
        match self.seed {
            Some(seed) => with_seed(&self.perturbation, seed),
            None => self.perturbation.clone(),
        }
    }

    /// `corpus_size` consecutive seeds for random families; deterministic
    /// families give a corpus of one.
    pub fn corpus(&self) -> Vec<PerturbationSpec> {
        let spec = self.effective_perturbation();
        match seed_of(&spec) {
            Some(base) => (0..self.experiment.corpus_size as u64)
                .map(|i| with_seed(&spec, base.wrapping_add(i)))
                .collect(),
            None => vec![spec],
        }
    }

    /// Observer stride giving roughly one sample per `sample_interval`.
    pub fn observe_stride(&self, solver: &SolverConfig, spacing: f64) -> usize {
        let (_, dt) = solver.time_steps(spacing);
        ((self.experiment.sample_interval / dt).round() as usize).max(1)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("RunConfig serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn seed_of(spec: &PerturbationSpec) -> Option<u64> {
    match spec {
        PerturbationSpec::SmoothRandom { seed, .. } | PerturbationSpec::ReflectiveRandom { seed, .. } => Some(*seed),
        PerturbationSpec::Symmetrized { inner } => seed_of(inner),
        _ => None,
    }
}

fn with_seed(spec: &PerturbationSpec, new_seed: u64) -> PerturbationSpec {
    let mut out = spec.clone();
    match &mut out {
        PerturbationSpec::SmoothRandom { seed, .. } | PerturbationSpec::ReflectiveRandom { seed, .. } => {
            *seed = new_seed
        }
        PerturbationSpec::Symmetrized { inner } => **inner = with_seed(inner, new_seed),
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.perturbation = PerturbationSpec::Symmetrized {
            inner: Box::new(PerturbationSpec::SmoothRandom {
                seed: 3,
                amplitude: 0.01,
                margin: 0.1,
            }),
        };
        cfg.observers = vec![Channel::E, Channel::PhiSSL2];
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn parses_a_ring_config() {
        let cfg = RunConfig::from_toml_str(
            r#"
            n_nodes = 384
            observers = ["E", "x3_offset_sup"]
            [filament]
            kind = "ring"
            radius = 1.0
            [perturbation]
            family = "ring_looped"
            n = 2
            [experiment]
            segments = 6
            "#,
        )
        .unwrap();
        assert_eq!(cfg.ring_radius().unwrap(), 1.0);
        assert_eq!(cfg.experiment.segments, 6);
        assert!(cfg.arc_params().is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_mismatched_families() {
        assert!(RunConfig::from_toml_str("n_node = 3").is_err());
        let ring_on_arc = "[perturbation]\nfamily = \"ring_looped\"\nn = 2\n";
        assert!(RunConfig::from_toml_str(ring_on_arc).is_err());
        assert!(RunConfig::from_toml_str("n_nodes = 4").is_err());
    }

    #[test]
    fn seed_override_reaches_nested_specs() {
        let mut cfg = RunConfig::default();
        cfg.perturbation = PerturbationSpec::Symmetrized {
            inner: Box::new(PerturbationSpec::SmoothRandom {
                seed: 1,
                amplitude: 0.01,
                margin: 0.1,
            }),
        };
        cfg.seed = Some(40);
        cfg.experiment.corpus_size = 3;
        let seeds: Vec<Option<u64>> = cfg.corpus().iter().map(seed_of).collect();
        assert_eq!(seeds, vec![Some(40), Some(41), Some(42)]);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.n_nodes += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
