//! The acceptance suite: ten criteria, each a fixed configuration run at
//! its stated tolerance. Experiments shared between criteria run once.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;
use std::time::Instant;

use serde::Serialize;

use super::analysis::Convergence;
use super::config::RunConfig;
use super::experiments::{
    run_arc_accuracy, run_conservation, run_optimality, run_ring, run_stability, ExperimentOutput,
};
use super::report::{sources, BoundCheck};
use crate::error::Result;
use crate::geometry::{extend_by_reflection, reflect_t, sample_arc_on, ArcParams, Filament, Grid};
use crate::invariants::rayleigh_ratio;
use crate::perturbations::PerturbationSpec;
use crate::solver::{simulate, BoundaryClosure, BoundaryCondition, SolverConfig};

/// `‖Tx(t) − x(t)‖∞` bound for reflection-symmetric data.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub checks: Vec<BoundCheck>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn headline(&self) -> String {
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        format!(
            "{} criterion {:>2}: {} ({} checks, {failed} failed, {:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.checks.len(),
            self.seconds
        )
    }
}

pub const TITLES: [(u8, &str); 10] = [
    (1, "exact-solution reproduction"),
    (2, "conservation of E, E1, E2"),
    (3, "looped-arc optimality slopes"),
    (4, "explicit-constant bounds"),
    (5, "boundary-plane preservation"),
    (6, "constant-shift fixed point"),
    (7, "reflection symmetry preservation"),
    (8, "ring segmentation equivalence"),
    (9, "ring optimality slopes"),
    (10, "Poincaré sharpness"),
];

type Shared = OnceLock<std::result::Result<ExperimentOutput, String>>;

/// Lazily computed experiments shared by several criteria.
#[derive(Default)]
pub struct Suite {
    arc: Shared,
    conservation: Shared,
    stability: Shared,
    shift: Shared,
    optimality: Shared,
}

fn quarter_arc() -> RunConfig {
    RunConfig {
        filament: Filament::Arc(ArcParams {
            radius: 1.0,
            angle: FRAC_PI_2,
        }),
        ..Default::default()
    }
}

fn random_corpus() -> PerturbationSpec {
    PerturbationSpec::SmoothRandom {
        seed: 1,
        amplitude: 1e-2,
        margin: 0.1,
    }
}

pub fn arc_config() -> RunConfig {
    let mut cfg = quarter_arc();
    cfg.n_nodes = 256;
    cfg.solver.t_final = 0.5;
    cfg.experiment.ladder = vec![128, 256, 512];
    cfg
}

pub fn conservation_config() -> RunConfig {
    let mut cfg = arc_config();
    cfg.perturbation = random_corpus();
    cfg.experiment.corpus_size = 10;
    cfg
}

pub fn stability_config() -> RunConfig {
    let mut cfg = quarter_arc();
    cfg.n_nodes = 256;
    cfg.solver.t_final = 5.0;
    cfg.perturbation = random_corpus();
    cfg.experiment.corpus_size = 10;
    cfg
}

pub fn shift_config() -> RunConfig {
    let mut cfg = stability_config();
    cfg.perturbation = PerturbationSpec::ConstantShift { c: [0.0, 0.0, 0.1] };
    cfg
}

pub fn optimality_config() -> RunConfig {
    let mut cfg = quarter_arc();
    cfg.n_nodes = 256;
    cfg.solver.t_final = 1.0;
    cfg.experiment.loops = vec![1, 2];
    cfg
}

pub fn ring_segmentation_config(perturbation: PerturbationSpec, k: usize, closure: BoundaryClosure) -> RunConfig {
    let mut cfg = RunConfig {
        filament: Filament::Ring { radius: 1.0 },
        n_nodes: 192,
        perturbation,
        ..Default::default()
    };
    cfg.solver.t_final = 1.0;
    cfg.solver.closure = closure;
    cfg.experiment.segments = k;
    cfg.experiment.ring_ladder = vec![192, 384, 768];
    cfg
}

pub fn ring_optimality_config(n: u32) -> RunConfig {
    let mut cfg = RunConfig {
        filament: Filament::Ring { radius: 1.0 },
        n_nodes: 384,
        perturbation: PerturbationSpec::RingLooped { n },
        ..Default::default()
    };
    cfg.solver.t_final = 1.0;
    cfg.experiment.segments = 6;
    cfg.experiment.ring_ladder = Vec::new();
    cfg
}

fn shared(
    cell: &Shared,
    f: impl FnOnce() -> Result<ExperimentOutput>,
) -> std::result::Result<&ExperimentOutput, String> {
    cell.get_or_init(|| f().map_err(|e| e.to_string()))
        .as_ref()
        .map_err(Clone::clone)
}

/// Builds an outcome from checks selected out of experiment reports; an
/// experiment error becomes a failing check.
struct Builder {
    checks: Vec<BoundCheck>,
    notes: Vec<String>,
}

impl Builder {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn take(
        &mut self,
        label: &str,
        out: std::result::Result<&ExperimentOutput, String>,
        keep: impl Fn(&BoundCheck) -> bool,
    ) {
        match out {
            Ok(out) => {
                self.checks
                    .extend(out.report.checks.iter().filter(|c| keep(c)).cloned().map(|mut c| {
                        c.name = format!("{label}: {}", c.name);
                        c
                    }));
                self.notes
                    .extend(out.report.notes.iter().map(|n| format!("{label}: {n}")));
            }
            Err(e) => self.error(label, e),
        }
    }

    fn error(&mut self, label: &str, e: impl std::fmt::Display) {
        self.checks.push(
            BoundCheck::at_most(format!("{label}: experiment failed"), sources::EXECUTION, f64::NAN, 0.0)
                .with_detail(e.to_string()),
        );
    }

    fn finish(self, id: u8, start: Instant) -> CriterionOutcome {
        let title = TITLES.iter().find(|(i, _)| *i == id).map_or("?", |(_, t)| t);
        CriterionOutcome {
            id,
            title,
            passed: !self.checks.is_empty() && self.checks.iter().all(|c| c.passed),
            checks: self.checks,
            notes: self.notes,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

fn from_source(source: &'static str) -> impl Fn(&BoundCheck) -> bool {
    move |c| c.source == source
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    fn arc(&self) -> std::result::Result<&ExperimentOutput, String> {
        shared(&self.arc, || run_arc_accuracy(&arc_config()))
    }

    fn conservation(&self) -> std::result::Result<&ExperimentOutput, String> {
        shared(&self.conservation, || run_conservation(&conservation_config()))
    }

    fn stability(&self) -> std::result::Result<&ExperimentOutput, String> {
        shared(&self.stability, || run_stability(&stability_config()))
    }

    fn shift(&self) -> std::result::Result<&ExperimentOutput, String> {
        shared(&self.shift, || run_stability(&shift_config()))
    }

    fn optimality(&self) -> std::result::Result<&ExperimentOutput, String> {
        shared(&self.optimality, || run_optimality(&optimality_config()))
    }

    pub fn run(&self, id: u8) -> CriterionOutcome {
        let start = Instant::now();
        let mut b = Builder::new();
        match id {
            1 => b.take("arc", self.arc(), from_source(sources::EXACT_ARC)),
            2 => {
                let energy = |c: &BoundCheck| c.source == sources::ENERGY_E || c.source == sources::HIGHER_ENERGIES;
                b.take("arc", self.arc(), energy);
                b.take("random corpus", self.conservation(), energy);
            }
            3 => b.take("optimality", self.optimality(), from_source(sources::LOOPED_OPTIMALITY)),
            4 => {
                let explicit = |c: &BoundCheck| c.source == sources::BASIC_ESTIMATE || c.source == sources::NONDECAY;
                b.take("random corpus", self.stability(), explicit);
            }
            5 => {
                let planes = from_source(sources::PLANE_INVARIANCE);
                b.take("arc", self.arc(), &planes);
                b.take("conservation corpus", self.conservation(), &planes);
                b.take("stability corpus", self.stability(), &planes);
                b.take("constant shift", self.shift(), &planes);
                b.take("looped arcs", self.optimality(), &planes);
            }
            6 => b.take("constant shift", self.shift(), from_source(sources::CONSTANT_SHIFT)),
            7 => match symmetry_checks() {
                Ok(checks) => b.checks.extend(checks),
                Err(e) => b.error("symmetric run", e),
            },
            8 => {
                let cases = [
                    ("circle k = 4", PerturbationSpec::None, 4),
                    ("ring_looped n = 2, k = 6", PerturbationSpec::RingLooped { n: 2 }, 6),
                ];
                for (label, spec, k) in cases {
                    for closure in [BoundaryClosure::Reflection, BoundaryClosure::TangentGhost] {
                        let cfg = ring_segmentation_config(spec.clone(), k, closure);
                        let label = format!("{label}, {closure:?} closure");
                        match run_ring(&cfg) {
                            Ok(out) => b.take(&label, Ok(&out), from_source(sources::RING_SEGMENTATION)),
                            Err(e) => b.error(&label, e),
                        }
                    }
                }
            }
            9 => {
                for n in [2, 3] {
                    let label = format!("ring_looped n = {n}");
                    match run_ring(&ring_optimality_config(n)) {
                        Ok(out) => b.take(&label, Ok(&out), from_source(sources::RING_OPTIMALITY)),
                        Err(e) => b.error(&label, e),
                    }
                }
            }
            10 => match poincare_checks() {
                Ok(checks) => b.checks.extend(checks),
                Err(e) => b.error("Rayleigh quotient", e),
            },
            _ => b.error("unknown criterion", format!("no criterion {id}")),
        }
        b.finish(id, start)
    }

    /// Runs the selected criteria in order (all ten when `ids` is empty).
    pub fn run_all(&self, ids: &[u8]) -> Vec<CriterionOutcome> {
        let all: Vec<u8> = TITLES.iter().map(|(i, _)| *i).collect();
        let ids = if ids.is_empty() { &all[..] } else { ids };
        ids.iter().map(|&id| self.run(id)).collect()
    }
}

/// Reflection-extended arc data on `[−L, L]` keeps `Tx = x`.
pub fn symmetry_checks() -> Result<Vec<BoundCheck>> {
    let params = ArcParams::new(1.0, FRAC_PI_2)?;
    let grid = params.grid(257)?;
    let phi = random_corpus().build_arc(&params, &grid)?;
    let half = sample_arc_on(1.0, 0.0, &grid)?.perturbed(&phi)?;
    let ext = extend_by_reflection(&half)?;
    let theta = params.angle;
    let bc = BoundaryCondition::fixed(
        crate::geometry::Vec3::new(theta.sin(), theta.cos(), 0.0),
        params.upper_tangent(),
    )?;
    let (_, dt) = SolverConfig::default().time_steps(ext.curve.grid.spacing);
    let cfg = SolverConfig {
        t_final: 1.0,
        snapshot_every: ((0.05 / dt).round() as usize).max(1),
        observe_every: ((0.05 / dt).round() as usize).max(1),
        ..Default::default()
    };
    let traj = simulate(&ext.curve, &bc, &cfg, &[])?;
    let mut worst: f64 = 0.0;
    for snap in &traj.snapshots {
        let f = snap.curve.as_field();
        worst = worst.max(reflect_t(&f)?.max_abs_diff(&f));
    }
    Ok(vec![
        BoundCheck::at_most(
            "join residual of the extension at s = 0",
            sources::REFLECTION,
            ext.join_residual,
            crate::geometry::JOIN_TOLERANCE,
        ),
        BoundCheck::at_most(
            "max_t ‖Tx(t) − x(t)‖∞ over t ∈ [0, 1]",
            sources::REFLECTION,
            worst,
            SYMMETRY_TOLERANCE,
        )
        .with_detail(format!(
            "{} snapshots on {} nodes",
            traj.snapshots.len(),
            ext.curve.grid.n_nodes
        )),
    ])
}

/// Discrete `‖f‖/‖f_s‖` for `f = sin(πs/L)` against `L/π` at two
/// resolutions: relative error within `(πh/L)²` and second-order decay.
pub fn poincare_checks() -> Result<Vec<BoundCheck>> {
    let params = ArcParams::new(1.0, FRAC_PI_2)?;
    let l = params.length();
    let target = crate::invariants::poincare_constant(&params);
    let nodes = vec![129usize, 257];
    let mut errors = Vec::new();
    let mut spacings = Vec::new();
    let mut checks = Vec::new();
    for &n in &nodes {
        let grid = Grid::interval(l, n)?;
        let f: Vec<f64> = grid.nodes().map(|s| (PI * s / l).sin()).collect();
        let ratio = rayleigh_ratio(&f, &grid)?;
        let rel = (ratio / target - 1.0).abs();
        let allowance = (PI * grid.spacing / l).powi(2);
        checks.push(
            BoundCheck::at_most(
                format!("|ratio/(L/π) − 1| at N = {n}"),
                sources::POINCARE,
                rel,
                allowance,
            )
            .with_detail(format!("ratio {ratio:.12} vs L/π = {target:.12}")),
        );
        errors.push(rel);
        spacings.push(grid.spacing);
    }
    let conv = Convergence::new("Rayleigh ratio error", nodes, spacings, errors, 1);
    checks.push(BoundCheck::order(sources::POINCARE, &conv, 1.9));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_ten_passes() {
        let out = Suite::new().run(10);
        assert!(out.passed, "{:#?}", out.checks);
    }

    #[test]
    fn unknown_criterion_fails() {
        assert!(!Suite::new().run(11).passed);
    }

    #[test]
    fn configs_are_valid() {
        for cfg in [
            arc_config(),
            conservation_config(),
            stability_config(),
            shift_config(),
            optimality_config(),
            ring_segmentation_config(PerturbationSpec::RingLooped { n: 2 }, 6, BoundaryClosure::Reflection),
            ring_optimality_config(3),
        ] {
            cfg.validate().unwrap();
        }
    }
}
