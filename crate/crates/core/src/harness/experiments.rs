use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{affine_envelope, roundoff_floor, second_half_slope, Convergence};
use super::config::RunConfig;
use super::report::{sources, BoundCheck, ExperimentReport, SlopeMeasurement};
use crate::error::{Error, Result};
use crate::geometry::{arc_point, sample_arc_on, ArcParams, Curve, Grid, VectorField};
use crate::invariants::{l2_norm_scalar, relative_drift, stability_constants, Channel, PerturbationObserver};
use crate::perturbations::{
    check_assumptions, check_symmetry, looped_radius, looped_slope, needs_midpoint, AssumptionReport, PerturbationSpec,
};
use crate::ring::{
    check_k_reflective, perturbed_circle, reflective_random, ring_looped, ring_slope, segment_and_solve,
};
use crate::solver::{discrete_arc_speed, simulate, BoundaryCondition, FnObserver, Observer, SolverConfig, Trajectory};

/// Largest admissibility residual accepted before a run.
pub const ADMISSIBILITY_TOLERANCE: f64 = 1e-6;
/// Bound on the boundary-plane channels throughout a run.
pub const PLANE_TOLERANCE: f64 = 1e-6;
/// Headroom on the explicit-constant estimates.
pub const UPPER_HEADROOM: f64 = 1.05;
pub const LOWER_HEADROOM: f64 = 0.95;
/// Relative tolerance on fitted separation slopes.
pub const SLOPE_TOLERANCE: f64 = 0.01;
/// Bound on `max_s − min_s` of the vertical offset of looped solutions.
pub const SPREAD_TOLERANCE: f64 = 1e-4;
pub const ORDER_THRESHOLD: f64 = 1.9;
pub const ENERGY_ORDER_THRESHOLD: f64 = 2.0;
pub const ARC_ERROR_TOLERANCE: f64 = 1e-3;
pub const SPEED_TOLERANCE: f64 = 1e-4;
/// Bound on `|d‖φ₃‖/dt|` for constant shifts.
pub const SHIFT_SLOPE_TOLERANCE: f64 = 1e-6;
pub const RUNG_TIME_LIMIT: f64 = 60.0;
pub const SEGMENTATION_MISMATCH_TOLERANCE: f64 = 1e-4;
/// `|ΔE| ≤ ENERGY_DRIFT_TOLERANCE·(1 + |E(φ₀)|)` on the finest rung.
pub const ENERGY_DRIFT_TOLERANCE: f64 = 1e-5;
/// Rounding is allowed to grow by this factor inside a looped-arc window.
///
/// Looped arcs have total angle above π, where the energy is indefinite and
/// perturbations grow at roughly `1/(2Rₙ²)`; the window is capped at
/// `2·ln(LOOP_GROWTH_BUDGET)·Rₙ²` so rounding stays below about `1e-10`.
pub const LOOP_GROWTH_BUDGET: f64 = 1e6;
/// Samples per time window for slope fits.
const SLOPE_SAMPLES: f64 = 200.0;

/// Gnuplot-ready columns for one plot file.
#[derive(Debug, Clone, Serialize)]
pub struct PlotData {
    pub name: String,
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl PlotData {
    fn new(name: impl Into<String>, header: &[&str], columns: Vec<Vec<f64>>) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            columns,
        }
    }

    fn from_trajectory(name: impl Into<String>, traj: &Trajectory, channels: &[&str]) -> Self {
        let mut header = vec!["t".to_string()];
        let mut columns = vec![traj.times.clone()];
        for ch in channels {
            if let Some(c) = traj.channel(ch) {
                header.push(ch.to_string());
                columns.push(c.to_vec());
            }
        }
        Self {
            name: name.into(),
            header,
            columns,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub plots: Vec<PlotData>,
}

/// A completed arc simulation with its admissibility data.
#[derive(Debug, Clone)]
pub struct ArcRun {
    pub n_nodes: usize,
    pub spacing: f64,
    pub spec: PerturbationSpec,
    pub phi0: VectorField,
    pub assumptions: AssumptionReport,
    pub trajectory: Trajectory,
    /// Sup-norm error against the exact solution, for families that have one.
    pub exact_error: Option<f64>,
    pub elapsed: f64,
}

/// Exact solution at time `t` for families that are themselves solutions.
pub fn exact_arc_solution(spec: &PerturbationSpec, params: &ArcParams, grid: &Grid, t: f64) -> Option<Curve> {
    let r = params.radius;
    let f: Box<dyn Fn(f64) -> crate::geometry::Vec3> = match spec {
        PerturbationSpec::None => Box::new(move |s| arc_point(r, s, t)),
        PerturbationSpec::ConstantShift { c } => {
            let c = crate::geometry::Vec3::from(*c);
            Box::new(move |s| arc_point(r, s, t) + c)
        }
        PerturbationSpec::LoopedArc { n } => {
            let rn = looped_radius(*n, params);
            Box::new(move |s| arc_point(rn, s, t))
        }
        _ => return None,
    };
    Curve::from_fn(*grid, f).ok()
}

/// Node count actually used for a spec: symmetric families need a midpoint.
pub fn arc_nodes(spec: &PerturbationSpec, n_nodes: usize) -> usize {
    if needs_midpoint(spec) && n_nodes.is_multiple_of(2) {
        n_nodes + 1
    } else {
        n_nodes
    }
}

/// `‖φ₃‖` measured against the arc as the scheme moves it, at
/// [`discrete_arc_speed`] instead of `1/R`. Recorded for constant shifts.
pub const DISCRETE_PHI3: &str = "phi3_l2_discrete";

/// Builds, checks and simulates one perturbed arc.
pub fn simulate_arc(
    params: &ArcParams,
    spec: &PerturbationSpec,
    n_nodes: usize,
    solver: &SolverConfig,
    channels: &[Channel],
    sample_interval: f64,
) -> Result<ArcRun> {
    let n = arc_nodes(spec, n_nodes);
    let grid = params.grid(n)?;
    let phi0 = spec.build_arc(params, &grid)?;
    let assumptions = check_assumptions(&phi0, params)?;
    if !assumptions.is_admissible(ADMISSIBILITY_TOLERANCE) {
        return Err(Error::Inadmissible(format!(
            "{} at N = {n}: largest residual {:.3e} > {ADMISSIBILITY_TOLERANCE:.0e}",
            spec.family(),
            assumptions.max_residual()
        )));
    }
    let x0 = sample_arc_on(params.radius, 0.0, &grid)?.perturbed(&phi0)?;
    let bc = BoundaryCondition::fixed(params.lower_tangent(), params.upper_tangent())?;
    let (_, dt) = solver.time_steps(grid.spacing);
    let cfg = SolverConfig {
        observe_every: ((sample_interval / dt).round() as usize).max(1),
        ..*solver
    };
    let obs = PerturbationObserver::for_arc(params, channels);
    let v_h = discrete_arc_speed(params.radius, grid.spacing);
    let discrete = FnObserver::new(DISCRETE_PHI3, move |t, c: &Curve| {
        let z: Vec<f64> = c.points.iter().map(|p| p.z - v_h * t).collect();
        l2_norm_scalar(&z, &c.grid)
    });
    let mut observers: Vec<&dyn Observer> = vec![&obs];
    if matches!(spec, PerturbationSpec::ConstantShift { .. }) {
        observers.push(&discrete);
    }
    let start = Instant::now();
    let trajectory = simulate(&x0, &bc, &cfg, &observers)?;
    let elapsed = start.elapsed().as_secs_f64();
    let exact_error = exact_arc_solution(spec, params, &grid, trajectory.final_time()).map(|exact| {
        exact
            .points
            .iter()
            .zip(&trajectory.final_curve.points)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    });
    Ok(ArcRun {
        n_nodes: n,
        spacing: grid.spacing,
        spec: spec.clone(),
        phi0,
        assumptions,
        trajectory,
        exact_error,
        elapsed,
    })
}

fn with_extra(base: &[Channel], extra: &[Channel]) -> Vec<Channel> {
    let mut out = base.to_vec();
    for c in extra {
        if !out.contains(c) {
            out.push(*c);
        }
    }
    out
}

fn series_max(s: &[f64]) -> f64 {
    s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn series_min(s: &[f64]) -> f64 {
    s.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn channel(traj: &Trajectory, c: Channel) -> Result<&[f64]> {
    traj.channel(c.name())
        .ok_or_else(|| Error::Config(format!("channel {} was not recorded", c.name())))
}

fn plane_checks(label: &str, traj: &Trajectory) -> Result<Vec<BoundCheck>> {
    let lower = series_max(channel(traj, Channel::PlaneLower)?);
    let upper = series_max(channel(traj, Channel::PlaneUpper)?);
    Ok(vec![
        BoundCheck::at_most(
            format!("{label}: max |e₂·φ(0,t)|"),
            sources::PLANE_INVARIANCE,
            lower,
            PLANE_TOLERANCE,
        ),
        BoundCheck::at_most(
            format!("{label}: max |b·φ(L,t)|"),
            sources::PLANE_INVARIANCE,
            upper,
            PLANE_TOLERANCE,
        ),
    ])
}

const ENERGIES: [(Channel, u32, &str); 3] = [
    (Channel::E, 2, sources::ENERGY_E),
    (Channel::E1, 3, sources::HIGHER_ENERGIES),
    (Channel::E2, 4, sources::HIGHER_ENERGIES),
];

/// Drift convergence of E, E₁, E₂ over a ladder of runs of one perturbation.
fn energy_checks(label: &str, runs: &[ArcRun], report: &mut ExperimentReport) -> Result<()> {
    let nodes: Vec<usize> = runs.iter().map(|r| r.n_nodes).collect();
    let spacings: Vec<f64> = runs.iter().map(|r| r.spacing).collect();
    for (ch, m, source) in ENERGIES {
        let drifts: Vec<f64> = runs
            .iter()
            .map(|r| channel(&r.trajectory, ch).map(relative_drift))
            .collect::<Result<_>>()?;
        let conv = Convergence::new(
            format!("{label}: relative drift of {}", ch.name()),
            nodes.clone(),
            spacings.clone(),
            drifts,
            m,
        );
        report.check(BoundCheck::order(source, &conv, ENERGY_ORDER_THRESHOLD));
        report.orders.push(conv);
    }
    if let Some(finest) = runs.iter().min_by(|a, b| a.spacing.total_cmp(&b.spacing)) {
        let e = channel(&finest.trajectory, Channel::E)?;
        let de = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max);
        report.check(
            BoundCheck::at_most(
                format!("{label}: |ΔE| at N = {}", finest.n_nodes),
                sources::ENERGY_E,
                de,
                ENERGY_DRIFT_TOLERANCE * (1.0 + e[0].abs()),
            )
            .with_detail(format!("E(φ₀) = {:.6e}", e[0])),
        );
    }
    Ok(())
}

fn ladder_with(config: &RunConfig) -> Vec<usize> {
    let mut ladder = config.experiment.ladder.clone();
    ladder.sort_unstable();
    ladder.dedup();
    ladder
}

/// Unperturbed arc against `x^R`: sup error, convergence order, speed,
/// energy drift and boundary planes across the resolution ladder.
pub fn run_arc_accuracy(config: &RunConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let params = config.arc_params()?;
    if !matches!(config.effective_perturbation(), PerturbationSpec::None) {
        return Err(Error::Config(
            "arc accuracy runs the unperturbed arc (family = \"none\")".into(),
        ));
    }
    let spec = PerturbationSpec::None;
    let channels = with_extra(
        &[
            Channel::E,
            Channel::E1,
            Channel::E2,
            Channel::PlaneLower,
            Channel::PlaneUpper,
        ],
        &config.observers,
    );
    let mut report = ExperimentReport::new("arc_accuracy", config);
    let mut ladder = ladder_with(config);
    if !ladder.contains(&config.n_nodes) {
        ladder.push(config.n_nodes);
        ladder.sort_unstable();
    }
    let mut runs = Vec::new();
    for &n in &ladder {
        let run = simulate_arc(
            &params,
            &spec,
            n,
            &config.solver,
            &channels,
            config.experiment.sample_interval,
        )?;
        report.timings.insert(format!("N={n}"), run.elapsed);
        log::info!(
            "arc N = {n}: error {:.3e} in {:.2} s",
            run.exact_error.unwrap_or(f64::NAN),
            run.elapsed
        );
        runs.push(run);
    }
    let main = runs
        .iter()
        .find(|r| r.n_nodes == config.n_nodes)
        .expect("configured resolution is on the ladder");
    let t_final = main.trajectory.final_time();
    report.check(BoundCheck::at_most(
        format!("sup error vs x^R at N = {}", config.n_nodes),
        sources::EXACT_ARC,
        main.exact_error.unwrap_or(f64::NAN),
        ARC_ERROR_TOLERANCE,
    ));
    let speed_error = main
        .trajectory
        .final_curve
        .points
        .iter()
        .map(|p| (p.z / t_final - 1.0 / params.radius).abs())
        .fold(0.0, f64::max);
    report.check(BoundCheck::at_most(
        "max |x₃(s,T)/T − 1/R|",
        sources::EXACT_ARC,
        speed_error,
        SPEED_TOLERANCE,
    ));
    let ladder_runs: Vec<ArcRun> = runs
        .iter()
        .filter(|r| config.experiment.ladder.contains(&r.n_nodes))
        .cloned()
        .collect();
    if ladder_runs.len() >= 2 {
        let conv = Convergence::new(
            "sup error vs x^R",
            ladder_runs.iter().map(|r| r.n_nodes).collect(),
            ladder_runs.iter().map(|r| r.spacing).collect(),
            ladder_runs.iter().map(|r| r.exact_error.unwrap_or(f64::NAN)).collect(),
            0,
        );
        report.check(BoundCheck::order(sources::EXACT_ARC, &conv, ORDER_THRESHOLD));
        report.check(BoundCheck::at_least(
            "smallest pairwise order of sup error",
            sources::EXACT_ARC,
            conv.min_pairwise(),
            ORDER_THRESHOLD,
        ));
        report.orders.push(conv);
        energy_checks("arc", &ladder_runs, &mut report)?;
    }
    let slowest = runs.iter().map(|r| r.elapsed).fold(0.0, f64::max);
    report.check(BoundCheck::at_most(
        "slowest rung wall time [s]",
        sources::EXACT_ARC,
        slowest,
        RUNG_TIME_LIMIT,
    ));
    for run in &runs {
        for c in plane_checks(&format!("arc N = {}", run.n_nodes), &run.trajectory)? {
            report.check(c);
        }
        report.metric(
            format!("sup_error_N{}", run.n_nodes),
            run.exact_error.unwrap_or(f64::NAN),
        );
    }
    report.metric("speed_error", speed_error);
    let plots = vec![
        PlotData::new(
            "arc_convergence",
            &["N", "h", "sup_error"],
            vec![
                runs.iter().map(|r| r.n_nodes as f64).collect(),
                runs.iter().map(|r| r.spacing).collect(),
                runs.iter().map(|r| r.exact_error.unwrap_or(f64::NAN)).collect(),
            ],
        ),
        PlotData::from_trajectory("arc_energies", &main.trajectory, &["E", "E1", "E2"]),
    ];
    Ok(ExperimentOutput { report, plots })
}

/// Energy conservation over a corpus of perturbations and a resolution
/// ladder; every (member, rung) pair runs independently.
pub fn run_conservation(config: &RunConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let params = config.arc_params()?;
    let corpus = config.corpus();
    let ladder = ladder_with(config);
    let channels = with_extra(
        &[
            Channel::E,
            Channel::E1,
            Channel::E2,
            Channel::PlaneLower,
            Channel::PlaneUpper,
        ],
        &config.observers,
    );
    let jobs: Vec<(usize, usize)> = (0..corpus.len())
        .flat_map(|m| ladder.iter().map(move |&n| (m, n)))
        .collect();
    let runs: Vec<ArcRun> = jobs
        .par_iter()
        .map(|&(m, n)| {
            simulate_arc(
                &params,
                &corpus[m],
                n,
                &config.solver,
                &channels,
                config.experiment.sample_interval,
            )
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new("conservation", config);
    let mut plots = Vec::new();
    for (m, spec) in corpus.iter().enumerate() {
        let member: Vec<ArcRun> = runs
            .iter()
            .zip(&jobs)
            .filter(|(_, j)| j.0 == m)
            .map(|(r, _)| r.clone())
            .collect();
        let label = member_label(spec, m);
        energy_checks(&label, &member, &mut report)?;
        for run in &member {
            for c in plane_checks(&format!("{label} N = {}", run.n_nodes), &run.trajectory)? {
                report.check(c);
            }
            report.timings.insert(format!("{label} N={}", run.n_nodes), run.elapsed);
        }
        if let Some(finest) = member.last() {
            plots.push(PlotData::from_trajectory(
                format!("energies_{label}"),
                &finest.trajectory,
                &["E", "E1", "E2"],
            ));
        }
    }
    Ok(ExperimentOutput { report, plots })
}

fn member_label(spec: &PerturbationSpec, index: usize) -> String {
    fn seed(spec: &PerturbationSpec) -> Option<u64> {
        match spec {
            PerturbationSpec::SmoothRandom { seed, .. } | PerturbationSpec::ReflectiveRandom { seed, .. } => {
                Some(*seed)
            }
            PerturbationSpec::Symmetrized { inner } => seed(inner),
            _ => None,
        }
    }
    match seed(spec) {
        Some(s) => format!("{}_seed{s}", spec.family()),
        None if index == 0 => spec.family().to_string(),
        None => format!("{}_{index}", spec.family()),
    }
}

const STABILITY_CHANNELS: [Channel; 8] = [
    Channel::Phi12L2,
    Channel::PhiSH1,
    Channel::PhiSSL2,
    Channel::PhiSssH1,
    Channel::Phi3L2,
    Channel::PlaneLower,
    Channel::PlaneUpper,
    Channel::E,
];

/// Explicit-constant bounds, envelopes and plane invariance along one run.
fn stability_checks(
    label: &str,
    run: &ArcRun,
    constants_params: &ArcParams,
    report: &mut ExperimentReport,
) -> Result<()> {
    let traj = &run.trajectory;
    let k = stability_constants(constants_params)?;
    let floor = roundoff_floor(2, run.spacing);
    let h1 = channel(traj, Channel::PhiSH1)?;
    let ss = channel(traj, Channel::PhiSSL2)?;
    let ss0 = ss[0];
    report.check(
        BoundCheck::at_most(
            format!("{label}: max_t ‖φ_s‖₁"),
            sources::BASIC_ESTIMATE,
            series_max(h1),
            UPPER_HEADROOM * k.c0 * ss0 + floor,
        )
        .with_detail(format!("C₀ = {:.6}, ‖φ₀ss‖ = {ss0:.6e}", k.c0)),
    );
    if ss0 > floor {
        report.check(
            BoundCheck::at_least(
                format!("{label}: min_t ‖φ_ss‖"),
                sources::NONDECAY,
                series_min(ss),
                LOWER_HEADROOM * k.nondecay_factor * ss0,
            )
            .with_detail(format!("factor {:.6}", k.nondecay_factor)),
        );
    } else {
        report.check(BoundCheck::at_most(
            format!("{label}: max_t ‖φ_ss‖ (vanishing initial curvature)"),
            sources::NONDECAY,
            series_max(ss),
            floor,
        ));
    }
    let t = &traj.times;
    for (ch, name) in [(Channel::PhiSssH1, "‖φ_sss‖₁"), (Channel::Phi3L2, "‖φ₃‖")] {
        let y = channel(traj, ch)?;
        let (a, b) = affine_envelope(t, y).unwrap_or((f64::NAN, f64::NAN));
        report.metric(format!("{label}: {} envelope a", ch.name()), a);
        report.metric(format!("{label}: {} envelope b", ch.name()), b);
        report.check(
            BoundCheck::at_most(
                format!("{label}: affine envelope of {name} at T"),
                sources::LYAPUNOV,
                a + b * traj.final_time(),
                f64::MAX,
            )
            .with_detail(format!("a = {a:.3e}, b = {b:.3e}")),
        );
    }
    let phi3 = channel(traj, Channel::Phi3L2)?;
    let slope3 = second_half_slope(t, phi3).unwrap_or(f64::NAN);
    report.metric(format!("{label}: phi3_l2 slope"), slope3);
    if let PerturbationSpec::ConstantShift { .. } = run.spec {
        // Against x^R itself, φ₃ also carries the O(h²) lag of the discrete
        // arc speed; the shift is stationary relative to the discrete arc.
        let lag = 1.0 / constants_params.radius - discrete_arc_speed(constants_params.radius, run.spacing);
        let d3 = traj
            .channel(DISCRETE_PHI3)
            .ok_or_else(|| Error::Config(format!("channel {DISCRETE_PHI3} was not recorded")))?;
        let slope = second_half_slope(t, d3).unwrap_or(f64::NAN);
        report.metric(format!("{label}: {DISCRETE_PHI3} slope"), slope);
        report.check(
            BoundCheck::at_most(
                format!("{label}: |slope of ‖φ₃‖| relative to the discrete arc"),
                sources::CONSTANT_SHIFT,
                slope.abs(),
                SHIFT_SLOPE_TOLERANCE,
            )
            .with_detail(format!(
                "against x^R the slope is {slope3:.3e}, from the discrete speed lag {lag:.3e}"
            )),
        );
    }
    if let Some(err) = run.exact_error {
        report.check(BoundCheck::at_most(
            format!("{label}: sup error vs exact solution"),
            sources::CONSTANT_SHIFT,
            err,
            ARC_ERROR_TOLERANCE,
        ));
    }
    for c in plane_checks(label, traj)? {
        report.check(c);
    }
    report.metric(
        format!("{label}: admissibility residual"),
        run.assumptions.max_residual(),
    );
    Ok(())
}

/// Explicit-constant estimates over the perturbation corpus. For θ ≥ π the
/// perturbations must be symmetric about the mid-arc and the constants of
/// the half arc apply.
pub fn run_stability(config: &RunConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let params = config.arc_params()?;
    let corpus = config.corpus();
    let symmetric_route = params.angle >= std::f64::consts::PI;
    let constants_params = if symmetric_route {
        ArcParams::new(params.radius, params.angle / 2.0)?
    } else {
        params
    };
    let channels = with_extra(&STABILITY_CHANNELS, &config.observers);
    let runs: Vec<ArcRun> = corpus
        .par_iter()
        .map(|spec| {
            simulate_arc(
                &params,
                spec,
                config.n_nodes,
                &config.solver,
                &channels,
                config.experiment.sample_interval,
            )
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new("stability", config);
    if symmetric_route {
        report.note(format!(
            "θ = {:.6} ≥ π: constants of the half arc θ/2 apply to symmetric perturbations",
            params.angle
        ));
    }
    let mut plots = Vec::new();
    for (m, run) in runs.iter().enumerate() {
        let label = member_label(&run.spec, m);
        if symmetric_route {
            let sym = check_symmetry(&run.phi0, &params)?;
            report.check(BoundCheck::at_most(
                format!("{label}: mid-arc symmetry residual"),
                sources::SYMMETRIC_ROUTE,
                sym,
                ADMISSIBILITY_TOLERANCE,
            ));
        }
        stability_checks(&label, run, &constants_params, &mut report)?;
        report.timings.insert(label.clone(), run.elapsed);
        plots.push(PlotData::from_trajectory(
            format!("stability_{label}"),
            &run.trajectory,
            &["phi12_l2", "phi_s_h1", "phi_ss_l2", "phi_sss_h1", "phi3_l2"],
        ));
    }
    Ok(ExperimentOutput { report, plots })
}

/// Time window for a looped arc of radius `rn`, capped where rounding
/// growth in the indefinite-energy regime would reach the slope fit.
pub fn loop_window(t_final: f64, rn: f64) -> f64 {
    t_final.min(2.0 * LOOP_GROWTH_BUDGET.ln() * rn * rn)
}

/// Separation slopes of looped arcs against `2πn/(Rθ)`.
pub fn run_optimality(config: &RunConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let params = config.arc_params()?;
    let loops = config.experiment.loops.clone();
    if loops.is_empty() {
        return Err(Error::Config("optimality needs at least one loop count".into()));
    }
    let channels = with_extra(
        &[
            Channel::X3OffsetSup,
            Channel::X3OffsetSpread,
            Channel::PlaneLower,
            Channel::PlaneUpper,
        ],
        &config.observers,
    );
    let runs: Vec<(u32, f64, ArcRun)> = loops
        .par_iter()
        .map(|&n| {
            let rn = looped_radius(n, &params);
            let window = loop_window(config.solver.t_final, rn);
            let solver = SolverConfig {
                t_final: window,
                ..config.solver
            };
            let spec = PerturbationSpec::LoopedArc { n };
            simulate_arc(
                &params,
                &spec,
                config.n_nodes,
                &solver,
                &channels,
                window / SLOPE_SAMPLES,
            )
            .map(|run| (n, window, run))
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new("optimality", config);
    let mut plots = Vec::new();
    let mut measured = Vec::new();
    for (n, window, run) in &runs {
        let traj = &run.trajectory;
        let label = format!("looped n = {n}");
        let offset = channel(traj, Channel::X3OffsetSup)?;
        let slope = second_half_slope(&traj.times, offset).unwrap_or(f64::NAN);
        let target = looped_slope(*n, &params);
        let m = SlopeMeasurement::new(
            format!("{label}: sup_s |x₃ − x^R₃| slope"),
            slope,
            target,
            (window / 2.0, *window),
        );
        report.check(
            BoundCheck::at_most(
                format!("{label}: relative slope error"),
                sources::LOOPED_OPTIMALITY,
                m.rel_error,
                SLOPE_TOLERANCE,
            )
            .with_detail(format!(
                "slope {slope:.6} vs 2πn/(Rθ) = {target:.6} over t ∈ [{:.3}, {window:.3}]",
                window / 2.0
            )),
        );
        report.slopes.push(m);
        let spread = series_max(channel(traj, Channel::X3OffsetSpread)?);
        report.check(BoundCheck::at_most(
            format!("{label}: s-spread of the offset"),
            sources::LOOPED_OPTIMALITY,
            spread,
            SPREAD_TOLERANCE,
        ));
        for c in plane_checks(&label, traj)? {
            report.check(c);
        }
        if let Some(err) = run.exact_error {
            report.metric(format!("{label}: sup error vs looped solution"), err);
        }
        if *window < config.solver.t_final {
            report.note(format!(
                "{label}: window capped at t = {window:.4} (R_n = {:.4}); the looped arc spans more than π and rounding grows at about 1/(2R_n²)",
                looped_radius(*n, &params)
            ));
        }
        report.timings.insert(label.clone(), run.elapsed);
        measured.push((*n, slope));
        plots.push(PlotData::from_trajectory(
            format!("optimality_n{n}"),
            traj,
            &["x3_offset_sup", "x3_offset_spread"],
        ));
    }
    measured.sort_by_key(|(n, _)| *n);
    if measured.len() >= 2 {
        let min_gap = measured
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::INFINITY, f64::min);
        report.check(BoundCheck::at_least(
            "smallest slope increase between consecutive loop counts",
            sources::LOOPED_OPTIMALITY,
            min_gap,
            0.0,
        ));
    }
    Ok(ExperimentOutput { report, plots })
}

/// Builds a ring perturbation on a periodic grid.
pub fn build_ring(spec: &PerturbationSpec, radius: f64, grid: &Grid) -> Result<VectorField> {
    spec.validate()?;
    match spec {
        PerturbationSpec::None => Ok(VectorField::zeros(*grid)),
        PerturbationSpec::RingLooped { n } => ring_looped(*n, radius, grid),
        PerturbationSpec::ReflectiveRandom {
            k,
            seed,
            amplitude,
            margin,
        } => reflective_random(*k, *seed, *amplitude, *margin, radius, grid),
        other => Err(Error::Config(format!("{} is not a ring family", other.family()))),
    }
}

const RING_CHANNELS: [Channel; 5] = [
    Channel::X3OffsetSup,
    Channel::X3OffsetSpread,
    Channel::PhiSH1,
    Channel::PhiSSL2,
    Channel::E,
];

/// Segmentation agreement over the ring ladder, then a periodic run at the
/// configured resolution for slopes and bounds.
pub fn run_ring(config: &RunConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let radius = config.ring_radius()?;
    let spec = config.effective_perturbation();
    let k = config.experiment.segments;
    if let PerturbationSpec::ReflectiveRandom { k: spec_k, .. } = spec {
        if spec_k != k {
            return Err(Error::Config(format!(
                "reflective_random has k = {spec_k} but experiment.segments = {k}"
            )));
        }
    }
    let mut report = ExperimentReport::new("ring", config);
    let mut plots = Vec::new();
    let length = 2.0 * std::f64::consts::PI * radius;

    let mut ladder = config.experiment.ring_ladder.clone();
    ladder.sort_unstable();
    ladder.dedup();
    let mut mismatches = Vec::new();
    let mut spacings = Vec::new();
    for &n in &ladder {
        let grid = Grid::periodic(length, n)?;
        let phi = build_ring(&spec, radius, &grid)?;
        let x0 = perturbed_circle(&phi, radius)?;
        let (_, dt) = config.solver.time_steps(grid.spacing);
        let solver = SolverConfig {
            snapshot_every: ((10.0 * config.experiment.sample_interval / dt).round() as usize).max(1),
            observe_every: usize::MAX / 2,
            ..config.solver
        };
        let start = Instant::now();
        let out = segment_and_solve(&x0, k, radius, &solver, &[])?;
        let elapsed = start.elapsed().as_secs_f64();
        report.timings.insert(format!("segmentation N={n}"), elapsed);
        report.metric(format!("segmentation mismatch N={n}"), out.mismatch);
        report.metric(format!("interface gap N={n}"), out.interface_gap);
        report.metric(
            format!("literal reflection residual N={n}"),
            out.reflectivity.max_reflection_residual(),
        );
        report.metric(
            format!("segmentation residual N={n}"),
            out.reflectivity.max_segmentation_residual(),
        );
        log::info!("ring N = {n}, k = {k}: mismatch {:.3e} in {elapsed:.2} s", out.mismatch);
        mismatches.push(out.mismatch);
        spacings.push(grid.spacing);
    }
    if !ladder.is_empty() {
        let conv = Convergence::new(
            format!(
                "assembled vs periodic mismatch (k = {k}, {:?} closure)",
                config.solver.closure
            ),
            ladder.clone(),
            spacings,
            mismatches,
            0,
        );
        if ladder.len() >= 2 {
            report.check(BoundCheck::order(sources::RING_SEGMENTATION, &conv, ORDER_THRESHOLD));
        }
        report.check(BoundCheck::at_most(
            format!("mismatch at N = {}", ladder[ladder.len() - 1]),
            sources::RING_SEGMENTATION,
            conv.finest(),
            SEGMENTATION_MISMATCH_TOLERANCE,
        ));
        plots.push(PlotData::new(
            "ring_segmentation",
            &["N", "h", "mismatch"],
            vec![
                conv.nodes.iter().map(|&n| n as f64).collect(),
                conv.spacings.clone(),
                conv.values.clone(),
            ],
        ));
        report.orders.push(conv);
    }

    let grid = Grid::periodic(length, config.n_nodes)?;
    let phi = build_ring(&spec, radius, &grid)?;
    let x0 = perturbed_circle(&phi, radius)?;
    let (_, dt) = config.solver.time_steps(grid.spacing);
    let solver = SolverConfig {
        observe_every: ((config.experiment.sample_interval / dt).round() as usize).max(1),
        ..config.solver
    };
    let channels = with_extra(&RING_CHANNELS, &config.observers);
    let obs = PerturbationObserver::for_ring(radius, &channels);
    let start = Instant::now();
    let traj = simulate(&x0, &BoundaryCondition::Periodic, &solver, &[&obs])?;
    report
        .timings
        .insert(format!("periodic N={}", config.n_nodes), start.elapsed().as_secs_f64());

    let offset = channel(&traj, Channel::X3OffsetSup)?;
    let slope = second_half_slope(&traj.times, offset).unwrap_or(f64::NAN);
    let target = match spec {
        PerturbationSpec::RingLooped { n } => Some(ring_slope(n, radius)),
        PerturbationSpec::None => Some(0.0),
        _ => None,
    };
    let window = (traj.final_time() / 2.0, traj.final_time());
    match target {
        Some(target) => {
            let m = SlopeMeasurement::new("sup_s |x₃ − x^R₃| slope", slope, target, window);
            let check = if target == 0.0 {
                BoundCheck::at_most(
                    "|slope| for the unperturbed ring",
                    sources::RING_OPTIMALITY,
                    m.rel_error,
                    SPEED_TOLERANCE,
                )
                .with_detail("discrete translation speed error of the circle")
            } else {
                BoundCheck::at_most(
                    "relative slope error",
                    sources::RING_OPTIMALITY,
                    m.rel_error,
                    SLOPE_TOLERANCE,
                )
                .with_detail(format!("slope {slope:.6} vs (n − 1)/R = {target:.6}"))
            };
            report.check(check);
            report.slopes.push(m);
            let spread = series_max(channel(&traj, Channel::X3OffsetSpread)?);
            report.check(BoundCheck::at_most(
                "s-spread of the offset",
                sources::RING_OPTIMALITY,
                spread,
                SPREAD_TOLERANCE,
            ));
        }
        None => report.metric("offset slope", slope),
    }

    let reflectivity = check_k_reflective(&phi, k, radius)?;
    let segment_angle = 2.0 * std::f64::consts::PI / k as f64;
    if reflectivity.is_k_reflective(ADMISSIBILITY_TOLERANCE) && segment_angle < std::f64::consts::PI {
        let seg_params = ArcParams::new(radius, segment_angle)?;
        let kc = stability_constants(&seg_params)?;
        let floor = roundoff_floor(2, grid.spacing);
        let h1 = channel(&traj, Channel::PhiSH1)?;
        let ss = channel(&traj, Channel::PhiSSL2)?;
        report.check(BoundCheck::at_most(
            "max_t ‖φ_s‖₁",
            sources::BASIC_ESTIMATE,
            series_max(h1),
            UPPER_HEADROOM * kc.c0 * ss[0] + floor,
        ));
        if ss[0] > floor {
            report.check(BoundCheck::at_least(
                "min_t ‖φ_ss‖",
                sources::NONDECAY,
                series_min(ss),
                LOWER_HEADROOM * kc.nondecay_factor * ss[0],
            ));
        } else {
            report.check(BoundCheck::at_most(
                "max_t ‖φ_ss‖",
                sources::NONDECAY,
                series_max(ss),
                floor,
            ));
        }
    } else {
        report.note(format!(
            "ring bounds skipped: literal {k}-reflective residual {:.3e} (segmentation uses the data tangents at the breakpoints)",
            reflectivity.max_reflection_residual().max(reflectivity.max_tangent_residual())
        ));
    }
    plots.push(PlotData::from_trajectory(
        "ring_periodic",
        &traj,
        &["x3_offset_sup", "x3_offset_spread", "phi_s_h1", "phi_ss_l2"],
    ));
    Ok(ExperimentOutput { report, plots })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ArcAccuracy,
    Conservation,
    Stability,
    Optimality,
    Ring,
}

pub fn run_experiment(kind: ExperimentKind, config: &RunConfig) -> Result<ExperimentOutput> {
    match kind {
        ExperimentKind::ArcAccuracy => run_arc_accuracy(config),
        ExperimentKind::Conservation => run_conservation(config),
        ExperimentKind::Stability => run_stability(config),
        ExperimentKind::Optimality => run_optimality(config),
        ExperimentKind::Ring => run_ring(config),
    }
}
