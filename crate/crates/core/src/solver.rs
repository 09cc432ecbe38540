//! Method-of-lines integration of `x_t = x_s × x_ss` with classical RK4.
//!
//! Interior nodes use the identity
//! `D₁x × D₂x = ((x_{i+1} - x_i) × (x_{i-1} - x_i)) / h³`
//! for central differences, so one cross product per node per stage.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{endpoint_slope, mirror, Curve, Grid, GridKind, Vec3, VectorField};

/// Unit-length tolerance on prescribed boundary tangents.
const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// `x_s(start) = lower`, `x_s(end) = upper`.
    FixedTangents {
        lower: Vec3,
        upper: Vec3,
    },
    Periodic,
}

impl BoundaryCondition {
    pub fn fixed(lower: Vec3, upper: Vec3) -> Result<Self> {
        for (name, v) in [("lower", lower), ("upper", upper)] {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite("boundary tangent"));
            }
            if (v.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidParameter(format!(
                    "{name} boundary tangent must be unit length, got |v| = {}",
                    v.norm()
                )));
            }
        }
        Ok(Self::FixedTangents { lower, upper })
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        match (self, grid.kind) {
            (Self::FixedTangents { .. }, GridKind::Interval) | (Self::Periodic, GridKind::Periodic) => Ok(()),
            (Self::FixedTangents { .. }, GridKind::Periodic) => {
                Err(Error::BoundaryKind("fixed tangents require an interval grid".into()))
            }
            (Self::Periodic, GridKind::Interval) => Err(Error::BoundaryKind(
                "periodic conditions require a periodic grid".into(),
            )),
        }
    }
}

/// How the ghost node beyond each fixed-tangent endpoint is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryClosure {
    /// Mirror the first interior chord across the plane normal to the
    /// boundary tangent (the discrete form of the reflection extension).
    #[default]
    Reflection,
    /// Place the ghost so the central first difference equals the tangent.
    TangentGhost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// `dt = dt_factor · h²`, rounded down so that steps land on `t_final`.
    pub dt_factor: f64,
    pub t_final: f64,
    pub renormalize_tangents: bool,
    pub closure: BoundaryClosure,
    /// Observers run every this many steps (and always at the first/last step).
    pub observe_every: usize,
    /// Snapshot stride in steps; 0 keeps only the initial and final curves.
    pub snapshot_every: usize,
    /// Allowed mismatch between the initial end tangents and the boundary data.
    pub bc_tolerance: f64,
    /// Threshold for the first-order compatibility warning.
    pub compat_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_factor: 0.25,
            t_final: 0.5,
            renormalize_tangents: false,
            closure: BoundaryClosure::Reflection,
            observe_every: 1,
            snapshot_every: 0,
            bc_tolerance: 1e-4,
            compat_tolerance: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_factor > 0.0 && self.dt_factor <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "dt_factor must lie in (0, 1], got {}",
                self.dt_factor
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.observe_every == 0 {
            return Err(Error::InvalidParameter("observe_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps and step size used for a grid spacing.
    pub fn time_steps(&self, spacing: f64) -> (usize, f64) {
        let nominal = self.dt_factor * spacing * spacing;
        let steps = (self.t_final / nominal).ceil().max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }
}

/// Named scalar channels evaluated on the evolving curve.
pub trait Observer: Sync {
    fn channels(&self) -> Vec<String>;
    /// Appends one value per channel, in the order of [`Observer::channels`].
    fn observe(&self, t: f64, curve: &Curve, out: &mut Vec<f64>);
}

/// Adapter turning a closure into a single-channel [`Observer`].
pub struct FnObserver<F> {
    name: String,
    f: F,
}

impl<F: Fn(f64, &Curve) -> f64 + Sync> FnObserver<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F: Fn(f64, &Curve) -> f64 + Sync> Observer for FnObserver<F> {
    fn channels(&self) -> Vec<String> {
        vec![self.name.clone()]
    }
    fn observe(&self, t: f64, curve: &Curve, out: &mut Vec<f64>) {
        out.push((self.f)(t, curve));
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub curve: Curve,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Observation times; every channel has one value per entry.
    pub times: Vec<f64>,
    pub channels: IndexMap<String, Vec<f64>>,
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
    pub steps: usize,
    pub final_curve: Curve,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Stencil data needed to evaluate the right-hand side.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    spacing: f64,
    inv_h3: f64,
    bc: BoundaryCondition,
    closure: BoundaryClosure,
}

impl Kernel {
    /// Ghost offsets `(x_{-1} - x_0, x_N - x_{N-1})` for fixed tangents.
    #[inline]
    fn ghosts(&self, x: &[Vec3], lower: &Vec3, upper: &Vec3) -> (Vec3, Vec3) {
        let n = x.len();
        let first = x[1] - x[0];
        let last = x[n - 2] - x[n - 1];
        match self.closure {
            BoundaryClosure::Reflection => (mirror(&first, lower), mirror(&last, upper)),
            BoundaryClosure::TangentGhost => {
                let h2 = 2.0 * self.spacing;
                (first - lower * h2, last + upper * h2)
            }
        }
    }

    fn rhs(&self, x: &[Vec3], out: &mut [Vec3]) {
        let n = x.len();
        let s = self.inv_h3;
        for i in 1..n - 1 {
            let a = x[i + 1] - x[i];
            let c = x[i - 1] - x[i];
            out[i] = a.cross(&c) * s;
        }
        match &self.bc {
            BoundaryCondition::Periodic => {
                out[0] = (x[1] - x[0]).cross(&(x[n - 1] - x[0])) * s;
                out[n - 1] = (x[0] - x[n - 1]).cross(&(x[n - 2] - x[n - 1])) * s;
            }
            BoundaryCondition::FixedTangents { lower, upper } => {
                let (ghost_lo, ghost_hi) = self.ghosts(x, lower, upper);
                out[0] = (x[1] - x[0]).cross(&ghost_lo) * s;
                out[n - 1] = ghost_hi.cross(&(x[n - 2] - x[n - 1])) * s;
            }
        }
    }
}

/// Right-hand side kernel with preallocated RK4 stages.
#[derive(Debug, Clone)]
pub struct Integrator {
    kernel: Kernel,
    k: [Vec<Vec3>; 4],
    stage: Vec<Vec3>,
}

impl Integrator {
    pub fn new(grid: Grid, bc: BoundaryCondition, closure: BoundaryClosure) -> Result<Self> {
        bc.check_grid(&grid)?;
        let n = grid.n_nodes;
        Ok(Self {
            kernel: Kernel {
                spacing: grid.spacing,
                inv_h3: grid.spacing.powi(-3),
                bc,
                closure,
            },
            k: std::array::from_fn(|_| vec![Vec3::zeros(); n]),
            stage: vec![Vec3::zeros(); n],
        })
    }

    pub fn rhs(&self, x: &[Vec3], out: &mut [Vec3]) {
        self.kernel.rhs(x, out);
    }

    /// One classical RK4 step in place.
    pub fn step(&mut self, x: &mut [Vec3], dt: f64) {
        let n = x.len();
        let kernel = self.kernel;
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        kernel.rhs(x, k1);
        for i in 0..n {
            stage[i] = x[i] + k1[i] * (0.5 * dt);
        }
        kernel.rhs(stage, k2);
        for i in 0..n {
            stage[i] = x[i] + k2[i] * (0.5 * dt);
        }
        kernel.rhs(stage, k3);
        for i in 0..n {
            stage[i] = x[i] + k3[i] * dt;
        }
        kernel.rhs(stage, k4);
        let w = dt / 6.0;
        for i in 0..n {
            x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }
    }

    /// Direction of the discrete end tangent `(x_1 - x_{-1})` compared with
    /// the boundary data. Zero on periodic grids.
    pub fn boundary_tangent_residual(&self, x: &[Vec3]) -> f64 {
        match &self.kernel.bc {
            BoundaryCondition::Periodic => 0.0,
            BoundaryCondition::FixedTangents { lower, upper } => {
                let n = x.len();
                let (glo, ghi) = self.kernel.ghosts(x, lower, upper);
                let t0 = (x[1] - x[0]) - glo;
                let t1 = ghi - (x[n - 2] - x[n - 1]);
                (t0.normalize() - lower).norm().max((t1.normalize() - upper).norm())
            }
        }
    }
}

/// Discretised `x_s × x_ss` for a curve under the given boundary condition.
pub fn lie_rhs(curve: &Curve, bc: &BoundaryCondition) -> Result<VectorField> {
    lie_rhs_with(curve, bc, BoundaryClosure::default())
}

pub fn lie_rhs_with(curve: &Curve, bc: &BoundaryCondition, closure: BoundaryClosure) -> Result<VectorField> {
    let integ = Integrator::new(curve.grid, *bc, closure)?;
    let mut out = vec![Vec3::zeros(); curve.grid.n_nodes];
    integ.rhs(&curve.points, &mut out);
    VectorField::new(curve.grid, out)
}

/// Advances a curve by one RK4 step of size `dt`.
pub fn step(curve: &Curve, bc: &BoundaryCondition, dt: f64, config: &SolverConfig) -> Result<Curve> {
    let mut integ = Integrator::new(curve.grid, *bc, config.closure)?;
    let mut x = curve.points.clone();
    integ.step(&mut x, dt);
    if config.renormalize_tangents {
        renormalize_chords(&mut x, &curve.grid);
    }
    if !all_finite(&x) {
        return Err(Error::BlowUp { step: 1, time: dt });
    }
    Curve::new(curve.grid, x)
}

fn all_finite(x: &[Vec3]) -> bool {
    x.iter().all(|p| p.x.is_finite() && p.y.is_finite() && p.z.is_finite())
}

/// Rescales every chord to length `h`, re-accumulating from node 0. On a
/// closed loop the closure gap is spread linearly along the nodes.
pub fn renormalize_chords(x: &mut [Vec3], grid: &Grid) {
    let n = x.len();
    let h = grid.spacing;
    match grid.kind {
        GridKind::Interval => {
            let mut prev_old = x[0];
            for i in 1..n {
                let old = x[i];
                let chord = old - prev_old;
                let len = chord.norm();
                x[i] = x[i - 1] + if len > 0.0 { chord * (h / len) } else { chord };
                prev_old = old;
            }
        }
        GridKind::Periodic => {
            let old = x.to_vec();
            for i in 1..n {
                let chord = old[i] - old[i - 1];
                let len = chord.norm();
                x[i] = x[i - 1] + if len > 0.0 { chord * (h / len) } else { chord };
            }
            let closing = old[0] - old[n - 1];
            let len = closing.norm();
            let end = x[n - 1] + if len > 0.0 { closing * (h / len) } else { closing };
            let gap = end - x[0];
            for (i, p) in x.iter_mut().enumerate() {
                *p -= gap * (i as f64 / n as f64);
            }
        }
    }
}

/// Speed at which the scheme moves an exactly sampled arc of radius `r` with
/// node spacing `h`. Every node sees the same chords `a`, `c` meeting at
/// angle `π − h/r`, so the discrete arc translates rigidly at
/// `|a × c|/h³ = 4r² sin²(α/2) sin α / h³`, `α = h/r`, which is
/// `(1 − α²/4 + O(α⁴))/r`.
pub fn discrete_arc_speed(r: f64, h: f64) -> f64 {
    let alpha = h / r;
    4.0 * r * r * (alpha / 2.0).sin().powi(2) * alpha.sin() / h.powi(3)
}

/// Largest `| |chord|/h - 1 |` over the curve: the discrete arclength defect.
pub fn arclength_residual(curve: &Curve) -> f64 {
    let x = &curve.points;
    let h = curve.grid.spacing;
    let n = x.len();
    let mut worst = 0.0f64;
    for i in 0..n - 1 {
        worst = worst.max(((x[i + 1] - x[i]).norm() / h - 1.0).abs());
    }
    if curve.grid.is_periodic() {
        worst = worst.max(((x[0] - x[n - 1]).norm() / h - 1.0).abs());
    }
    worst
}

/// Direction mismatch between the initial end tangents (high-order one-sided
/// estimate) and the boundary data.
pub fn initial_tangent_residuals(curve: &Curve, bc: &BoundaryCondition) -> (f64, f64) {
    match bc {
        BoundaryCondition::Periodic => (0.0, 0.0),
        BoundaryCondition::FixedTangents { lower, upper } => {
            let h = curve.grid.spacing;
            let t0 = endpoint_slope(&curve.points, h, true, Vec3::zeros());
            let t1 = endpoint_slope(&curve.points, h, false, Vec3::zeros());
            ((t0.normalize() - lower).norm(), (t1.normalize() - upper).norm())
        }
    }
}

/// `|x_s × x_sss|` at both ends (first-order compatibility).
pub fn compatibility_residuals(curve: &Curve) -> Result<(f64, f64)> {
    let d1 = curve.derivative(1)?;
    let d3 = curve.derivative(3)?;
    let n = curve.grid.n_nodes;
    Ok((
        d1.vectors[0].cross(&d3.vectors[0]).norm(),
        d1.vectors[n - 1].cross(&d3.vectors[n - 1]).norm(),
    ))
}

/// Integrates from `initial` to `config.t_final`, evaluating the observers on
/// the configured stride and collecting snapshots.
pub fn simulate(
    initial: &Curve,
    bc: &BoundaryCondition,
    config: &SolverConfig,
    observers: &[&dyn Observer],
) -> Result<Trajectory> {
    config.validate()?;
    let grid = initial.grid;
    let mut integ = Integrator::new(grid, *bc, config.closure)?;
    let mut warnings = Vec::new();

    if let BoundaryCondition::FixedTangents { .. } = bc {
        let (r0, r1) = initial_tangent_residuals(initial, bc);
        for (end, r) in [("lower", r0), ("upper", r1)] {
            if r.is_nan() || r > config.bc_tolerance {
                return Err(Error::BoundaryMismatch {
                    end,
                    residual: r,
                    tolerance: config.bc_tolerance,
                });
            }
        }
        let (c0, c1) = compatibility_residuals(initial)?;
        if c0.max(c1) > config.compat_tolerance {
            let msg = format!(
                "first-order compatibility residuals {c0:.3e} / {c1:.3e} exceed {:.1e}",
                config.compat_tolerance
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let (steps, dt) = config.time_steps(grid.spacing);
    let mut names: Vec<String> = observers.iter().flat_map(|o| o.channels()).collect();
    names.push("boundary_tangent".into());
    names.push("arclength".into());
    let n_channels = names.len();
    let mut channels: IndexMap<String, Vec<f64>> = IndexMap::with_capacity(n_channels);
    for name in names {
        if channels.insert(name.clone(), Vec::new()).is_some() {
            return Err(Error::Config(format!("duplicate observer channel {name:?}")));
        }
    }
    let mut times = Vec::new();
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        curve: initial.clone(),
    }];

    let mut x = initial.points.clone();
    let mut row = Vec::with_capacity(n_channels);
    let mut record = |t: f64, x: &[Vec3], integ: &Integrator, times: &mut Vec<f64>| -> Result<()> {
        let curve = Curve::new(grid, x.to_vec())?;
        row.clear();
        for obs in observers {
            obs.observe(t, &curve, &mut row);
        }
        row.push(integ.boundary_tangent_residual(x));
        row.push(arclength_residual(&curve));
        if row.len() != n_channels {
            return Err(Error::Config(format!(
                "observers produced {} values for {} channels",
                row.len(),
                n_channels
            )));
        }
        times.push(t);
        for (slot, v) in channels.values_mut().zip(&row) {
            slot.push(*v);
        }
        Ok(())
    };
    record(0.0, &x, &integ, &mut times)?;

    for k in 1..=steps {
        integ.step(&mut x, dt);
        if config.renormalize_tangents {
            renormalize_chords(&mut x, &grid);
        }
        let t = k as f64 * dt;
        if !all_finite(&x) {
            return Err(Error::BlowUp { step: k, time: t });
        }
        if k % config.observe_every == 0 || k == steps {
            record(t, &x, &integ, &mut times)?;
        }
        if config.snapshot_every > 0 && k % config.snapshot_every == 0 && k != steps {
            snapshots.push(Snapshot {
                t,
                curve: Curve::new(grid, x.clone())?,
            });
        }
    }
    let final_curve = Curve::new(grid, x)?;
    snapshots.push(Snapshot {
        t: steps as f64 * dt,
        curve: final_curve.clone(),
    });
    Ok(Trajectory {
        times,
        channels,
        snapshots,
        dt,
        steps,
        final_curve,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{reflect_t, sample_arc_on, ArcParams, Filament, E2, E3};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn quarter_arc(n: usize) -> (ArcParams, Curve, BoundaryCondition) {
        let p = ArcParams::new(1.0, FRAC_PI_2).unwrap();
        let grid = p.grid(n).unwrap();
        let c = sample_arc_on(1.0, 0.0, &grid).unwrap();
        let bc = BoundaryCondition::fixed(p.lower_tangent(), p.upper_tangent()).unwrap();
        (p, c, bc)
    }

    #[test]
    fn rejects_non_unit_tangent() {
        assert!(BoundaryCondition::fixed(E2 * 1.01, E2).is_err());
    }

    #[test]
    fn rejects_mismatched_grid_kind() {
        let grid = Grid::periodic(1.0, 16).unwrap();
        let c = Curve::from_fn(grid, |s| Vec3::new(s, 0.0, 0.0)).unwrap();
        assert!(lie_rhs(&c, &BoundaryCondition::fixed(E2, E2).unwrap()).is_err());
    }

    #[test]
    fn arc_rhs_is_binormal_over_radius() {
        for closure in [BoundaryClosure::Reflection, BoundaryClosure::TangentGhost] {
            let (_, c, bc) = quarter_arc(512);
            let f = lie_rhs_with(&c, &bc, closure).unwrap();
            let h = c.grid.spacing;
            let worst = f.vectors.iter().map(|v| (v - E3).norm()).fold(0.0, f64::max);
            assert!(worst < h * h, "{closure:?}: {worst}");
        }
    }

    #[test]
    fn reflection_rhs_matches_discrete_arc_speed() {
        let (_, c, bc) = quarter_arc(97);
        let v = discrete_arc_speed(1.0, c.grid.spacing);
        let f = lie_rhs_with(&c, &bc, BoundaryClosure::Reflection).unwrap();
        for w in &f.vectors {
            assert!((w - E3 * v).norm() < 1e-12, "{w:?} vs {v}");
        }
        let alpha = c.grid.spacing;
        assert!((v - (1.0 - alpha * alpha / 4.0)).abs() < alpha.powi(4));
    }

    #[test]
    fn circle_rhs_periodic() {
        let r = 2.0;
        let grid = Grid::periodic(2.0 * PI * r, 256).unwrap();
        let c = Curve::from_fn(grid, |s| Vec3::new(r * (s / r).cos(), r * (s / r).sin(), 0.0)).unwrap();
        let f = lie_rhs(&c, &BoundaryCondition::Periodic).unwrap();
        let h = grid.spacing;
        for v in &f.vectors {
            assert!((v - Vec3::new(0.0, 0.0, 0.5)).norm() < h * h);
        }
    }

    #[test]
    fn straight_segment_is_stationary() {
        let grid = Grid::interval(1.0, 33).unwrap();
        let c = Curve::from_fn(grid, |s| E2 * s).unwrap();
        let bc = BoundaryCondition::fixed(E2, E2).unwrap();
        let f = lie_rhs(&c, &bc).unwrap();
        assert!(f.vectors.iter().all(|v| *v == Vec3::zeros()));
        let next = step(&c, &bc, 1e-4, &SolverConfig::default()).unwrap();
        assert_eq!(next.points, c.points);
    }

    #[test]
    fn one_step_tracks_exact_arc() {
        let (_, c, bc) = quarter_arc(256);
        let cfg = SolverConfig::default();
        let dt = cfg.dt_factor * c.grid.spacing.powi(2);
        let next = step(&c, &bc, dt, &cfg).unwrap();
        let exact = sample_arc_on(1.0, dt, &c.grid).unwrap();
        let err = next.difference(&exact).unwrap().sup_norm();
        let h = c.grid.spacing;
        assert!(err <= 10.0 * dt * dt + h * h * dt, "{err}");
    }

    #[test]
    fn translation_commutes_with_step() {
        let (_, c, bc) = quarter_arc(128);
        let cfg = SolverConfig::default();
        let shift = Vec3::new(0.0, 0.0, 0.125);
        let a = step(&c.translated(shift), &bc, 1e-4, &cfg).unwrap();
        let b = step(&c, &bc, 1e-4, &cfg).unwrap().translated(shift);
        assert!(a.difference(&b).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn arc_run_matches_exact_solution() {
        let (p, c, bc) = quarter_arc(256);
        let cfg = SolverConfig {
            t_final: 0.5,
            observe_every: 1000,
            ..Default::default()
        };
        let traj = simulate(&c, &bc, &cfg, &[]).unwrap();
        let exact = sample_exact(&Filament::Arc(p), 0.5, &c.grid).unwrap();
        let err = traj.final_curve.difference(&exact).unwrap().sup_norm();
        assert!(err <= 1e-3, "{err}");
        let btan = traj.channel("boundary_tangent").unwrap();
        assert!(btan.iter().all(|r| *r <= 1e-8));
        assert_eq!(traj.times.len(), btan.len());
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    use crate::geometry::sample_exact;

    #[test]
    fn boundary_plane_coordinate_is_frozen() {
        // The boundary rhs is orthogonal to the tangent there, so e₂·x(0) cannot move.
        let (_, c, bc) = quarter_arc(64);
        let bumped = Curve::from_fn(c.grid, |s| {
            let w = (PI * s / c.grid.length).sin().powi(4);
            crate::geometry::exact_arc_point(1.0, s, 0.0).unwrap() + Vec3::new(0.0, 0.0, 0.01 * w)
        })
        .unwrap();
        let cfg = SolverConfig {
            t_final: 0.01,
            bc_tolerance: 1e-2,
            compat_tolerance: f64::INFINITY,
            ..Default::default()
        };
        let traj = simulate(&bumped, &bc, &cfg, &[]).unwrap();
        let start = bumped.points[0].dot(&E2);
        assert!((traj.final_curve.points[0].dot(&E2) - start).abs() < 1e-14);
    }

    #[test]
    fn mismatched_initial_tangent_is_rejected() {
        let (_, c, _) = quarter_arc(64);
        let bc = BoundaryCondition::fixed(E2, E2).unwrap();
        let err = simulate(&c, &bc, &SolverConfig::default(), &[]).unwrap_err();
        assert!(matches!(err, Error::BoundaryMismatch { end: "upper", .. }));
    }

    #[test]
    fn t_symmetry_is_preserved() {
        let p = ArcParams::new(1.0, FRAC_PI_2).unwrap();
        let half = p.length();
        let grid = Grid::symmetric(half, 129).unwrap();
        // Arc rotated so its midpoint sits at s = 0: symmetric about the x₁x₃-plane.
        let c = Curve::from_fn(grid, |s| Vec3::new(s.cos() - 1.0, s.sin(), 0.0)).unwrap();
        let lower = Vec3::new(-(-half).sin(), (-half).cos(), 0.0);
        let upper = Vec3::new(-half.sin(), half.cos(), 0.0);
        let bc = BoundaryCondition::fixed(lower, upper).unwrap();
        let cfg = SolverConfig {
            t_final: 0.05,
            snapshot_every: 50,
            observe_every: 50,
            ..Default::default()
        };
        let traj = simulate(&c, &bc, &cfg, &[]).unwrap();
        for snap in &traj.snapshots {
            let f = snap.curve.as_field();
            let t = reflect_t(&f).unwrap();
            assert!(t.max_abs_diff(&f) <= 1e-8);
        }
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let (_, c, bc) = quarter_arc(32);
        let cfg = SolverConfig {
            dt_factor: 1.0,
            t_final: 200.0,
            observe_every: 100_000,
            ..Default::default()
        };
        let bumped = Curve::from_fn(c.grid, |s| {
            crate::geometry::exact_arc_point(1.0, s, 0.0).unwrap()
                + Vec3::new(0.0, 0.0, 1e-3 * (PI * s / c.grid.length).sin().powi(4))
        })
        .unwrap();
        let cfg = SolverConfig {
            bc_tolerance: 1.0,
            compat_tolerance: f64::INFINITY,
            ..cfg
        };
        match simulate(&bumped, &bc, &cfg, &[]) {
            Err(Error::BlowUp { step, .. }) => assert!(step > 0),
            other => panic!("expected blow-up, got {:?}", other.map(|t| t.steps)),
        }
    }

    #[test]
    fn renormalization_restores_chords() {
        let grid = Grid::interval(1.0, 17).unwrap();
        let mut x: Vec<Vec3> = grid.nodes().map(|s| Vec3::new(1.3 * s, 0.2 * s * s, 0.0)).collect();
        let x0 = x[0];
        renormalize_chords(&mut x, &grid);
        assert_eq!(x[0], x0);
        let c = Curve::new(grid, x).unwrap();
        assert!(arclength_residual(&c) < 1e-14);

        let pg = Grid::periodic(2.0 * PI, 64).unwrap();
        let mut y: Vec<Vec3> = pg.nodes().map(|s| Vec3::new(1.1 * s.cos(), s.sin(), 0.0)).collect();
        renormalize_chords(&mut y, &pg);
        let c = Curve::new(pg, y).unwrap();
        assert!(arclength_residual(&c) < 0.05);
    }

    #[test]
    fn time_steps_land_on_final_time() {
        let cfg = SolverConfig {
            t_final: 0.3,
            ..Default::default()
        };
        let (n, dt) = cfg.time_steps(0.01);
        assert!(dt <= 0.25 * 1e-4 * (1.0 + 1e-12));
        assert!((n as f64 * dt - 0.3).abs() < 1e-12);
    }
}
