//! Closed filaments: the k-reflective property, splitting the periodic
//! problem into k arc problems, and the looped-ring family.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    arc_point, derivative_with_accuracy, mirror, ArcParams, Curve, Grid, GridKind, Vec3, VectorField,
};
use crate::perturbations::{looped_field, symmetric_random};
use crate::solver::{simulate, BoundaryCondition, Observer, SolverConfig, Trajectory};

const TANGENT_ACCURACY: usize = 6;

/// Equal segments of a closed filament of radius `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub k: usize,
    pub radius: f64,
    /// Node index of each breakpoint `s_j`.
    pub nodes: Vec<usize>,
    pub breakpoints: Vec<f64>,
    /// `b^j = (−sin(s_j/R), cos(s_j/R), 0)`.
    pub tangents: Vec<Vec3>,
}

impl Segmentation {
    /// `k` equal segments starting at node `offset`; `k` must divide the
    /// node count so every breakpoint is a node.
    pub fn new(grid: &Grid, k: usize, radius: f64, offset: usize) -> Result<Self> {
        if grid.kind != GridKind::Periodic {
            return Err(Error::InvalidGrid("segmentation needs a periodic grid".into()));
        }
        if k < 3 {
            return Err(Error::InvalidParameter(format!("k must be ≥ 3, got {k}")));
        }
        let n = grid.n_nodes;
        if !n.is_multiple_of(k) {
            return Err(Error::InvalidGrid(format!(
                "k = {k} does not divide the node count {n}"
            )));
        }
        let expected = 2.0 * PI * radius;
        if ((grid.length - expected) / expected).abs() > 1e-12 {
            return Err(Error::LengthMismatch {
                grid: grid.length,
                expected,
            });
        }
        let step = n / k;
        let nodes: Vec<usize> = (0..k).map(|j| (offset + j * step) % n).collect();
        let breakpoints: Vec<f64> = nodes.iter().map(|&i| grid.node(i)).collect();
        let tangents = breakpoints
            .iter()
            .map(|s| Vec3::new(-(s / radius).sin(), (s / radius).cos(), 0.0))
            .collect();
        Ok(Self {
            k,
            radius,
            nodes,
            breakpoints,
            tangents,
        })
    }

    pub fn nodes_per_segment(&self, grid: &Grid) -> usize {
        grid.n_nodes / self.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectivityReport {
    pub k: usize,
    /// `|φ₀s(s_j)|` per breakpoint.
    pub tangent_residuals: Vec<f64>,
    /// Mirror-symmetry defect of `φ₀` on `I_{j−1} ∪ I_j` across the plane
    /// through the origin normal to `b^j`.
    pub reflection_residuals: Vec<f64>,
    /// Mirror-symmetry defect of the perturbed curve across the plane through
    /// `x₀(s_j)` normal to its own tangent there. This is what the
    /// segmentation actually needs.
    pub segmentation_residuals: Vec<f64>,
    /// Unit tangents of the perturbed curve at the breakpoints.
    pub data_tangents: Vec<Vec3>,
}

impl ReflectivityReport {
    fn max(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(*x))
    }

    /// Both conditions of the definition hold to `tol`.
    pub fn is_k_reflective(&self, tol: f64) -> bool {
        Self::max(&self.tangent_residuals) <= tol && Self::max(&self.reflection_residuals) <= tol
    }

    /// The curve splits into mirror-symmetric arc problems at the breakpoints.
    pub fn admits_segmentation(&self, tol: f64) -> bool {
        Self::max(&self.segmentation_residuals) <= tol
    }

    pub fn max_tangent_residual(&self) -> f64 {
        Self::max(&self.tangent_residuals)
    }

    pub fn max_reflection_residual(&self) -> f64 {
        Self::max(&self.reflection_residuals)
    }

    pub fn max_segmentation_residual(&self) -> f64 {
        Self::max(&self.segmentation_residuals)
    }
}

fn check_ring_grid(grid: &Grid, radius: f64) -> Result<()> {
    if grid.kind != GridKind::Periodic {
        return Err(Error::InvalidGrid("closed filaments need a periodic grid".into()));
    }
    let expected = 2.0 * PI * radius;
    if ((grid.length - expected) / expected).abs() > 1e-12 {
        return Err(Error::LengthMismatch {
            grid: grid.length,
            expected,
        });
    }
    Ok(())
}

/// Circle of radius `radius` with the perturbation added, at `t = 0`.
pub fn perturbed_circle(phi0: &VectorField, radius: f64) -> Result<Curve> {
    check_ring_grid(&phi0.grid, radius)?;
    let grid = phi0.grid;
    Curve::new(
        grid,
        grid.nodes()
            .zip(&phi0.vectors)
            .map(|(s, p)| arc_point(radius, s, 0.0) + p)
            .collect(),
    )
}

/// Normalised sixth-order tangent of a closed curve at every node.
fn unit_tangents(curve: &Curve) -> Result<Vec<Vec3>> {
    let d = derivative_with_accuracy(&curve.points, &curve.grid, 1, TANGENT_ACCURACY)?;
    Ok(d.into_iter().map(|v| v.normalize()).collect())
}

pub fn check_k_reflective(phi0: &VectorField, k: usize, radius: f64) -> Result<ReflectivityReport> {
    check_k_reflective_at(phi0, k, radius, 0)
}

pub fn check_k_reflective_at(phi0: &VectorField, k: usize, radius: f64, offset: usize) -> Result<ReflectivityReport> {
    let grid = phi0.grid;
    let seg = Segmentation::new(&grid, k, radius, offset)?;
    let n = grid.n_nodes;
    let m = seg.nodes_per_segment(&grid);
    let phi_s = derivative_with_accuracy(&phi0.vectors, &grid, 1, TANGENT_ACCURACY)?;
    let curve = perturbed_circle(phi0, radius)?;
    let tangents = unit_tangents(&curve)?;
    let x = &curve.points;
    let p = &phi0.vectors;
    let mut tangent_residuals = Vec::with_capacity(k);
    let mut reflection_residuals = Vec::with_capacity(k);
    let mut segmentation_residuals = Vec::with_capacity(k);
    let mut data_tangents = Vec::with_capacity(k);
    for (j, &i) in seg.nodes.iter().enumerate() {
        tangent_residuals.push(phi_s[i].norm());
        let b = seg.tangents[j];
        let t = tangents[i];
        data_tangents.push(t);
        let mut refl = 0.0f64;
        let mut segm = 0.0f64;
        for u in 1..=m {
            let fwd = (i + u) % n;
            let back = (i + n - u) % n;
            refl = refl.max((p[fwd] - mirror(&p[back], &b)).norm());
            segm = segm.max(((x[fwd] - x[i]) - mirror(&(x[back] - x[i]), &t)).norm());
        }
        reflection_residuals.push(refl);
        segmentation_residuals.push(segm);
    }
    Ok(ReflectivityReport {
        k,
        tangent_residuals,
        reflection_residuals,
        segmentation_residuals,
        data_tangents,
    })
}

/// `φₙ` for the closed filament: circle of radius `R/n` traversed `n` times.
pub fn ring_looped(n: u32, radius: f64, grid: &Grid) -> Result<VectorField> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ring_looped needs n ≥ 2, got {n}")));
    }
    check_ring_grid(grid, radius)?;
    Ok(looped_field(radius / n as f64, radius, grid))
}

/// Growth rate `1/Rₙ − 1/R = (n − 1)/R` of the axial offset.
pub fn ring_slope(n: u32, radius: f64) -> f64 {
    (n as f64 - 1.0) / radius
}

/// A k-reflective random perturbation: one mid-symmetric arc perturbation
/// of angle `2π/k`, rotated onto each segment. Needs `N/k` even so each
/// segment has a midpoint node.
pub fn reflective_random(
    k: usize,
    seed: u64,
    amplitude: f64,
    margin: f64,
    radius: f64,
    grid: &Grid,
) -> Result<VectorField> {
    let seg = Segmentation::new(grid, k, radius, 0)?;
    let m = seg.nodes_per_segment(grid);
    if m % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "nodes per segment ({m}) must be even for a midpoint node"
        )));
    }
    let params = ArcParams::new(radius, 2.0 * PI / k as f64)?;
    let local_grid = params.grid(m + 1)?;
    let local = symmetric_random(seed, amplitude, margin, &params, &local_grid)?;
    let mut out = Vec::with_capacity(grid.n_nodes);
    for j in 0..k {
        let angle = seg.breakpoints[j] / radius;
        let (c, s) = (angle.cos(), angle.sin());
        for v in &local.vectors[..m] {
            out.push(Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z));
        }
    }
    VectorField::new(*grid, out)
}

#[derive(Debug, Clone)]
pub struct SegmentedSolve {
    pub segmentation: Segmentation,
    pub reflectivity: ReflectivityReport,
    pub segments: Vec<Trajectory>,
    pub periodic: Trajectory,
    /// Assembled closed curves at the snapshot times of the periodic solve.
    pub assembled: Vec<Curve>,
    /// `max_t ‖assembled(t) − periodic(t)‖∞` over the snapshots.
    pub mismatch: f64,
    /// Largest disagreement between neighbouring segments at shared nodes.
    pub interface_gap: f64,
}

/// Tolerance on the segmentation residual before a split is attempted.
pub const SEGMENTATION_TOLERANCE: f64 = 1e-6;

/// Solves the periodic problem directly and as `k` independent arc
/// problems with the breakpoint tangents as boundary data, then compares.
pub fn segment_and_solve(
    x0: &Curve,
    k: usize,
    radius: f64,
    config: &SolverConfig,
    observers: &[&dyn Observer],
) -> Result<SegmentedSolve> {
    let grid = x0.grid;
    check_ring_grid(&grid, radius)?;
    let seg = Segmentation::new(&grid, k, radius, 0)?;
    let phi0 = VectorField::new(
        grid,
        grid.nodes()
            .zip(&x0.points)
            .map(|(s, x)| x - arc_point(radius, s, 0.0))
            .collect(),
    )?;
    let report = check_k_reflective(&phi0, k, radius)?;
    if !report.admits_segmentation(SEGMENTATION_TOLERANCE) {
        return Err(Error::NotReflective(format!(
            "segmentation residual {:.3e} > {:.1e} for k = {k}",
            report.max_segmentation_residual(),
            SEGMENTATION_TOLERANCE
        )));
    }
    let n = grid.n_nodes;
    let m = seg.nodes_per_segment(&grid);
    let seg_length = grid.length / k as f64;
    let jobs: Vec<(Curve, BoundaryCondition)> = (0..k)
        .map(|j| {
            let start = seg.nodes[j];
            let g = Grid::interval_from(seg.breakpoints[j], seg_length, m + 1)?;
            let pts: Vec<Vec3> = (0..=m).map(|u| x0.points[(start + u) % n]).collect();
            let bc = BoundaryCondition::fixed(report.data_tangents[j], report.data_tangents[(j + 1) % k])?;
            Ok((Curve::new(g, pts)?, bc))
        })
        .collect::<Result<_>>()?;

    let periodic = simulate(x0, &BoundaryCondition::Periodic, config, observers)?;
    let segments: Vec<Trajectory> = jobs
        .par_iter()
        .map(|(c, bc)| simulate(c, bc, config, &[]))
        .collect::<Result<_>>()?;

    let mut assembled = Vec::with_capacity(periodic.snapshots.len());
    let mut mismatch = 0.0f64;
    let mut interface_gap = 0.0f64;
    for (idx, snap) in periodic.snapshots.iter().enumerate() {
        let mut pts = vec![Vec3::zeros(); n];
        for (j, traj) in segments.iter().enumerate() {
            let local = &traj.snapshots[idx].curve.points;
            for (u, p) in local[..m].iter().enumerate() {
                pts[(seg.nodes[j] + u) % n] = *p;
            }
            let next = &segments[(j + 1) % k].snapshots[idx].curve.points[0];
            interface_gap = interface_gap.max((local[m] - next).norm());
        }
        let curve = Curve::new(grid, pts)?;
        mismatch = mismatch.max(curve.difference(&snap.curve)?.sup_norm());
        assembled.push(curve);
    }
    Ok(SegmentedSolve {
        segmentation: seg,
        reflectivity: report,
        segments,
        periodic,
        assembled,
        mismatch,
        interface_gap,
    })
}
