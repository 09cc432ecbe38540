//! Grids, sampled curves, exact arc/circle solutions and the finite-difference
//! and reflection machinery shared by every other module.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

pub const E1: Vec3 = Vector3::new(1.0, 0.0, 0.0);
pub const E2: Vec3 = Vector3::new(0.0, 1.0, 0.0);
pub const E3: Vec3 = Vector3::new(0.0, 0.0, 1.0);

/// Relative tolerance used when comparing grid lengths to `θR` or `2πR`.
const LENGTH_RTOL: f64 = 1e-12;

/// Smoothness threshold for the reflected join at `s = 0`.
pub const JOIN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Interval,
    Periodic,
}

/// Uniform arc-length sampling of an interval or a closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub kind: GridKind,
    /// Arc-length coordinate of node 0.
    pub origin: f64,
    pub length: f64,
    pub n_nodes: usize,
    pub spacing: f64,
}

impl Grid {
    pub const MIN_NODES: usize = 8;

    pub fn interval(length: f64, n_nodes: usize) -> Result<Self> {
        Self::interval_from(0.0, length, n_nodes)
    }

    pub fn interval_from(origin: f64, length: f64, n_nodes: usize) -> Result<Self> {
        Self::validate(length, n_nodes)?;
        if !origin.is_finite() {
            return Err(Error::NonFinite("grid origin"));
        }
        Ok(Self {
            kind: GridKind::Interval,
            origin,
            length,
            n_nodes,
            spacing: length / (n_nodes - 1) as f64,
        })
    }

    /// Interval `(-half_length, half_length)` with a node exactly at `s = 0`.
    pub fn symmetric(half_length: f64, n_nodes: usize) -> Result<Self> {
        if n_nodes.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "symmetric grid needs an odd node count, got {n_nodes}"
            )));
        }
        Self::interval_from(-half_length, 2.0 * half_length, n_nodes)
    }

    pub fn periodic(length: f64, n_nodes: usize) -> Result<Self> {
        Self::validate(length, n_nodes)?;
        Ok(Self {
            kind: GridKind::Periodic,
            origin: 0.0,
            length,
            n_nodes,
            spacing: length / n_nodes as f64,
        })
    }

    fn validate(length: f64, n_nodes: usize) -> Result<()> {
        if !length.is_finite() {
            return Err(Error::NonFinite("grid length"));
        }
        if length <= 0.0 {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n_nodes < Self::MIN_NODES {
            return Err(Error::GridTooSmall {
                needed: Self::MIN_NODES,
                got: n_nodes,
            });
        }
        Ok(())
    }

    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes).map(move |i| self.node(i))
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == GridKind::Periodic
    }

    /// True for interval grids centred on `s = 0` with a node there.
    pub fn is_symmetric(&self) -> bool {
        self.kind == GridKind::Interval
            && self.n_nodes % 2 == 1
            && (self.origin + 0.5 * self.length).abs() <= 1e-12 * self.length.max(1.0)
    }

    /// Index of the midpoint node of an interval grid, if one exists.
    pub fn midpoint_index(&self) -> Option<usize> {
        (self.kind == GridKind::Interval && self.n_nodes % 2 == 1).then_some(self.n_nodes / 2)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.kind == other.kind
            && self.n_nodes == other.n_nodes
            && (self.length - other.length).abs() <= LENGTH_RTOL * self.length
            && (self.origin - other.origin).abs() <= LENGTH_RTOL * self.length.max(1.0)
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// A filament state: positions sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub grid: Grid,
    pub points: Vec<Vec3>,
}

impl Curve {
    pub fn new(grid: Grid, points: Vec<Vec3>) -> Result<Self> {
        if points.len() != grid.n_nodes {
            return Err(Error::GridMismatch(format!(
                "{} points for a grid of {} nodes",
                points.len(),
                grid.n_nodes
            )));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("curve point"));
        }
        Ok(Self { grid, points })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Vec3) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn translated(&self, c: Vec3) -> Self {
        Self {
            grid: self.grid,
            points: self.points.iter().map(|p| p + c).collect(),
        }
    }

    /// Curve displaced by a perturbation field on the same grid.
    pub fn perturbed(&self, phi: &VectorField) -> Result<Self> {
        self.grid.ensure_same(&phi.grid)?;
        Curve::new(
            self.grid,
            self.points.iter().zip(&phi.vectors).map(|(p, v)| p + v).collect(),
        )
    }

    /// Nodewise difference `self - other` as a field.
    pub fn difference(&self, other: &Curve) -> Result<VectorField> {
        self.grid.ensure_same(&other.grid)?;
        Ok(VectorField {
            grid: self.grid,
            vectors: self.points.iter().zip(&other.points).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn as_field(&self) -> VectorField {
        VectorField {
            grid: self.grid,
            vectors: self.points.clone(),
        }
    }

    pub fn derivative(&self, order: usize) -> Result<VectorField> {
        Ok(VectorField {
            grid: self.grid,
            vectors: derivative(&self.points, &self.grid, order)?,
        })
    }
}

/// Sampled 3-vectors on a grid: tangents, derivatives, perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub vectors: Vec<Vec3>,
}

impl VectorField {
    pub fn new(grid: Grid, vectors: Vec<Vec3>) -> Result<Self> {
        if vectors.len() != grid.n_nodes {
            return Err(Error::GridMismatch(format!(
                "{} vectors for a grid of {} nodes",
                vectors.len(),
                grid.n_nodes
            )));
        }
        Ok(Self { grid, vectors })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            vectors: vec![Vec3::zeros(); grid.n_nodes],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Vec3) -> Self {
        Self {
            grid,
            vectors: grid.nodes().map(f).collect(),
        }
    }

    pub fn constant(grid: Grid, c: Vec3) -> Self {
        Self {
            grid,
            vectors: vec![c; grid.n_nodes],
        }
    }

    pub fn derivative(&self, order: usize) -> Result<VectorField> {
        Ok(VectorField {
            grid: self.grid,
            vectors: derivative(&self.vectors, &self.grid, order)?,
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            vectors: self.vectors.iter().map(|v| v * a).collect(),
        }
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v[k]).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

/// Radius and opening angle of an arc spanned between two half-planes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcParams {
    pub radius: f64,
    pub angle: f64,
}

impl ArcParams {
    pub fn new(radius: f64, angle: f64) -> Result<Self> {
        if !radius.is_finite() || !angle.is_finite() {
            return Err(Error::NonFinite("arc parameters"));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if angle <= 0.0 || angle >= 2.0 * PI {
            return Err(Error::InvalidParameter(format!(
                "angle must lie in (0, 2π), got {angle}"
            )));
        }
        Ok(Self { radius, angle })
    }

    pub fn length(&self) -> f64 {
        self.angle * self.radius
    }

    /// Tangent of the reference arc at `s = L`: `(-sin θ, cos θ, 0)`.
    pub fn upper_tangent(&self) -> Vec3 {
        Vec3::new(-self.angle.sin(), self.angle.cos(), 0.0)
    }

    /// Tangent of the reference arc at `s = 0`.
    pub fn lower_tangent(&self) -> Vec3 {
        E2
    }

    pub fn grid(&self, n_nodes: usize) -> Result<Grid> {
        Grid::interval(self.length(), n_nodes)
    }
}

/// Reference filament: an arc between two planes or a closed circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Filament {
    Arc(ArcParams),
    Ring { radius: f64 },
}

impl Filament {
    pub fn radius(&self) -> f64 {
        match self {
            Filament::Arc(p) => p.radius,
            Filament::Ring { radius } => *radius,
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Filament::Arc(p) => p.length(),
            Filament::Ring { radius } => 2.0 * PI * radius,
        }
    }

    pub fn grid(&self, n_nodes: usize) -> Result<Grid> {
        match self {
            Filament::Arc(p) => p.grid(n_nodes),
            Filament::Ring { radius } => Grid::periodic(2.0 * PI * radius, n_nodes),
        }
    }
}

/// `(R cos(s/R), R sin(s/R), t/R)`: the arc or circle translating along ξ₃.
pub fn exact_arc_point(radius: f64, s: f64, t: f64) -> Result<Vec3> {
    if !radius.is_finite() || !s.is_finite() || !t.is_finite() {
        return Err(Error::NonFinite("exact_arc_point input"));
    }
    if radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Ok(arc_point(radius, s, t))
}

#[inline]
pub(crate) fn arc_point(radius: f64, s: f64, t: f64) -> Vec3 {
    let a = s / radius;
    Vec3::new(radius * a.cos(), radius * a.sin(), t / radius)
}

#[inline]
pub(crate) fn arc_tangent(radius: f64, s: f64) -> Vec3 {
    let a = s / radius;
    Vec3::new(-a.sin(), a.cos(), 0.0)
}

/// Samples the exact solution at time `t`; the grid must span the whole arc
/// (`θR`) or the whole circle (`2πR`).
pub fn sample_exact(filament: &Filament, t: f64, grid: &Grid) -> Result<Curve> {
    let expected = filament.length();
    let kind_ok = match filament {
        Filament::Arc(_) => grid.kind == GridKind::Interval,
        Filament::Ring { .. } => grid.kind == GridKind::Periodic,
    };
    if !kind_ok || (grid.length - expected).abs() > LENGTH_RTOL * expected || grid.origin != 0.0 {
        return Err(Error::LengthMismatch {
            grid: grid.length,
            expected,
        });
    }
    sample_arc_on(filament.radius(), t, grid)
}

/// Samples `x^R(s, t)` at every node of an arbitrary grid (e.g. an extended,
/// symmetric interval or a single ring segment).
pub fn sample_arc_on(radius: f64, t: f64, grid: &Grid) -> Result<Curve> {
    if !t.is_finite() {
        return Err(Error::NonFinite("time"));
    }
    if radius <= 0.0 || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Curve::new(*grid, grid.nodes().map(|s| arc_point(radius, s, t)).collect())
}

/// Exact unit tangent of the reference arc at every node.
pub fn arc_tangent_field(radius: f64, grid: &Grid) -> VectorField {
    VectorField::from_fn(*grid, |s| arc_tangent(radius, s))
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Fornberg's recursion: weights for the `m`-th derivative at `z` using the
/// nodes `x`. Returns `w[j]` for node `j`.
pub(crate) fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

#[derive(Debug, Clone)]
struct Stencil {
    offsets: Vec<isize>,
    weights: Vec<f64>,
}

impl Stencil {
    fn new(offsets: Vec<isize>, eval_at: f64, order: usize, h: f64) -> Self {
        let x: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
        let scale = h.powi(order as i32);
        let weights = fornberg_weights(eval_at, &x, order)
            .into_iter()
            .map(|w| w / scale)
            .collect();
        Self { offsets, weights }
    }
}

/// Half-width of the central stencil for a derivative order and (even) accuracy.
fn central_half_width(order: usize, accuracy: usize) -> usize {
    order.div_ceil(2) - 1 + accuracy / 2
}

/// One-sided stencil at node `i` of an interval grid, covering the
/// `order + accuracy` nodes nearest the boundary.
fn one_sided(i: usize, n: usize, order: usize, accuracy: usize, h: f64) -> Stencil {
    let width = order + accuracy;
    let start = if i < n / 2 { 0 } else { n - width };
    let offsets: Vec<isize> = (start..start + width).map(|j| j as isize - i as isize).collect();
    Stencil::new(offsets, 0.0, order, h)
}

/// Second-order finite-difference derivative of sampled values.
///
/// Interior nodes use central stencils; interval endpoints switch to
/// one-sided stencils of the same order; periodic grids wrap around.
pub fn derivative(values: &[Vec3], grid: &Grid, order: usize) -> Result<Vec<Vec3>> {
    derivative_generic(values, grid, order, 2, Vec3::zeros())
}

/// Scalar counterpart of [`derivative`].
pub fn derivative_scalar(values: &[f64], grid: &Grid, order: usize) -> Result<Vec<f64>> {
    derivative_generic(values, grid, order, 2, 0.0)
}

/// [`derivative`] with a chosen even accuracy order (2, 4 or 6).
pub fn derivative_with_accuracy(values: &[Vec3], grid: &Grid, order: usize, accuracy: usize) -> Result<Vec<Vec3>> {
    derivative_generic(values, grid, order, accuracy, Vec3::zeros())
}

fn derivative_generic<T>(values: &[T], grid: &Grid, order: usize, accuracy: usize, zero: T) -> Result<Vec<T>>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::AddAssign,
{
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    if !matches!(accuracy, 2 | 4 | 6) {
        return Err(Error::InvalidParameter(format!(
            "stencil accuracy must be 2, 4 or 6, got {accuracy}"
        )));
    }
    let n = grid.n_nodes;
    if values.len() != n {
        return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), n)));
    }
    let p = central_half_width(order, accuracy);
    let needed = (order + accuracy).max(2 * p + 1) + 2;
    if n < needed {
        return Err(Error::GridTooSmall { needed, got: n });
    }
    let h = grid.spacing;
    let central = Stencil::new((-(p as isize)..=p as isize).collect(), 0.0, order, h);
    let apply = |i: usize, st: &Stencil| -> T {
        // Differencing against the centre value keeps large offsets from
        // polluting the result (the weights sum to zero).
        let centre = values[i];
        let mut acc = zero;
        for (&o, &w) in st.offsets.iter().zip(&st.weights) {
            let j = match grid.kind {
                GridKind::Periodic => (i as isize + o).rem_euclid(n as isize) as usize,
                GridKind::Interval => (i as isize + o) as usize,
            };
            if w != 0.0 {
                acc += (values[j] - centre) * w;
            }
        }
        acc
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let interior = grid.kind == GridKind::Periodic || (i >= p && i + p < n);
        if interior {
            out.push(apply(i, &central));
        } else {
            out.push(apply(i, &one_sided(i, n, order, accuracy, h)));
        }
    }
    Ok(out)
}

/// High-order one-sided first derivative at an interval endpoint (node 0 when
/// `at_start`, otherwise the last node). Used for diagnostics only.
pub(crate) fn endpoint_slope<T>(values: &[T], h: f64, at_start: bool, zero: T) -> T
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::AddAssign,
{
    const WIDTH: usize = 6;
    let n = values.len();
    let (offsets, base): (Vec<isize>, usize) = if at_start {
        ((0..WIDTH as isize).collect(), 0)
    } else {
        ((-(WIDTH as isize - 1)..=0).collect(), n - 1)
    };
    let st = Stencil::new(offsets, 0.0, 1, h);
    let mut acc = zero;
    for (&o, &w) in st.offsets.iter().zip(&st.weights) {
        acc += (values[(base as isize + o) as usize] - values[base]) * w;
    }
    acc
}

// ---------------------------------------------------------------------------
// Reflections and rotations
// ---------------------------------------------------------------------------

/// Reflection of `v` across the plane through the origin with unit normal `n`.
#[inline]
pub fn mirror(v: &Vec3, n: &Vec3) -> Vec3 {
    v - n * (2.0 * n.dot(v))
}

/// `(Ty)(s) = (y₁(-s), -y₂(-s), y₃(-s))` on a symmetric interval grid.
pub fn reflect_t(field: &VectorField) -> Result<VectorField> {
    if !field.grid.is_symmetric() {
        return Err(Error::AsymmetricGrid);
    }
    let n = field.grid.n_nodes;
    let vectors = (0..n)
        .map(|i| {
            let y = field.vectors[n - 1 - i];
            Vec3::new(y.x, -y.y, y.z)
        })
        .collect();
    Ok(VectorField {
        grid: field.grid,
        vectors,
    })
}

/// Curve reflected across the plane ξ₂ = 0 onto `(-L, L)`.
#[derive(Debug, Clone)]
pub struct Extension {
    pub curve: Curve,
    /// Largest violation of the smooth-join conditions at `s = 0`:
    /// `|x₂(0)|`, `|x₁'(0)|`, `|x₃'(0)|`.
    pub join_residual: f64,
}

impl Extension {
    pub fn is_smooth(&self, tol: f64) -> bool {
        self.join_residual <= tol
    }
}

pub fn extend_by_reflection(curve: &Curve) -> Result<Extension> {
    let g = curve.grid;
    if g.kind != GridKind::Interval || g.origin != 0.0 {
        return Err(Error::InvalidGrid(
            "reflection extension needs an interval grid starting at s = 0".into(),
        ));
    }
    let n = g.n_nodes;
    let ext_grid = Grid::symmetric(g.length, 2 * n - 1)?;
    let mut points = Vec::with_capacity(2 * n - 1);
    for i in (1..n).rev() {
        let p = curve.points[i];
        points.push(Vec3::new(p.x, -p.y, p.z));
    }
    points.extend_from_slice(&curve.points);
    let c = points[n - 1];
    let x1: Vec<f64> = curve.points.iter().map(|p| p.x).collect();
    let x3: Vec<f64> = curve.points.iter().map(|p| p.z).collect();
    let slope1 = endpoint_slope(&x1, g.spacing, true, 0.0).abs();
    let slope3 = endpoint_slope(&x3, g.spacing, true, 0.0).abs();
    let join_residual = c.y.abs().max(slope1).max(slope3);
    if join_residual > JOIN_TOLERANCE {
        log::warn!("reflected join at s = 0 is not smooth: residual {join_residual:.3e}");
    }
    Ok(Extension {
        curve: Curve::new(ext_grid, points)?,
        join_residual,
    })
}

/// Rigid rotation taking the general two-plane problem (boundary tangents
/// `a` at `s = 0` and `e₃` at `s = L`) to the canonical one with `b(θ)` and `e₂`.
#[derive(Debug, Clone, Copy)]
pub struct CanonicalFrame {
    pub rotation: Matrix3<f64>,
    /// Dihedral angle between the planes normal to `a` and to `e₃`.
    pub angle: f64,
}

impl CanonicalFrame {
    /// `b = (-sin θ, cos θ, 0)`.
    pub fn canonical_tangent(&self) -> Vec3 {
        Vec3::new(-self.angle.sin(), self.angle.cos(), 0.0)
    }
}

/// Builds `Q ∈ SO(3)` with `Q e₃ = e₂` and `Q a = (-sin θ, cos θ, 0)`.
///
/// Convention: `θ = arccos(a·e₃) ∈ (0, π)` and the intersection line of the
/// two planes, oriented along `a × e₃`, is sent to `-ξ₃`.
pub fn canonical_rotation(a: &Vec3) -> Result<CanonicalFrame> {
    if !a.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("boundary vector"));
    }
    let norm = a.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "boundary vector must be unit length, |a| = {norm}"
        )));
    }
    let horizontal = Vec3::new(a.x, a.y, 0.0);
    let h = horizontal.norm();
    if h <= 1e-12 {
        return Err(Error::DegenerateAxis);
    }
    let angle = a.z.clamp(-1.0, 1.0).acos();
    // Source frame (e₃, â_h, e₃ × â_h) maps onto target frame (e₂, -e₁, e₃).
    let u1 = E3;
    let u2 = horizontal / h;
    let u3 = u1.cross(&u2);
    let w1 = E2;
    let w2 = -E1;
    let w3 = w1.cross(&w2);
    let rotation = w1 * u1.transpose() + w2 * u2.transpose() + w3 * u3.transpose();
    Ok(CanonicalFrame { rotation, angle })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn quarter_arc() -> ArcParams {
        ArcParams::new(1.0, FRAC_PI_2).unwrap()
    }

    #[test]
    fn exact_point_values() {
        assert_abs_diff_eq!(exact_arc_point(2.0, 0.0, 0.0).unwrap(), Vec3::new(2.0, 0.0, 0.0));
        let p = exact_arc_point(1.0, FRAC_PI_2, 3.0).unwrap();
        assert_abs_diff_eq!(p, Vec3::new(0.0, 1.0, 3.0), epsilon = 1e-15);
        let p = exact_arc_point(0.2, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(p, Vec3::new(0.2, 0.0, 5.0), epsilon = 1e-14);
        assert!(exact_arc_point(1.0, f64::NAN, 0.0).is_err());
        assert!(exact_arc_point(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn grid_invariants() {
        let g = Grid::interval(2.0, 9).unwrap();
        assert_eq!(g.spacing, 0.25);
        assert_eq!(g.node(8), 2.0);
        let p = Grid::periodic(2.0, 8).unwrap();
        assert_eq!(p.spacing, 0.25);
        assert!(Grid::interval(1.0, 7).is_err());
        assert!(Grid::interval(0.0, 16).is_err());
        assert!(Grid::symmetric(1.0, 16).is_err());
        let s = Grid::symmetric(1.0, 17).unwrap();
        assert!(s.is_symmetric());
        assert_eq!(s.node(8), 0.0);
    }

    #[test]
    fn sample_quarter_arc_endpoints() {
        let params = quarter_arc();
        let grid = Grid::interval(params.length(), 9).unwrap();
        let c = sample_exact(&Filament::Arc(params), 0.0, &grid).unwrap();
        assert_abs_diff_eq!(c.points[0], Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(c.points[4], Vec3::new(h, h, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(c.points[8], Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);

        let lifted = sample_exact(&Filament::Arc(params), 2.0, &grid).unwrap();
        for (a, b) in c.points.iter().zip(&lifted.points) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
            assert_eq!(b.z - a.z, 2.0);
        }

        let wrong = Grid::interval(1.0, 9).unwrap();
        assert!(sample_exact(&Filament::Arc(params), 0.0, &wrong).is_err());
    }

    #[test]
    fn sample_closed_circle() {
        let ring = Filament::Ring { radius: 1.0 };
        let grid = ring.grid(64).unwrap();
        let c = sample_exact(&ring, 0.0, &grid).unwrap();
        assert_abs_diff_eq!(c.points[0], Vec3::new(1.0, 0.0, 0.0));
        assert!(c.points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn fornberg_reproduces_textbook_stencils() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_abs_diff_eq!(w.as_slice(), [1.0, -2.0, 1.0].as_slice(), epsilon = 1e-14);
        let w = fornberg_weights(0.0, &[0.0, 1.0, 2.0], 1);
        assert_abs_diff_eq!(w.as_slice(), [-1.5, 2.0, -0.5].as_slice(), epsilon = 1e-14);
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 4);
        assert_abs_diff_eq!(w.as_slice(), [1.0, -4.0, 6.0, -4.0, 1.0].as_slice(), epsilon = 1e-12);
        let w = fornberg_weights(0.0, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 4);
        assert_abs_diff_eq!(
            w.as_slice(),
            [3.0, -14.0, 26.0, -24.0, 11.0, -2.0].as_slice(),
            epsilon = 1e-11
        );
    }

    #[test]
    fn derivative_rejects_bad_orders_and_small_grids() {
        let g = Grid::interval(1.0, 8).unwrap();
        let v = vec![Vec3::zeros(); 8];
        assert!(matches!(derivative(&v, &g, 0), Err(Error::InvalidOrder(0))));
        assert!(matches!(derivative(&v, &g, 5), Err(Error::InvalidOrder(5))));
        // The smallest admissible grid still carries every stencil.
        assert!(derivative(&v, &g, 4).is_ok());
        assert!(matches!(derivative(&v[..7], &g, 1), Err(Error::GridMismatch(_))));
        assert!(matches!(
            derivative_with_accuracy(&v, &g, 4, 6),
            Err(Error::GridTooSmall { .. })
        ));
        assert!(derivative_with_accuracy(&v, &g, 1, 3).is_err());
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = Grid::interval(1.3, 40).unwrap();
        let f = VectorField::constant(g, Vec3::new(0.3, -2.0, 7.0));
        for order in 1..=4 {
            assert_eq!(f.derivative(order).unwrap().sup_norm(), 0.0);
        }
    }

    #[test]
    fn arc_tangent_at_origin() {
        let params = quarter_arc();
        let grid = params.grid(512).unwrap();
        let c = sample_exact(&Filament::Arc(params), 0.0, &grid).unwrap();
        let d = c.derivative(1).unwrap();
        let h2 = grid.spacing * grid.spacing;
        assert!((d.vectors[0] - E2).norm() < h2);
    }

    #[test]
    fn third_derivative_matches_identity() {
        // ∂³x^R = -(1/R²) ∂x^R, compared against the exact tangent.
        let r = 1.5;
        let params = ArcParams::new(r, FRAC_PI_2).unwrap();
        let mut errs = Vec::new();
        for &n in &[128usize, 256] {
            let grid = params.grid(n).unwrap();
            let c = sample_exact(&Filament::Arc(params), 0.0, &grid).unwrap();
            let d3 = c.derivative(3).unwrap();
            let want = arc_tangent_field(r, &grid).scaled(-1.0 / (r * r));
            errs.push(d3.max_abs_diff(&want));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn fourth_accuracy_converges_faster() {
        let params = ArcParams::new(1.0, FRAC_PI_2).unwrap();
        let mut errs = Vec::new();
        for &n in &[64usize, 128] {
            let grid = params.grid(n).unwrap();
            let c = sample_exact(&Filament::Arc(params), 0.0, &grid).unwrap();
            let d1 = derivative_with_accuracy(&c.points, &grid, 1, 4).unwrap();
            let want = arc_tangent_field(1.0, &grid);
            errs.push(VectorField::new(grid, d1).unwrap().max_abs_diff(&want));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.7, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn second_derivative_has_curvature_one_over_r() {
        let r = 2.0;
        let params = ArcParams::new(r, 1.0).unwrap();
        let grid = params.grid(400).unwrap();
        let c = sample_exact(&Filament::Arc(params), 0.0, &grid).unwrap();
        let d2 = c.derivative(2).unwrap();
        let h2 = grid.spacing * grid.spacing;
        for v in &d2.vectors {
            assert!((v.norm() - 1.0 / r).abs() < h2);
        }
    }

    #[test]
    fn periodic_derivative_wraps() {
        let g = Grid::periodic(2.0 * PI, 64).unwrap();
        let f: Vec<f64> = g.nodes().map(f64::sin).collect();
        let d = derivative_scalar(&f, &g, 1).unwrap();
        for (s, v) in g.nodes().zip(&d) {
            assert!((v - s.cos()).abs() < g.spacing * g.spacing);
        }
    }

    #[test]
    fn reflect_t_examples() {
        let g = Grid::symmetric(1.0, 21).unwrap();
        let y = VectorField::from_fn(g, |s| Vec3::new(s, s * s, s * s * s));
        let ty = reflect_t(&y).unwrap();
        for (s, v) in g.nodes().zip(&ty.vectors) {
            assert_abs_diff_eq!(*v, Vec3::new(-s, -s * s, -s * s * s), epsilon = 1e-14);
        }
        assert_eq!(reflect_t(&ty).unwrap(), y);

        let c = VectorField::constant(g, Vec3::new(1.0, 1.0, 1.0));
        assert!(reflect_t(&c)
            .unwrap()
            .vectors
            .iter()
            .all(|v| *v == Vec3::new(1.0, -1.0, 1.0)));

        let asym = Grid::interval(1.0, 21).unwrap();
        assert!(matches!(
            reflect_t(&VectorField::zeros(asym)),
            Err(Error::AsymmetricGrid)
        ));
    }

    #[test]
    fn extended_arc_is_t_fixed() {
        let params = quarter_arc();
        let grid = params.grid(129).unwrap();
        let arc = sample_exact(&Filament::Arc(params), 0.0, &grid).unwrap();
        let ext = extend_by_reflection(&arc).unwrap();
        assert!(ext.is_smooth(JOIN_TOLERANCE));
        let f = ext.curve.as_field();
        assert_eq!(reflect_t(&f).unwrap(), f);
        assert_eq!(&ext.curve.points[128..], arc.points.as_slice());

        let shifted = arc.translated(Vec3::new(0.0, 0.0, 0.1));
        let ext = extend_by_reflection(&shifted).unwrap();
        let f = ext.curve.as_field();
        assert_eq!(reflect_t(&f).unwrap(), f);

        // Extended arc matches x^R sampled on the symmetric grid.
        let want = sample_arc_on(1.0, 0.0, &ext.curve.grid)
            .unwrap()
            .translated(Vec3::new(0.0, 0.0, 0.1));
        let diff = ext.curve.as_field().max_abs_diff(&want.as_field());
        assert!(diff < 1e-14, "{diff}");
    }

    #[test]
    fn extension_flags_broken_join() {
        let params = quarter_arc();
        let grid = params.grid(129).unwrap();
        let arc = sample_exact(&Filament::Arc(params), 0.0, &grid).unwrap();
        let bad = arc.translated(Vec3::new(0.0, 0.05, 0.0));
        let ext = extend_by_reflection(&bad).unwrap();
        assert!(!ext.is_smooth(JOIN_TOLERANCE));
        assert!((ext.join_residual - 0.05).abs() < 1e-12);
    }

    #[test]
    fn canonical_rotation_examples() {
        let f = canonical_rotation(&E2).unwrap();
        assert_abs_diff_eq!(f.rotation * E2, f.canonical_tangent(), epsilon = 1e-14);
        assert_abs_diff_eq!(f.rotation * E3, E2, epsilon = 1e-14);
        assert_abs_diff_eq!(f.angle, FRAC_PI_2, epsilon = 1e-15);
        assert!(matches!(canonical_rotation(&E3), Err(Error::DegenerateAxis)));
        assert!(matches!(canonical_rotation(&(-E3)), Err(Error::DegenerateAxis)));
        assert!(canonical_rotation(&Vec3::new(1.0, 1.0, 0.0)).is_err());
    }
}
