//! Initial perturbations of the exact arc: the explicit families, a seeded
//! admissible random corpus built in tangent space, the symmetric
//! projection about the mid-arc, and the admissibility report.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    arc_point, arc_tangent, derivative_with_accuracy, endpoint_slope, ArcParams, Grid, GridKind, Vec3, VectorField, E3,
};

/// Stencil accuracy used for admissibility residuals.
const CHECK_ACCURACY: usize = 6;
/// Largest accepted angle amplitude (radians) for the random corpus.
pub const MAX_AMPLITUDE: f64 = 0.5;
/// Number of trigonometric modes in each random angle profile.
const MODES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
#[derive(Default)]
pub enum PerturbationSpec {
    #[default]
    None,
    ConstantShift {
        c: [f64; 3],
    },
    LoopedArc {
        n: u32,
    },
    SmoothRandom {
        seed: u64,
        amplitude: f64,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    /// Symmetric about the mid-arc; random inner specs are generated
    /// symmetric directly, other families are projected.
    Symmetrized {
        inner: Box<PerturbationSpec>,
    },
    /// Closed-filament family: circle of radius R/n traversed n times.
    RingLooped {
        n: u32,
    },
    /// Closed-filament random corpus: one symmetric arc perturbation copied
    /// onto each of `k` equal segments.
    ReflectiveRandom {
        k: usize,
        seed: u64,
        amplitude: f64,
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

fn default_margin() -> f64 {
    0.1
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::None | Self::ConstantShift { .. } => Ok(()),
            Self::LoopedArc { n } if *n < 1 => Err(Error::InvalidParameter("looped_arc needs n ≥ 1".into())),
            Self::RingLooped { n } if *n < 2 => Err(Error::InvalidParameter("ring_looped needs n ≥ 2".into())),
            Self::LoopedArc { .. } | Self::RingLooped { .. } => Ok(()),
            Self::SmoothRandom { amplitude, margin, .. } => validate_random(*amplitude, *margin),
            Self::ReflectiveRandom {
                k, amplitude, margin, ..
            } => {
                if *k < 3 {
                    return Err(Error::InvalidParameter(format!("k must be ≥ 3, got {k}")));
                }
                validate_random(*amplitude, *margin)
            }
            Self::Symmetrized { inner } => match inner.as_ref() {
                Self::Symmetrized { .. } | Self::RingLooped { .. } | Self::ReflectiveRandom { .. } => Err(
                    Error::InvalidParameter(format!("cannot symmetrize a {} perturbation", inner.family())),
                ),
                other => other.validate(),
            },
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::ConstantShift { .. } => "constant_shift",
            Self::LoopedArc { .. } => "looped_arc",
            Self::SmoothRandom { .. } => "smooth_random",
            Self::Symmetrized { .. } => "symmetrized",
            Self::RingLooped { .. } => "ring_looped",
            Self::ReflectiveRandom { .. } => "reflective_random",
        }
    }

    pub fn is_ring_family(&self) -> bool {
        matches!(self, Self::RingLooped { .. } | Self::ReflectiveRandom { .. })
    }

    /// Samples an arc perturbation on `grid`, which must be the arc's grid.
    pub fn build_arc(&self, params: &ArcParams, grid: &Grid) -> Result<VectorField> {
        self.validate()?;
        check_arc_grid(params, grid)?;
        match self {
            Self::None => Ok(VectorField::zeros(*grid)),
            Self::ConstantShift { c } => constant_shift(Vec3::from(*c), params, grid),
            Self::LoopedArc { n } => looped_arc(*n, params, grid),
            Self::SmoothRandom {
                seed,
                amplitude,
                margin,
            } => smooth_random(*seed, *amplitude, *margin, params, grid),
            Self::Symmetrized { inner } => match inner.as_ref() {
                Self::SmoothRandom {
                    seed,
                    amplitude,
                    margin,
                } => symmetric_random(*seed, *amplitude, *margin, params, grid),
                other => symmetrize(&other.build_arc(params, grid)?, params),
            },
            Self::RingLooped { .. } | Self::ReflectiveRandom { .. } => Err(Error::InvalidParameter(format!(
                "{} is a closed-filament family",
                self.family()
            ))),
        }
    }
}

fn validate_random(amplitude: f64, margin: f64) -> Result<()> {
    if !(0.0..=MAX_AMPLITUDE).contains(&amplitude) {
        return Err(Error::InvalidParameter(format!(
            "amplitude must lie in [0, {MAX_AMPLITUDE}], got {amplitude}"
        )));
    }
    if !(margin > 0.0 && margin < 0.25) {
        return Err(Error::InvalidParameter(format!(
            "support margin must lie in (0, 1/4), got {margin}"
        )));
    }
    Ok(())
}

fn check_arc_grid(params: &ArcParams, grid: &Grid) -> Result<()> {
    let expected = params.grid(grid.n_nodes)?;
    if !grid.same_as(&expected) {
        return Err(Error::GridMismatch(format!(
            "expected the arc grid [0, {}] with {} nodes",
            params.length(),
            grid.n_nodes
        )));
    }
    Ok(())
}

/// Constant field `c`; admissible only if `e₂·c = 0` and `b·c = 0`.
pub fn constant_shift(c: Vec3, params: &ArcParams, grid: &Grid) -> Result<VectorField> {
    if !c.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("constant shift"));
    }
    let lower = params.lower_tangent().dot(&c);
    let upper = params.upper_tangent().dot(&c);
    let tol = 1e-14 * (1.0 + c.norm());
    if lower.abs() > tol {
        return Err(Error::Inadmissible(format!(
            "e₂·c = {lower:e} ≠ 0 (first endpoint leaves its plane)"
        )));
    }
    if upper.abs() > tol {
        return Err(Error::Inadmissible(format!(
            "b·c = {upper:e} ≠ 0 (last endpoint leaves its plane)"
        )));
    }
    Ok(VectorField::constant(*grid, c))
}

/// Radius of the looped arc with `n` extra turns and the same length.
pub fn looped_radius(n: u32, params: &ArcParams) -> f64 {
    params.radius * params.angle / (2.0 * PI * n as f64 + params.angle)
}

/// Predicted growth rate `2πn/(Rθ)` of the axial offset.
pub fn looped_slope(n: u32, params: &ArcParams) -> f64 {
    2.0 * PI * n as f64 / (params.radius * params.angle)
}

/// `φₙ(s) = (Rₙcos(s/Rₙ) − Rcos(s/R), Rₙsin(s/Rₙ) − Rsin(s/R), 0)`.
pub fn looped_arc(n: u32, params: &ArcParams, grid: &Grid) -> Result<VectorField> {
    if n < 1 {
        return Err(Error::InvalidParameter("looped_arc needs n ≥ 1".into()));
    }
    let rn = looped_radius(n, params);
    Ok(looped_field(rn, params.radius, grid))
}

pub(crate) fn looped_field(rn: f64, r: f64, grid: &Grid) -> VectorField {
    VectorField::from_fn(*grid, |s| arc_point(rn, s, 0.0) - arc_point(r, s, 0.0))
}

/// Smooth windowed angle profile `amplitude · bump(u) · g(u)` with
/// `u = (s − centre)/half_width`, supported on `|u| < 1`.
#[derive(Debug, Clone)]
struct AngleProfile {
    centre: f64,
    half_width: f64,
    cos_coef: [f64; MODES],
    sin_coef: [f64; MODES],
    amplitude: f64,
}

impl AngleProfile {
    fn random(rng: &mut ChaCha8Rng, amplitude: f64, centre: f64, half_width: f64, odd: bool) -> Self {
        let mut cos_coef = [0.0; MODES];
        let mut sin_coef = [0.0; MODES];
        for m in 0..MODES {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            cos_coef[m] = if odd { 0.0 } else { a / (m + 1) as f64 };
            sin_coef[m] = b / (m + 1) as f64;
        }
        // Normalise so |g| ≤ 1 and the amplitude bounds the angle.
        let total: f64 = cos_coef.iter().chain(&sin_coef).map(|c| c.abs()).sum();
        if total > 0.0 {
            cos_coef.iter_mut().chain(sin_coef.iter_mut()).for_each(|c| *c /= total);
        }
        Self {
            centre,
            half_width,
            cos_coef,
            sin_coef,
            amplitude,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        let u = (s - self.centre) / self.half_width;
        if u.abs() >= 1.0 || self.amplitude == 0.0 {
            return 0.0;
        }
        let bump = (1.0 - 1.0 / (1.0 - u * u)).exp();
        let mut g = 0.0;
        for m in 0..MODES {
            let k = (m + 1) as f64 * PI * 0.5;
            g += self.cos_coef[m] * (k * u).cos() + self.sin_coef[m] * (k * u).sin();
        }
        self.amplitude * bump * g
    }
}

/// Unit tangent built by rotating the arc tangent through angles `α` (in
/// the arc plane, towards the inward normal) and `β` (towards e₃).
fn rotated_tangent(radius: f64, s: f64, alpha: f64, beta: f64) -> Vec3 {
    let tau = arc_tangent(radius, s);
    let normal = Vec3::new(-(s / radius).cos(), -(s / radius).sin(), 0.0);
    (tau * alpha.cos() + normal * alpha.sin()) * beta.cos() + E3 * beta.sin()
}

/// Gauss–Legendre nodes and weights on [−1, 1] (five points).
const GAUSS: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Nodal values of `∫₀ˢ f` on an interval grid, cellwise Gauss–Legendre.
fn cumulative_integral(grid: &Grid, f: impl Fn(f64) -> Vec3) -> Vec<Vec3> {
    let h = grid.spacing;
    let mut out = Vec::with_capacity(grid.n_nodes);
    let mut acc = Vec3::zeros();
    out.push(acc);
    for i in 0..grid.n_nodes - 1 {
        let mid = grid.node(i) + 0.5 * h;
        let mut cell = Vec3::zeros();
        for &(x, w) in &GAUSS {
            cell += f(mid + 0.5 * h * x) * w;
        }
        acc += cell * (0.5 * h);
        out.push(acc);
    }
    out
}

struct Profiles {
    alpha: AngleProfile,
    beta: AngleProfile,
}

impl Profiles {
    fn new(seed: u64, amplitude: f64, margin: f64, length: f64, odd: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centre = 0.5 * length;
        let half_width = (0.5 - margin) * length;
        Self {
            alpha: AngleProfile::random(&mut rng, amplitude, centre, half_width, odd),
            beta: AngleProfile::random(&mut rng, amplitude, centre, half_width, odd),
        }
    }

    /// `∫₀ˢ (v₀ − x^R₀s)` at the grid nodes.
    fn displacement(&self, radius: f64, grid: &Grid) -> Vec<Vec3> {
        cumulative_integral(grid, |s| {
            rotated_tangent(radius, s, self.alpha.eval(s), self.beta.eval(s)) - arc_tangent(radius, s)
        })
    }
}

/// Admissible random perturbation: rotate the arc tangent through two
/// bump-windowed random angles, integrate, and choose the start offset
/// `δ = (δ₁, 0, 0)` so that `b·φ₀(L) = 0`.
pub fn smooth_random(seed: u64, amplitude: f64, margin: f64, params: &ArcParams, grid: &Grid) -> Result<VectorField> {
    validate_random(amplitude, margin)?;
    check_arc_grid(params, grid)?;
    let sin_theta = params.angle.sin();
    if sin_theta.abs() < 1e-8 {
        return Err(Error::InvalidParameter(
            "θ = π leaves the start offset undetermined; use the symmetrized family".into(),
        ));
    }
    let profiles = Profiles::new(seed, amplitude, margin, params.length(), false);
    let disp = profiles.displacement(params.radius, grid);
    let b = params.upper_tangent();
    let delta1 = b.dot(&disp[grid.n_nodes - 1]) / sin_theta;
    let delta = Vec3::new(delta1, 0.0, 0.0);
    VectorField::new(*grid, disp.into_iter().map(|d| d + delta).collect())
}

/// Random perturbation symmetric about the mid-arc, valid for every
/// θ ∈ (0, 2π): both angle profiles are odd about `θR/2`, and `δ₁` puts
/// the midpoint on the symmetry plane.
pub fn symmetric_random(
    seed: u64,
    amplitude: f64,
    margin: f64,
    params: &ArcParams,
    grid: &Grid,
) -> Result<VectorField> {
    validate_random(amplitude, margin)?;
    check_arc_grid(params, grid)?;
    let mid = grid.midpoint_index().ok_or(Error::NoMidpoint)?;
    let profiles = Profiles::new(seed, amplitude, margin, params.length(), true);
    let disp = profiles.displacement(params.radius, grid);
    let (_, e_theta) = mid_frame(params);
    // e^θ·e₁ = −sin(θ/2), nonzero on (0, 2π).
    let delta1 = e_theta.dot(&disp[mid]) / (0.5 * params.angle).sin();
    let delta = Vec3::new(delta1, 0.0, 0.0);
    let field = VectorField::new(*grid, disp.into_iter().map(|d| d + delta).collect())?;
    // Remove the O(ε_machine) parity defect left by the quadrature.
    symmetrize(&field, params)
}

/// `(e^r, e^θ)` at the mid-arc angle θ/2.
pub fn mid_frame(params: &ArcParams) -> (Vec3, Vec3) {
    let half = 0.5 * params.angle;
    (
        Vec3::new(half.cos(), half.sin(), 0.0),
        Vec3::new(-half.sin(), half.cos(), 0.0),
    )
}

fn require_midpoint(grid: &Grid) -> Result<()> {
    if grid.kind != GridKind::Interval {
        return Err(Error::InvalidGrid("symmetry needs an interval grid".into()));
    }
    grid.midpoint_index().map(|_| ()).ok_or(Error::NoMidpoint)
}

/// Projects onto fields with `φ^r`, `φ₃` even and `φ^θ` odd about `θR/2`.
pub fn symmetrize(phi0: &VectorField, params: &ArcParams) -> Result<VectorField> {
    require_midpoint(&phi0.grid)?;
    let (_, e_theta) = mid_frame(params);
    let n = phi0.grid.n_nodes;
    let v = &phi0.vectors;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // The reflection across the e^θ-plane maps φ(θR − s) onto the
        // symmetric partner of φ(s).
        let partner = crate::geometry::mirror(&v[n - 1 - i], &e_theta);
        out.push((v[i] + partner) * 0.5);
    }
    VectorField::new(phi0.grid, out)
}

/// Largest parity violation of `(φ^r, φ^θ, φ₃)` over mirrored node pairs.
pub fn check_symmetry(phi0: &VectorField, params: &ArcParams) -> Result<f64> {
    require_midpoint(&phi0.grid)?;
    let (e_r, e_theta) = mid_frame(params);
    let n = phi0.grid.n_nodes;
    let v = &phi0.vectors;
    let mut worst = 0.0f64;
    for i in 0..n {
        let (a, b) = (v[i], v[n - 1 - i]);
        worst = worst
            .max((e_r.dot(&a) - e_r.dot(&b)).abs())
            .max((e_theta.dot(&a) + e_theta.dot(&b)).abs())
            .max((a.z - b.z).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `max | |x^R₀s + φ₀s| − 1 |`
    pub a1_residual: f64,
    /// End-tangent mismatch `[|x₀s(0) − e₂|, |x₀s(L) − b|]`.
    pub a2_tangent: [f64; 2],
    /// First-order compatibility `|x₀s × x₀sss|` at both ends.
    pub a2_compat: [f64; 2],
    /// `[|e₂·φ₀(0)|, |b·φ₀(L)|]`
    pub a3_residuals: [f64; 2],
}

impl AssumptionReport {
    pub fn max_residual(&self) -> f64 {
        self.a2_tangent
            .iter()
            .chain(&self.a2_compat)
            .chain(&self.a3_residuals)
            .fold(self.a1_residual, |m, v| m.max(*v))
    }

    pub fn is_admissible(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Residuals of the admissibility conditions, using sixth-order stencils.
pub fn check_assumptions(phi0: &VectorField, params: &ArcParams) -> Result<AssumptionReport> {
    let grid = phi0.grid;
    check_arc_grid(params, &grid)?;
    let r = params.radius;
    let n = grid.n_nodes;
    let phi_s = derivative_with_accuracy(&phi0.vectors, &grid, 1, CHECK_ACCURACY)?;
    let phi_sss = derivative_with_accuracy(&phi0.vectors, &grid, 3, CHECK_ACCURACY)?;
    let mut a1 = 0.0f64;
    let mut tangents = Vec::with_capacity(n);
    for (p, s) in phi_s.iter().zip(grid.nodes()) {
        let t = arc_tangent(r, s) + p;
        a1 = a1.max((t.norm() - 1.0).abs());
        tangents.push(t);
    }
    let lower = params.lower_tangent();
    let upper = params.upper_tangent();
    let a2_tangent = [(tangents[0] - lower).norm(), (tangents[n - 1] - upper).norm()];
    // x^R₀sss = −x^R₀s / R² exactly.
    let compat = |i: usize| {
        let s = grid.node(i);
        let x_sss = arc_tangent(r, s) * (-1.0 / (r * r)) + phi_sss[i];
        tangents[i].cross(&x_sss).norm()
    };
    let a2_compat = [compat(0), compat(n - 1)];
    let a3 = [lower.dot(&phi0.vectors[0]).abs(), upper.dot(&phi0.vectors[n - 1]).abs()];
    Ok(AssumptionReport {
        a1_residual: a1,
        a2_tangent,
        a2_compat,
        a3_residuals: a3,
    })
}

/// End tangents of the perturbed curve from one-sided stencils, for
/// reporting orientation. Returns `(x₀s(0), x₀s(L))`.
pub fn end_tangents(phi0: &VectorField, params: &ArcParams) -> Result<(Vec3, Vec3)> {
    check_arc_grid(params, &phi0.grid)?;
    let x: Vec<Vec3> = phi0
        .vectors
        .iter()
        .zip(phi0.grid.nodes())
        .map(|(p, s)| arc_point(params.radius, s, 0.0) + p)
        .collect();
    let h = phi0.grid.spacing;
    Ok((
        endpoint_slope(&x, h, true, Vec3::zeros()),
        endpoint_slope(&x, h, false, Vec3::zeros()),
    ))
}

/// Whether a spec needs the odd node count of a symmetric construction.
pub fn needs_midpoint(spec: &PerturbationSpec) -> bool {
    matches!(spec, PerturbationSpec::Symmetrized { .. })
}
