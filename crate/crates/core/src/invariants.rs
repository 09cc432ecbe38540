//! Discrete functionals: L² and Sobolev norms, the conserved energies
//! E, E₁, E₂, the no-stretch residual, the mean drift of φ₃ and the
//! closed-form stability constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    arc_point, arc_tangent, derivative_scalar, derivative_with_accuracy, ArcParams, Curve, Grid, GridKind, Vec3,
    VectorField,
};
use crate::solver::Observer;

/// Composite trapezoid rule on intervals, rectangle rule on the torus.
pub fn integrate(values: &[f64], grid: &Grid) -> f64 {
    let h = grid.spacing;
    let sum: f64 = values.iter().sum();
    match grid.kind {
        GridKind::Periodic => h * sum,
        GridKind::Interval => {
            let n = values.len();
            h * (sum - 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Discrete L² inner product of two vector fields.
pub fn inner(a: &VectorField, b: &VectorField) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    let dots: Vec<f64> = a.vectors.iter().zip(&b.vectors).map(|(u, v)| u.dot(v)).collect();
    Ok(integrate(&dots, &a.grid))
}

pub fn l2_norm(field: &VectorField) -> f64 {
    let sq: Vec<f64> = field.vectors.iter().map(|v| v.norm_squared()).collect();
    integrate(&sq, &field.grid).max(0.0).sqrt()
}

pub fn l2_norm_scalar(values: &[f64], grid: &Grid) -> f64 {
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    integrate(&sq, grid).max(0.0).sqrt()
}

/// `‖f‖₁ = (‖f‖² + ‖f_s‖²)^{1/2}`.
pub fn h1_norm(field: &VectorField) -> Result<f64> {
    let d1 = field.derivative(1)?;
    Ok(l2_norm(field).hypot(l2_norm(&d1)))
}

/// `‖f‖₂ = (‖f‖² + ‖f_s‖² + ‖f_ss‖²)^{1/2}`.
pub fn h2_norm(field: &VectorField) -> Result<f64> {
    let d1 = field.derivative(1)?;
    let d2 = field.derivative(2)?;
    let sq = l2_norm(field).powi(2) + l2_norm(&d1).powi(2) + l2_norm(&d2).powi(2);
    Ok(sq.sqrt())
}

/// `E(φ) = ‖φ_ss‖² − (1/R²)‖φ_s‖²`.
pub fn energy_e(phi: &VectorField, radius: f64) -> Result<f64> {
    let d1 = phi.derivative(1)?;
    let d2 = phi.derivative(2)?;
    Ok(energy_e_from(&d1, &d2, radius))
}

fn energy_e_from(d1: &VectorField, d2: &VectorField, radius: f64) -> f64 {
    l2_norm(d2).powi(2) - l2_norm(d1).powi(2) / (radius * radius)
}

/// `E₁(v) = ‖v_ss‖² − (5/4)‖|v_s|²‖²`.
pub fn energy_e1(v: &VectorField) -> Result<f64> {
    let d1 = v.derivative(1)?;
    let d2 = v.derivative(2)?;
    Ok(energy_e1_from(&d1, &d2))
}

fn energy_e1_from(d1: &VectorField, d2: &VectorField) -> f64 {
    let grid = &d1.grid;
    let a: Vec<f64> = d2.vectors.iter().map(|w| w.norm_squared()).collect();
    let b: Vec<f64> = d1.vectors.iter().map(|w| w.norm_squared().powi(2)).collect();
    integrate(&a, grid) - 1.25 * integrate(&b, grid)
}

/// `E₂(v) = ‖v_sss‖² − (7/2)‖|v_s||v_ss|‖² − 14‖v_s·v_ss‖² + (21/8)‖|v_s|³‖²`.
pub fn energy_e2(v: &VectorField) -> Result<f64> {
    let d1 = v.derivative(1)?;
    let d2 = v.derivative(2)?;
    let d3 = v.derivative(3)?;
    Ok(energy_e2_from(&d1, &d2, &d3))
}

fn energy_e2_from(d1: &VectorField, d2: &VectorField, d3: &VectorField) -> f64 {
    let grid = &d1.grid;
    let n = grid.n_nodes;
    let (mut a, mut b, mut c, mut d) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let (v1, v2, v3) = (d1.vectors[i], d2.vectors[i], d3.vectors[i]);
        let s1 = v1.norm_squared();
        a.push(v3.norm_squared());
        b.push(s1 * v2.norm_squared());
        c.push(v1.dot(&v2).powi(2));
        d.push(s1 * s1 * s1);
    }
    integrate(&a, grid) - 3.5 * integrate(&b, grid) - 14.0 * integrate(&c, grid) + 2.625 * integrate(&d, grid)
}

/// `(v_s, v_ss, v_sss)` for `v = x_s`, taken directly as the second to fourth
/// derivatives of the positions. Nesting first differences instead would
/// amplify the one-sided boundary error by `1/h` per level.
pub fn tangent_derivatives(curve: &Curve, accuracy: usize) -> Result<(VectorField, VectorField, VectorField)> {
    let d = |k| -> Result<VectorField> {
        VectorField::new(
            curve.grid,
            derivative_with_accuracy(&curve.points, &curve.grid, k, accuracy)?,
        )
    };
    Ok((d(2)?, d(3)?, d(4)?))
}

/// `E₁` of the tangent of a curve.
pub fn curve_energy_e1(curve: &Curve) -> Result<f64> {
    let (d1, d2, _) = tangent_derivatives(curve, 2)?;
    Ok(energy_e1_from(&d1, &d2))
}

/// `E₂` of the tangent of a curve.
pub fn curve_energy_e2(curve: &Curve) -> Result<f64> {
    let (d1, d2, d3) = tangent_derivatives(curve, 2)?;
    Ok(energy_e2_from(&d1, &d2, &d3))
}

/// `max |2 x^R_s·φ_s + |φ_s|²|` over the nodes.
pub fn nostretch_residual(phi_s: &VectorField, arc_tangent: &VectorField) -> Result<f64> {
    phi_s.grid.ensure_same(&arc_tangent.grid)?;
    Ok(phi_s
        .vectors
        .iter()
        .zip(&arc_tangent.vectors)
        .map(|(p, t)| (2.0 * t.dot(p) + p.norm_squared()).abs())
        .fold(0.0, f64::max))
}

/// Right-hand side of `d/dt ∫φ₃ = (φ₁ₛ, φ₂ₛₛ) − (φ₂ₛ, φ₁ₛₛ) − (1/R)‖φ_s‖²`.
pub fn phi3_mean_drift(phi: &VectorField, radius: f64) -> Result<f64> {
    let d1 = phi.derivative(1)?;
    let d2 = phi.derivative(2)?;
    Ok(phi3_rate_from(&d1, &d2, radius))
}

fn phi3_rate_from(d1: &VectorField, d2: &VectorField, radius: f64) -> f64 {
    let cross: Vec<f64> = d1
        .vectors
        .iter()
        .zip(&d2.vectors)
        .map(|(a, b)| a.x * b.y - a.y * b.x)
        .collect();
    integrate(&cross, &d1.grid) - l2_norm(d1).powi(2) / radius
}

/// `∫ φ₃ ds`.
pub fn phi3_integral(phi: &VectorField) -> f64 {
    integrate(&phi.component(2), &phi.grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    /// `max{1, θR/π}(1 − θ²/π²)^{−1/2}`
    pub c0: f64,
    /// `(1 − θ²/π²)^{1/2}`
    pub nondecay_factor: f64,
    /// `θR/π`
    pub poincare: f64,
}

/// Closed-form constants of the arc stability estimates; defined for θ < π.
pub fn stability_constants(params: &ArcParams) -> Result<StabilityConstants> {
    let theta = params.angle;
    if theta >= PI {
        return Err(Error::Unavailable(format!(
            "stability constants need θ < π, got θ = {theta}; use the symmetric (half-arc) route"
        )));
    }
    let q = 1.0 - (theta / PI).powi(2);
    let poincare = poincare_constant(params);
    Ok(StabilityConstants {
        c0: poincare.max(1.0) / q.sqrt(),
        nondecay_factor: q.sqrt(),
        poincare,
    })
}

/// Sharp Poincaré constant `L/π` for functions with vanishing boundary
/// derivative (or zero mean) on an arc of length `L = θR`.
pub fn poincare_constant(params: &ArcParams) -> f64 {
    params.length() / PI
}

/// `‖f‖ / ‖f_s‖`, the square root of the inverse Rayleigh quotient.
pub fn rayleigh_ratio(values: &[f64], grid: &Grid) -> Result<f64> {
    let d = derivative_scalar(values, grid, 1)?;
    let den = l2_norm_scalar(&d, grid);
    if den == 0.0 {
        return Err(Error::InvalidParameter("Rayleigh quotient of a constant".into()));
    }
    Ok(l2_norm_scalar(values, grid) / den)
}

/// Channels describing a perturbation of the exact arc or ring, measured
/// against `x^R(s, t)` (and with energies in terms of the tangent `v = x_s`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "&'static str")]
pub enum Channel {
    E,
    E1,
    E2,
    Nostretch,
    Phi3Mean,
    Phi3Integral,
    Phi3Rate,
    PhiL2,
    PhiSL2,
    PhiSSL2,
    /// `‖φ_s‖₁ = (‖φ_s‖² + ‖φ_ss‖²)^{1/2}`.
    PhiSH1,
    /// `‖φ_sss‖₁ = (‖φ_sss‖² + ‖φ_ssss‖²)^{1/2}`.
    PhiSssH1,
    /// `‖(φ₁, φ₂)‖`, the in-plane part of the perturbation.
    Phi12L2,
    Phi3L2,
    PlaneLower,
    PlaneUpper,
    X3OffsetSup,
    X3OffsetSpread,
}

impl Channel {
    pub const ALL: [Channel; 18] = [
        Channel::E,
        Channel::E1,
        Channel::E2,
        Channel::Nostretch,
        Channel::Phi3Mean,
        Channel::Phi3Integral,
        Channel::Phi3Rate,
        Channel::PhiL2,
        Channel::PhiSL2,
        Channel::PhiSSL2,
        Channel::PhiSH1,
        Channel::PhiSssH1,
        Channel::Phi12L2,
        Channel::Phi3L2,
        Channel::PlaneLower,
        Channel::PlaneUpper,
        Channel::X3OffsetSup,
        Channel::X3OffsetSpread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::E => "E",
            Channel::E1 => "E1",
            Channel::E2 => "E2",
            Channel::Nostretch => "nostretch",
            Channel::Phi3Mean => "phi3_mean",
            Channel::Phi3Integral => "phi3_integral",
            Channel::Phi3Rate => "phi3_rate",
            Channel::PhiL2 => "phi_l2",
            Channel::PhiSL2 => "phi_s_l2",
            Channel::PhiSSL2 => "phi_ss_l2",
            Channel::PhiSH1 => "phi_s_h1",
            Channel::PhiSssH1 => "phi_sss_h1",
            Channel::Phi12L2 => "phi12_l2",
            Channel::Phi3L2 => "phi3_l2",
            Channel::PlaneLower => "plane_lower",
            Channel::PlaneUpper => "plane_upper",
            Channel::X3OffsetSup => "x3_offset_sup",
            Channel::X3OffsetSpread => "x3_offset_spread",
        }
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == name)
    }

    fn needs_energy_derivatives(self) -> bool {
        matches!(self, Channel::E1 | Channel::E2)
    }
}

impl TryFrom<String> for Channel {
    type Error = String;

    fn try_from(name: String) -> std::result::Result<Self, String> {
        Channel::from_name(&name).ok_or_else(|| format!("unknown channel `{name}`"))
    }
}

impl From<Channel> for &'static str {
    fn from(c: Channel) -> Self {
        c.name()
    }
}

/// Observer channels use fourth-order stencils so that the evaluation error
/// sits well below the second-order drift of the scheme itself.
pub const DEFAULT_OBSERVER_ACCURACY: usize = 4;

/// Observer computing the requested [`Channel`]s relative to the exact
/// solution of radius `radius`. Plane channels use the fixed boundary
/// tangents (`lower` at the first node, `upper` at the last).
#[derive(Debug, Clone)]
pub struct PerturbationObserver {
    pub radius: f64,
    pub lower: Vec3,
    pub upper: Vec3,
    pub channels: Vec<Channel>,
    /// Stencil accuracy of the derivatives behind every channel.
    pub accuracy: usize,
}

impl PerturbationObserver {
    pub fn for_arc(params: &ArcParams, channels: &[Channel]) -> Self {
        Self {
            radius: params.radius,
            lower: params.lower_tangent(),
            upper: params.upper_tangent(),
            channels: channels.to_vec(),
            accuracy: DEFAULT_OBSERVER_ACCURACY,
        }
    }

    /// Ring observer; plane channels are meaningless and report zero.
    pub fn for_ring(radius: f64, channels: &[Channel]) -> Self {
        Self {
            radius,
            lower: Vec3::zeros(),
            upper: Vec3::zeros(),
            channels: channels.to_vec(),
            accuracy: DEFAULT_OBSERVER_ACCURACY,
        }
    }

    pub fn with_accuracy(mut self, accuracy: usize) -> Self {
        self.accuracy = accuracy;
        self
    }

    /// All channel values for a curve at time `t`.
    pub fn evaluate(&self, t: f64, curve: &Curve) -> Result<Vec<f64>> {
        let grid = curve.grid;
        let r = self.radius;
        let phi = VectorField::new(
            grid,
            curve
                .points
                .iter()
                .zip(grid.nodes())
                .map(|(x, s)| x - arc_point(r, s, t))
                .collect(),
        )?;
        let d = |k| -> Result<VectorField> {
            VectorField::new(grid, derivative_with_accuracy(&phi.vectors, &grid, k, self.accuracy)?)
        };
        let d1 = d(1)?;
        let d2 = d(2)?;
        let energy = if self.channels.iter().any(|c| c.needs_energy_derivatives()) {
            Some(tangent_derivatives(curve, self.accuracy)?)
        } else {
            None
        };
        let offsets = phi.component(2);
        let n = grid.n_nodes;
        let mut out = Vec::with_capacity(self.channels.len());
        for &ch in &self.channels {
            let value = match ch {
                Channel::E => energy_e_from(&d1, &d2, r),
                Channel::E1 => {
                    let (v1, v2, _) = energy.as_ref().expect("energy derivatives computed");
                    energy_e1_from(v1, v2)
                }
                Channel::E2 => {
                    let (v1, v2, v3) = energy.as_ref().expect("energy derivatives computed");
                    energy_e2_from(v1, v2, v3)
                }
                Channel::Nostretch => d1
                    .vectors
                    .iter()
                    .zip(grid.nodes())
                    .map(|(p, s)| (2.0 * arc_tangent(r, s).dot(p) + p.norm_squared()).abs())
                    .fold(0.0, f64::max),
                Channel::Phi3Mean => phi3_integral(&phi) / grid.length,
                Channel::Phi3Integral => phi3_integral(&phi),
                Channel::Phi3Rate => phi3_rate_from(&d1, &d2, r),
                Channel::PhiL2 => l2_norm(&phi),
                Channel::PhiSL2 => l2_norm(&d1),
                Channel::PhiSSL2 => l2_norm(&d2),
                Channel::PhiSH1 => l2_norm(&d1).hypot(l2_norm(&d2)),
                Channel::PhiSssH1 => l2_norm(&d(3)?).hypot(l2_norm(&d(4)?)),
                Channel::Phi12L2 => {
                    let inplane: Vec<f64> = phi.vectors.iter().map(|p| p.x.hypot(p.y)).collect();
                    l2_norm_scalar(&inplane, &grid)
                }
                Channel::Phi3L2 => l2_norm_scalar(&offsets, &grid),
                Channel::PlaneLower => self.lower.dot(&phi.vectors[0]).abs(),
                Channel::PlaneUpper => self.upper.dot(&phi.vectors[n - 1]).abs(),
                Channel::X3OffsetSup => offsets.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                Channel::X3OffsetSpread => {
                    let (lo, hi) = offsets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                    hi - lo
                }
            };
            out.push(value);
        }
        Ok(out)
    }
}

impl Observer for PerturbationObserver {
    fn channels(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name().to_string()).collect()
    }

    fn observe(&self, t: f64, curve: &Curve, out: &mut Vec<f64>) {
        match self.evaluate(t, curve) {
            Ok(values) => out.extend(values),
            Err(e) => {
                log::warn!("observer failed at t = {t}: {e}");
                out.extend(std::iter::repeat_n(f64::NAN, self.channels.len()));
            }
        }
    }
}

/// Largest relative drift `max_t |q(t) − q(0)| / (1 + |q(0)|)` of a channel.
pub fn relative_drift(series: &[f64]) -> f64 {
    let Some(&q0) = series.first() else {
        return 0.0;
    };
    series.iter().map(|q| (q - q0).abs()).fold(0.0, f64::max) / (1.0 + q0.abs())
}

/// Largest absolute drift `max_t |q(t) − q(0)|`.
pub fn absolute_drift(series: &[f64]) -> f64 {
    let Some(&q0) = series.first() else {
        return 0.0;
    };
    series.iter().map(|q| (q - q0).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{arc_tangent_field, sample_arc_on, E3};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn quarter() -> ArcParams {
        ArcParams::new(1.0, FRAC_PI_2).unwrap()
    }

    #[test]
    fn l2_examples() {
        let g = Grid::interval(1.0, 512).unwrap();
        assert_eq!(l2_norm(&VectorField::zeros(g)), 0.0);
        let f = VectorField::from_fn(g, |s| Vec3::new((PI * s).sin(), 0.0, 0.0));
        assert!((l2_norm(&f) - 0.5f64.sqrt()).abs() < 1e-5);
        let g = Grid::interval(2.5, 40).unwrap();
        let c = VectorField::constant(g, Vec3::new(0.0, 0.0, -3.0));
        assert_relative_eq!(l2_norm(&c), 3.0 * 2.5f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn rectangle_rule_on_torus() {
        let g = Grid::periodic(2.0 * PI, 32).unwrap();
        let f = VectorField::from_fn(g, |s| Vec3::new(s.cos(), (3.0 * s).sin(), 0.0));
        assert_relative_eq!(l2_norm(&f).powi(2), 2.0 * PI, max_relative = 1e-13);
    }

    #[test]
    fn energy_e_examples() {
        let p = quarter();
        let g = p.grid(1024).unwrap();
        assert_eq!(energy_e(&VectorField::zeros(g), 1.0).unwrap(), 0.0);
        let c = VectorField::constant(g, Vec3::new(0.0, 0.0, 0.01));
        assert!(energy_e(&c, 1.0).unwrap().abs() < 1e-20);
        let l = p.length();
        let a = 0.01;
        let f = VectorField::from_fn(g, |s| Vec3::new(0.0, 0.0, a * (PI * s / l).sin()));
        let k2 = (PI / l).powi(2);
        let want = a * a * (l / 2.0) * k2 * (k2 - 1.0);
        let got = energy_e(&f, 1.0).unwrap();
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn arc_energies_match_closed_forms() {
        let p = quarter();
        let mut errs = Vec::new();
        for &n in &[256usize, 512] {
            let g = p.grid(n).unwrap();
            let v = arc_tangent_field(1.0, &g);
            let e1 = energy_e1(&v).unwrap();
            let e2 = energy_e2(&v).unwrap();
            errs.push(((e1 + 0.25 * FRAC_PI_2).abs(), (e2 - PI / 16.0).abs()));
        }
        assert!(errs[1].0 < 1e-4 && errs[1].1 < 1e-3, "{errs:?}");
        assert!(errs[0].0 / errs[1].0 > 3.0, "{errs:?}");
        assert!(errs[0].1 / errs[1].1 > 3.0, "{errs:?}");
    }

    #[test]
    fn energies_vanish_on_straight_tangents() {
        let g = Grid::interval(1.0, 64).unwrap();
        let v = VectorField::constant(g, Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(energy_e1(&v).unwrap(), 0.0);
        assert_eq!(energy_e2(&v).unwrap(), 0.0);
    }

    #[test]
    fn nostretch_examples() {
        let g = quarter().grid(128).unwrap();
        let tau = arc_tangent_field(1.0, &g);
        assert_eq!(nostretch_residual(&VectorField::zeros(g), &tau).unwrap(), 0.0);
        // Unit tangent minus arc tangent: the identity is algebraic.
        let tilted = VectorField::from_fn(g, |s| {
            let t = arc_tangent(1.0, s);
            let u = (t + E3 * (0.3 * s).sin()).normalize();
            u - t
        });
        assert!(nostretch_residual(&tilted, &tau).unwrap() < 1e-15);
        let r = nostretch_residual(&tau.scaled(0.1), &tau).unwrap();
        assert!((r - 0.21).abs() < 1e-14);
    }

    #[test]
    fn phi3_drift_trivial_cases() {
        let g = quarter().grid(64).unwrap();
        assert_eq!(phi3_mean_drift(&VectorField::zeros(g), 1.0).unwrap(), 0.0);
        let c = VectorField::constant(g, Vec3::new(0.2, -0.1, 0.3));
        assert_eq!(phi3_mean_drift(&c, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn stability_constant_examples() {
        let k = stability_constants(&quarter()).unwrap();
        assert_relative_eq!(k.c0, 2.0 / 3f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(k.nondecay_factor, 3f64.sqrt() / 2.0, max_relative = 1e-15);
        assert_relative_eq!(k.poincare, 0.5, max_relative = 1e-15);

        let small = stability_constants(&ArcParams::new(1.0, 1e-9).unwrap()).unwrap();
        assert!((small.c0 - 1.0).abs() < 1e-12 && (small.nondecay_factor - 1.0).abs() < 1e-12);

        let half = ArcParams::new(1.0, PI).unwrap();
        assert!(matches!(stability_constants(&half), Err(Error::Unavailable(_))));
        // A long arc with θ < π picks the θR/π branch.
        let long = stability_constants(&ArcParams::new(8.0, FRAC_PI_2).unwrap()).unwrap();
        assert_relative_eq!(long.c0, 4.0 * 2.0 / 3f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn rayleigh_ratio_recovers_poincare_constant() {
        let p = quarter();
        let l = p.length();
        let mut errs = Vec::new();
        for &n in &[128usize, 256] {
            let g = p.grid(n).unwrap();
            let f: Vec<f64> = g.nodes().map(|s| (PI * s / l).sin()).collect();
            errs.push((rayleigh_ratio(&f, &g).unwrap() - poincare_constant(&p)).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8 && errs[1] < 1e-4, "{errs:?}");
    }

    #[test]
    fn observer_on_exact_arc_is_quiet() {
        let p = quarter();
        let g = p.grid(128).unwrap();
        let c = sample_arc_on(1.0, 0.3, &g).unwrap();
        let obs = PerturbationObserver::for_arc(&p, &Channel::ALL);
        let vals = obs.evaluate(0.3, &c).unwrap();
        assert_eq!(vals.len(), Channel::ALL.len());
        for (ch, v) in Channel::ALL.iter().zip(&vals) {
            match ch {
                Channel::E1 | Channel::E2 => assert!(v.is_finite()),
                _ => assert!(v.abs() < 1e-12, "{} = {v}", ch.name()),
            }
        }
        let names = obs.channels();
        assert_eq!(names[0], "E");
        assert!(names.contains(&"phi3_mean".to_string()));
    }

    #[test]
    fn drift_helpers() {
        assert_eq!(relative_drift(&[]), 0.0);
        assert_relative_eq!(relative_drift(&[1.0, 1.5, 0.0]), 0.5);
        assert_relative_eq!(absolute_drift(&[-2.0, -2.25]), 0.25);
    }
}
