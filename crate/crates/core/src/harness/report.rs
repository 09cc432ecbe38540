use indexmap::IndexMap;
use serde::Serialize;

use super::analysis::Convergence;
use super::config::RunConfig;

/// Names of the results each bound check is measured against.
pub mod sources {
    pub const EXACT_ARC: &str = "exact arc solution: rigid translation at speed 1/R";
    pub const ENERGY_E: &str = "conservation of the energy E(φ)";
    pub const HIGHER_ENERGIES: &str = "conservation of the higher energies E1, E2";
    pub const BASIC_ESTIMATE: &str = "basic energy lemma: ‖φ_s‖₁ ≤ C₀‖φ₀ss‖ with C₀ = max{1, θR/π}(1 - θ²/π²)^(-1/2)";
    pub const NONDECAY: &str = "non-decay lemma: ‖φ_ss(t)‖ ≥ (1 - θ²/π²)^(1/2)‖φ₀ss‖ or φ_ss ≡ 0";
    pub const LYAPUNOV: &str = "Lyapunov stability theorem: bounded ‖φ_sss‖₁, ‖φ₃‖ ≤ C(1 + t)";
    pub const SYMMETRIC_ROUTE: &str = "stability for θ ∈ [π, 2π) through symmetric perturbations";
    pub const ADMISSIBILITY: &str = "admissibility: unit tangent, boundary tangents, boundary planes";
    pub const PLANE_INVARIANCE: &str = "boundary-plane invariance: (e₂·φ)_t = 0 and (b·φ)_t = 0";
    pub const CONSTANT_SHIFT: &str = "constant shifts are stationary perturbations";
    pub const REFLECTION: &str = "reflection symmetry: Tx solves the equation whenever x does";
    pub const LOOPED_OPTIMALITY: &str = "optimality theorem: looped arcs separate at rate 2πn/(Rθ)";
    pub const RING_SEGMENTATION: &str = "ring stability theorem: k-reflective rings split into k arc problems";
    pub const RING_OPTIMALITY: &str = "ring optimality theorem: R_n = R/n, separation rate (n - 1)/R";
    pub const POINCARE: &str = "sharp Poincaré constant L/π";
    pub const EXECUTION: &str = "experiment ran to completion";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    /// Convergence order at least `bound`, or finest value at rounding level.
    OrderAtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub source: &'static str,
    pub relation: Relation,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl BoundCheck {
    /// `measured ≤ bound`; NaN fails.
    pub fn at_most(name: impl Into<String>, source: &'static str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            source,
            relation: Relation::AtMost,
            measured,
            bound,
            passed: measured <= bound,
            detail: None,
        }
    }

    /// `measured ≥ bound`; NaN fails.
    pub fn at_least(name: impl Into<String>, source: &'static str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            source,
            relation: Relation::AtLeast,
            measured,
            bound,
            passed: measured >= bound,
            detail: None,
        }
    }

    pub fn order(source: &'static str, conv: &Convergence, threshold: f64) -> Self {
        let detail = if conv.fitted_order >= threshold {
            format!("pairwise orders {:?}", round3(&conv.pairwise_orders))
        } else if conv.at_floor() {
            format!(
                "finest value {:.3e} at rounding floor {:.3e}; pairwise orders {:?}",
                conv.finest(),
                conv.floor,
                round3(&conv.pairwise_orders)
            )
        } else {
            format!(
                "finest value {:.3e} above rounding floor {:.3e}; pairwise orders {:?}",
                conv.finest(),
                conv.floor,
                round3(&conv.pairwise_orders)
            )
        };
        Self {
            name: format!("order of {}", conv.quantity),
            source,
            relation: Relation::OrderAtLeast,
            measured: conv.fitted_order,
            bound: threshold,
            passed: conv.meets(threshold),
            detail: Some(detail),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn describe(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "≤",
            Relation::AtLeast => "≥",
            Relation::OrderAtLeast => "order ≥",
        };
        let mut s = format!(
            "{} {}: {:.6e} {rel} {:.6e}",
            if self.passed { "ok  " } else { "FAIL" },
            self.name,
            self.measured,
            self.bound
        );
        if let Some(d) = &self.detail {
            s.push_str(" (");
            s.push_str(d);
            s.push(')');
        }
        s
    }
}

fn round3(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

/// A fitted growth rate and the value it is compared against.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeMeasurement {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    /// `|measured/target − 1|`, or `|measured|` when the target is zero.
    pub rel_error: f64,
    pub window: (f64, f64),
}

impl SlopeMeasurement {
    pub fn new(name: impl Into<String>, measured: f64, target: f64, window: (f64, f64)) -> Self {
        let rel_error = if target == 0.0 {
            measured.abs()
        } else {
            (measured / target - 1.0).abs()
        };
        Self {
            name: name.into(),
            measured,
            target,
            rel_error,
            window,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub package: &'static str,
    pub version: &'static str,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        Self {
            config_hash: config.hash(),
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<BoundCheck>,
    pub slopes: Vec<SlopeMeasurement>,
    pub orders: Vec<Convergence>,
    /// Residual maxima and other scalar results, keyed by name.
    pub metrics: IndexMap<String, f64>,
    pub notes: Vec<String>,
    /// Wall-clock seconds per stage; the only nondeterministic content.
    pub timings: IndexMap<String, f64>,
    pub provenance: Provenance,
    pub config: RunConfig,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, config: &RunConfig) -> Self {
        Self {
            experiment: experiment.into(),
            passed: true,
            checks: Vec::new(),
            slopes: Vec::new(),
            orders: Vec::new(),
            metrics: IndexMap::new(),
            notes: Vec::new(),
            timings: IndexMap::new(),
            provenance: Provenance::of(config),
            config: config.clone(),
        }
    }

    pub fn check(&mut self, check: BoundCheck) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One line per check, for terminal output.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = vec![format!(
            "{}: {} ({} checks, {} failed)",
            self.experiment,
            if self.passed { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.failures().count()
        )];
        lines.extend(self.checks.iter().map(|c| format!("  {}", c.describe())));
        lines
    }
}
