use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid length {grid} does not match expected length {expected}")]
    LengthMismatch { grid: f64, expected: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("derivative order {0} outside 1..=4")]
    InvalidOrder(usize),

    #[error("grid has {got} nodes, at least {needed} required")]
    GridTooSmall { needed: usize, got: usize },

    #[error("grid is not symmetric about s = 0 (requires an interval grid with a node at 0)")]
    AsymmetricGrid,

    #[error("interval grid has no node at its midpoint (odd node count required)")]
    NoMidpoint,

    #[error("boundary vector is parallel to the reference axis; the plane angle is undefined")]
    DegenerateAxis,

    #[error("non-finite state at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("initial curve violates the {end} boundary tangent: residual {residual:.3e} > {tolerance:.1e}")]
    BoundaryMismatch {
        end: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("boundary condition {0}")]
    BoundaryKind(String),

    #[error("inadmissible perturbation: {0}")]
    Inadmissible(String),

    #[error("constant unavailable: {0}")]
    Unavailable(String),

    #[error("perturbation is not reflective at the requested breakpoints: {0}")]
    NotReflective(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
