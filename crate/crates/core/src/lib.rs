//! Numerical laboratory for the localized induction equation
//! `x_t = x_s × x_ss` on arc-shaped and circular vortex filaments.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod invariants;
pub mod io;
pub mod perturbations;
pub mod ring;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{ArcParams, Curve, Filament, Grid, GridKind, Vec3, VectorField};
pub use solver::{BoundaryClosure, BoundaryCondition, SolverConfig, Trajectory};
