//! Numerical laboratory for standing waves of a quasilinear Schrödinger
//! equation: constrained ground states on 1D and radial grids, conservative
//! time evolution, and orbital-stability experiments.

pub mod error;
pub mod experiments;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod model;
pub mod stability;

pub use error::Error;
pub use grid::{build_line_grid, build_radial_grid, ComplexField, Grid, GridKind, RealField};
pub use model::{classify_regime, explain_regime, ModelParams, PotentialSpec, Problem, Regime};
