//! Solvers for `dbar` problems on polar grids and the fixed point that
//! gauges a perturbed `dbar` operator back to the model.

pub mod cauchy;
pub mod gauge;
pub mod solve;

use thiserror::Error;

use crate::fields::FieldError;

pub use cauchy::{cauchy_transform, cauchy_transform_direct};
pub use gauge::{gauge_fix, perturbation_norm, verify_gauge, GaugeFixOptions, GaugeFixResult, GaugeOperator, IterationRecord};
pub use solve::{dbar_residual, irregular_solve, solve_entry, twisted_solve, EntryTwist};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbarError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("weight is resonant: distance {distance:e} to the integers")]
    ResonantWeight { distance: f64 },
    #[error("oscillatory factor unresolved: phase step {max_step:.3} exceeds pi/4")]
    OscillationUnresolved { max_step: f64 },
    #[error("no contraction down to homothety {varpi} ({radii} radii left)")]
    NoContraction { varpi: f64, radii: usize },
    #[error("fixed point not converged after {iterations} iterations (last increment {increment:e})")]
    NotConverged { iterations: usize, increment: f64 },
}
