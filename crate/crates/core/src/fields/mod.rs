//! The local model on polar grids: sampled fields, discrete curvature,
//! weighted norms, canonical frames and the initial frame of a Higgs germ.

pub mod curvature;
pub mod frames;
pub mod grid;
pub mod initial;
pub mod model;
pub mod norms;

use thiserror::Error;

pub use curvature::{discrete_curvature, model_refinement, CurvatureReport, RefinementRow};
pub use frames::{frame_growth, FrameGrowth, FrameSide};
pub use grid::{Component, DiskGrid, FieldKind, GridField};
pub use initial::{build_initial_frame, HiggsGerm, InitialFrame};
pub use model::{eval_model_fields, ModelFields, SampledModel};
pub use norms::{weighted_norm, NormSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid {n_r}x{n_theta} too coarse, need at least {needed} in each direction")]
    GridTooCoarse { n_r: usize, n_theta: usize, needed: usize },
    #[error("leading polar coefficient has repeated eigenvalues")]
    NonRegularLeading,
    #[error("invalid data: {0}")]
    InvalidData(String),
}
