//! Executable local theory of wild harmonic bundles on curves.
//!
//! The crate covers the puncture-local side of the correspondence between
//! meromorphic connections with irregular singularities and meromorphic
//! Higgs bundles:
//!
//! * [`polar`]: polar data, the level decomposition of `End(E)` and the
//!   formal normalization of an irregular polar part;
//! * [`correspondence`]: the dictionary between connection-side and
//!   Higgs-side local data;
//! * [`stability`]: degrees, parabolic degrees and the subsum genericity test;
//! * [`orbit`]: the diagonal moment map on an adjoint orbit and its fibres;
//! * [`fields`]: the local model sampled on polar grids, weighted norms and
//!   canonical frames;
//! * [`dbar`]: Cauchy-transform solvers and the gauge-fixing fixed point.

pub mod correspondence;
pub mod dbar;
pub mod fields;
pub mod json;
pub mod linalg;
pub mod orbit;
pub mod polar;
pub mod series;
pub mod stability;

pub use linalg::{CMat, C64};
