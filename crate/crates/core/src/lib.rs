//! Conditional preparation of Schrödinger-cat-like states on a beam splitter:
//! Fock-space states, photodetection models, homodyne statistics and their
//! reconstruction.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod detection;
pub mod error;
pub mod fock;
pub mod phase_space;
pub mod prep;
pub mod reconstruction;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use fock::{squeezed_vacuum, FockVector, SqueezeParams, DEFAULT_DIM};
pub use prep::{BeamSplitterParams, PreparationConfig};
