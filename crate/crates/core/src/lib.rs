//! Construction, verification and composition of quantum, classical-to-quantum
//! and classical no-signalling correlations, with perfect-strategy checks for
//! non-local games on graphs and non-commutative graphs.

pub mod cli;
pub mod correlations;
pub mod error;
pub mod games;
pub mod linalg;
pub mod ncgraphs;
pub mod random;
pub mod sdp;
pub mod stochastic;
pub mod symmetry;

pub use error::{Error, Result};
pub use linalg::{Matrix, C64};
