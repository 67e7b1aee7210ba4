//! Block-diagonal semidefinite programs: an embedded interior-point solver
//! and reading/writing of the sparse SDPA text format.

mod error;
mod instance;
pub mod sdpa;
mod solver;

pub use error::SdpError;
pub use instance::{Block, BlockKind, LinearRow, MatrixEntry, SdpInstance, Sense};
pub use solver::{solve, BlockValue, Solution, SolveOptions, SolveStatus};
