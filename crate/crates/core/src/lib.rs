//! Device-independent lower bounds on conditional von Neumann entropy.
//!
//! The conditional entropy `H(A|E) = -D(rho_AE || 1 (x) rho_E)` is bounded
//! from below by discretizing an integral representation of the relative
//! entropy ([`grid`]), turning the resulting variational expression into a
//! noncommutative polynomial optimization problem over projectors
//! ([`npo`]), and relaxing that problem to a semidefinite program with
//! moment matrices ([`relax`]). Dense reference computations live in
//! [`oracle`].

pub mod algebra;
pub mod bound;
mod error;
pub mod grid;
pub mod ingest;
pub mod npo;
pub mod oracle;
mod quad;
pub mod relax;
pub mod scenario;

pub use dibound_sdp as sdp;
pub use error::{Error, Result};
