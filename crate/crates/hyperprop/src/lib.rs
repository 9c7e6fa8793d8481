//! Numerical calculus of propagation operators for one-dimensional decoupled
//! hyperbolic initial-boundary value problems with (possibly nonlinear)
//! reflection boundary conditions.
//!
//! The library traces characteristic curves, applies the pull-back operators
//! `R`, `S`, `Q` on grid fields, produces continuous solutions by Q-power
//! iteration and by an independent causal marching scheme, certifies
//! finite-time stability via randomized slice-vanishing checks, and solves the
//! inverse source problem for autonomous linear systems whose solution
//! semigroup is nilpotent.
//!
//! Model problems are described by a small arithmetic expression language
//! (see [`exprlang`]) plus a JSON model-file schema (see [`model`]).

pub mod characteristics;
pub mod error;
pub mod exprlang;
pub mod fts;
pub mod inverse;
pub mod model;
pub mod pifield;
pub mod presets;
pub mod qcalc;
pub mod solver;
pub mod system;
mod util;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
