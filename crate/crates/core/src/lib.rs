//! Invariant tori of perturbed rotators with finitely differentiable potentials.
//!
//! The solver follows a double iteration. The outer index `j` climbs a ladder of
//! analytic truncations `V^j` of the potential, and the inner index `n` admits
//! the small divisors `ω·q` one frequency band at a time. Every step is
//! instrumented with the identities that make the scheme work, and an
//! independent dense Newton solver cross-checks the results.

pub mod assembly;
pub mod commands;
pub mod compose;
pub mod config;
pub mod error;
pub mod fourier;
pub mod frequency;
pub mod grid;
pub mod ladder;
pub mod lattice;
pub mod linalg;
pub mod oracle;
pub mod quad;
pub mod report;
pub mod rg;
pub mod scales;
pub mod stats;

pub use error::{Error, Result};
pub use fourier::{FourierMap, Potential};
pub use lattice::{LatticePoint, LatticeWindow};

#[doc = include_str!("../../../book/src/conventions.md")]
#[cfg(doctest)]
mod book_conventions {}

#[doc = include_str!("../../../book/src/scales.md")]
#[cfg(doctest)]
mod book_scales {}

#[doc = include_str!("../../../book/src/ladder.md")]
#[cfg(doctest)]
mod book_ladder {}

#[doc = include_str!("../../../book/src/solving.md")]
#[cfg(doctest)]
mod book_solving {}

#[doc = include_str!("../../../book/src/checking.md")]
#[cfg(doctest)]
mod book_checking {}

#[doc = include_str!("../../../book/src/cli.md")]
#[cfg(doctest)]
mod book_cli {}
