//! Phase structure of spherical p-spin glasses.
//!
//! The variational side ([`mixtures`], [`phase`], [`parisi`], [`franz_parisi`])
//! computes free energies, phase boundaries and the Franz-Parisi potential in
//! the `N -> infinity` limit. The [`lab`] module runs finite-N Monte Carlo
//! experiments against those formulas, and [`cli`] wires everything into
//! reproducible CSV-producing commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod franz_parisi;
pub mod lab;
pub mod mixtures;
pub mod optimize;
pub mod parisi;
pub mod phase;

pub use error::{Error, Result};
pub use mixtures::MixtureFn;
