//! Parisi formula for spherical mixtures in its Crisanti-Sommers form.

mod functional;
mod measure;
mod solver;

pub use functional::{cs_functional, cs_functional_cdf, cs_functional_extended, rs_value};
pub use measure::*;
pub use solver::*;
