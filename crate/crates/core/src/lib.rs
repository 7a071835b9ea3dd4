//! Numerical laboratory for Weyl sums: complete sums over prime fields,
//! truncated Weyl sums, large-value sets, Cantor-type constructions and
//! discrepancy of polynomial sequences.

pub mod arith;
pub mod cantor;
pub mod complete;
pub mod discrepancy;
pub mod error;
pub mod experiment;
pub mod large;
pub mod phase;
pub mod report;
pub mod weyl;

pub use error::{Error, Result};
pub use phase::{e_eval, phase_from_rational, poly_phase, ComplexAcc, Phase};
