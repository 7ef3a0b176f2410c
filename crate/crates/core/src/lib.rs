//! Numerical toolkit for tempered homogeneous spaces `G/H` with `G = SL(n, R)`.

pub mod beta;
pub mod catalog;
pub mod cli;
pub mod delta;
pub mod error;
pub mod harmonic;
pub mod matgroup;
pub mod rational;
pub mod report;
pub mod rhofun;
pub mod rootdata;
pub mod sampling;

pub use error::{Error, Result};
