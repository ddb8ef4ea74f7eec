//! Certified lower bounds on almost-invariance volume ratios of Lie group
//! representations, with a Monte Carlo oracle to check them.

pub mod bounds;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod io;
pub mod lie;
pub mod linalg;
pub mod oracle;
pub mod rep;

pub use error::{Error, Result};
