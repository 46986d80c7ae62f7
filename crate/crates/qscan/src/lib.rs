//! File formats, simulation, experiments and the command-line front end for
//! the `qscan-core` scan statistics.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod parallel;
pub mod simulate;

pub use error::{QscanError, Result};
