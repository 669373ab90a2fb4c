//! Simulation of unconditional qubit reset through tunable couplers and a
//! lossy readout resonator.

pub mod analytic;
pub mod calib;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod protocol;
pub mod pulses;

pub use error::{Error, Result};
