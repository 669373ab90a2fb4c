//! Parameter sweeps and derivative-free pulse optimization.

mod cmaes;
mod sweep;

pub use cmaes::{cmaes_minimize, GenerationRecord, OptimizeResult, OptimizerConfig, StopReason};
pub use sweep::{fit_period, line_cut, sweep2d, Axis, LineCut, PointFailure, SweepAxis, SweepGrid};
