//! Batch front end for the `kpo-core` solvers: probe-frequency × pump
//! sweeps, tracked energy diagrams, stationary off-diagonal traces and
//! oracle cross-checks, written as CSV, SVG and a JSON manifest.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Axis, SweepConfig, SweepMethod};
pub use error::{Result, SweepError};
pub use run::{emit_energy_diagram, emit_offdiag_trace, oracle_check, run_sweep, RunSummary};
