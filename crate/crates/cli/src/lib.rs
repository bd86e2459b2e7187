//! Command-line front end for the fused-exponential attention kernels:
//! deterministic tensor generation, kernel runs compared against the
//! double-precision reference, grid sweeps, and the binary tensor format.

pub mod commands;
pub mod format;
pub mod generate;
pub mod report;

pub use commands::{
    cmd_compare, cmd_gen, cmd_run, cmd_sweep, with_threads, OutFormat, RunOptions, SweepOptions,
    SWEEP_DIMS,
};
pub use generate::{generate, GenSpec};
pub use report::{ReportRow, CSV_HEADER};
