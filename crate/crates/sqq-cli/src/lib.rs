//! Command-line runner, file formats, and benchmark harness for the SQQ
//! integrator family. The numerics live in `sqq-core`; this crate adds the
//! problem data files, CSV output, the benchmark matrix, and the `sqq`
//! binary.

pub mod bench;
pub mod cli;
pub mod config;
pub mod output;
pub mod solar;
pub mod validate;
