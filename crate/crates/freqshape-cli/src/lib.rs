//! Case-file parsing, report emission, and the pipeline runner behind the
//! `freqshape` command-line tool. The algorithms live in the `freqshape`
//! core crate; this crate owns everything that touches the filesystem.

pub mod casefile;
pub mod demo;
pub mod report;
pub mod runner;

pub use casefile::{parse_case, serialize_case, CaseFileError};
pub use runner::{ExitCode, RunConfig, RunError};
