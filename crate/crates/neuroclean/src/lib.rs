//! Filesystem side of the neuroclean pipeline: the `.ncr` recording format,
//! CSV import, JSON-Lines stage logs and a runner that writes a run's
//! artifacts into an output directory.

pub mod io;
pub mod run;

pub use neuroclean_core as core;
