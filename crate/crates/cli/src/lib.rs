//! Batch front end for the `specrecon` library.

pub mod config;
pub mod plot;
pub mod run;
