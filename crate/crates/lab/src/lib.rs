//! Experiment driver for first-passage percolation: configuration, replicated
//! sampling, file formats and a brute-force reference solver.

pub mod archive;
pub mod config;
pub mod oracle;
pub mod output;
pub mod runner;
pub mod validate;
pub mod weights;
