//! File formats, experiment harness and command-line support for
//! `fisher-core`.
//!
//! Experiments are driven by JSON [`config::ExperimentConfig`] files. Each
//! replication samples a market from a seed derived from
//! `(base_seed, t, rep)`, so outputs are reproducible byte for byte at any
//! worker count.

pub mod config;
pub mod experiments;
pub mod harness;
pub mod io;
pub mod reference;
pub mod table;

pub use config::{ExperimentConfig, Mode, OutputPaths, SpecSource};
pub use harness::{thread_count, ReplicationResult, SolveStatus, THREADS_ENV};
