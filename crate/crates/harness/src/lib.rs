//! Benchmark harness for the penalty and augmented Newton solvers: dataset
//! ingestion, seeded problem generation, the solver matrix runner with CSV
//! traces and JSON summaries, and the `augnewton` command line.

pub mod cli;
pub mod dataset;
pub mod experiment;
pub mod instances;
pub mod poly;
pub mod trace_io;
