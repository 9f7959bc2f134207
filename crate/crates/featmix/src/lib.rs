//! Command-line tooling around `featmix-core`: CSV and JSON IO, a JSON
//! pipeline config, the benchmark grid, and table and figure emitters.

pub mod bench;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod emit;
pub mod error;

pub use bench::{run_benchmark, run_benchmark_with_threads, BenchmarkReport};
pub use config::{PipelineConfig, Protocol, Technique};
pub use error::{Error, Result};
