//! Benchmark driver: case definitions, experiment runners and output files.

pub mod cases;
pub mod config;
pub mod experiments;
pub mod model;
pub mod output;
