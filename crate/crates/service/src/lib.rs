//! Command-line and HTTP front ends for the rearrangement pipeline.

pub mod cli;
pub mod config;
pub mod pipeline;
pub mod server;
