//! Library side of the `hyperdyn` binary: run configuration, artifact
//! export and the subcommand bodies.

pub mod commands;
pub mod config;
pub mod export;
