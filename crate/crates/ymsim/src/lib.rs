//! Command-line driver for `ymsim-core`: configuration, subcommands and
//! output formats (JSON, CSV, operator triplets, state vectors).

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use cli::run;
