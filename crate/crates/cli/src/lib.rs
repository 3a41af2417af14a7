//! Library surface of the `slotnav` command-line tool: run configuration,
//! on-disk formats (datasets, checkpoints, logs, reports), the gradient
//! checking suite, and the subcommand implementations. `main.rs` is a thin
//! clap wrapper over [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod gradcheck;
