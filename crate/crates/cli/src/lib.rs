//! Command-line front end for the `fast` binary: NIfTI volume I/O, TOML
//! configuration, run manifests and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod nifti;
