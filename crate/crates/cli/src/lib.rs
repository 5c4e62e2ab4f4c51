//! Configuration files, output formats and the subcommands of the
//! `wormhole` binary.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod snapshot;
pub mod table;
