//! Command line entry points and the HTTP session service.

pub mod chat;
pub mod commands;
pub mod config;
pub mod http;

pub use commands::{execute, run_args, Cli};
