//! Command implementations and the HTTP service behind the `catafinger`
//! binary.

pub mod artifacts;
pub mod commands;
pub mod service;

/// Environment variable read for the log filter (`error` … `trace`).
pub const LOG_ENV: &str = "CATAFINGER_LOG";
