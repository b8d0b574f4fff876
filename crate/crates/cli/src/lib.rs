//! Configuration-driven runner around the solver crate: parses flat
//! `section.key = value` files, executes one of the seven commands, and
//! writes reproducible CSV, text, and SVG artifacts.

pub mod config;
pub mod output;
pub mod run;

use std::fmt;

/// Failure classes, each with a stable process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, unparseable, or inconsistent configuration. Exit 3.
    Config(String),
    /// A solver or an output write failed during the run. Exit 2.
    Run(String),
    /// The run finished but a certification or hypothesis check failed;
    /// outputs are still written so the failure can be inspected. Exit 4.
    Certification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => 2,
            CliError::Config(_) => 3,
            CliError::Certification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
            CliError::Certification(m) => write!(f, "certification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
