//! Experiment harness for the nested stochastic approximation solvers:
//! config parsing, seed/horizon sweeps, artifact persistence and the
//! standalone verification suite.

pub mod check;
pub mod config;
pub mod experiment;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver error: {0}")]
    Solver(#[from] nsopt::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Environment variable providing the default output directory.
pub const OUTPUT_DIR_ENV: &str = "NSOPT_OUT";

/// Resolve the output directory: explicit flag, then environment, then
/// `./runs`.
pub fn resolve_out_dir(flag: Option<&str>, config_value: Option<&str>) -> std::path::PathBuf {
    if let Some(dir) = flag {
        return dir.into();
    }
    if let Some(dir) = config_value {
        return dir.into();
    }
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            return dir.into();
        }
    }
    "runs".into()
}
