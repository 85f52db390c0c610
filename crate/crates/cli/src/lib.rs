//! Command implementations behind the `fedrep` binary.

use std::fs;
use std::path::{Path, PathBuf};

use fedrep::config::ConfigError;
use fedrep::SystemConfig;

pub mod artifacts;
pub mod contract_opt;
pub mod sweep;
pub mod verify;

pub use artifacts::{simulate, FileEntry, RunManifest, SCHEMA_VERSION};
pub use contract_opt::{contract_opt, ContractOptions};
pub use sweep::{parse_grid, sweep, GridAxis};
pub use verify::{verify, Check, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", config_message(path, source))]
    Config { path: String, source: ConfigError },
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: corrupt file: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("{0}")]
    Failed(String),
}

fn config_message(path: &str, source: &ConfigError) -> String {
    match source {
        ConfigError::Invalid(_) => format!("{path}: {source}"),
        _ => source.to_string(),
    }
}

impl CliError {
    /// 0 is success, 1 an invariant or solver failure, 2 a usage or config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

/// Reads and validates a config file, or returns the defaults for `None`.
pub fn load_config(path: Option<&Path>) -> Result<SystemConfig, CliError> {
    let Some(path) = path else {
        return Ok(SystemConfig::default());
    };
    let shown = path.display().to_string();
    let cfg = SystemConfig::load(path).map_err(|source| CliError::Config { path: shown.clone(), source })?;
    cfg.clone()
        .validate()
        .map_err(|source| CliError::Config { path: shown, source })?;
    Ok(cfg)
}

pub(crate) fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(CliError::io(&path))?;
    Ok(FileEntry::for_bytes(name, bytes))
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
