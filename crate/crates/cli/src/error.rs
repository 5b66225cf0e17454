use std::path::PathBuf;

use exclusion_clouds::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },

    #[error("{}: {source}", path.display())]
    Rates { path: PathBuf, source: exclusion_clouds::Error },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] exclusion_clouds::Error),
}
