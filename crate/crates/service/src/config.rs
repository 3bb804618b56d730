//! Service configuration: a TOML file, environment variables, or both
//! (environment wins).

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub const ENV_CONFIG: &str = "DETSCOPE_CONFIG";
pub const ENV_LISTEN: &str = "DETSCOPE_LISTEN";
pub const ENV_DATA_DIR: &str = "DETSCOPE_DATA_DIR";
pub const ENV_IMAGE_DIR: &str = "DETSCOPE_IMAGE_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("invalid config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid listen address `{0}`")]
    Listen(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub image_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    listen: Option<String>,
    data_dir: Option<PathBuf>,
    image_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("data"),
            image_dir: PathBuf::from("images"),
        }
    }
}

impl Config {
    /// Reads `file` (if any), then applies overrides from `env`.
    pub fn load<F>(file: Option<&Path>, env: F) -> Result<Config, ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        let file_cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?
            }
            None => FileConfig::default(),
        };
        let mut cfg = Config::default();
        if let Some(listen) = env(ENV_LISTEN).or(file_cfg.listen) {
            cfg.listen = listen.parse().map_err(|_| ConfigError::Listen(listen))?;
        }
        if let Some(dir) = env(ENV_DATA_DIR).map(PathBuf::from).or(file_cfg.data_dir) {
            cfg.data_dir = dir;
        }
        if let Some(dir) = env(ENV_IMAGE_DIR).map(PathBuf::from).or(file_cfg.image_dir) {
            cfg.image_dir = dir;
        }
        Ok(cfg)
    }

    pub fn from_env() -> Result<Config, ConfigError> {
        let file = std::env::var_os(ENV_CONFIG).map(PathBuf::from);
        Config::load(file.as_deref(), |k| std::env::var(k).ok())
    }
}
