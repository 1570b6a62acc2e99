//! Service configuration. Precedence: `PARK_*` environment variables, then
//! the TOML file, then built-in defaults.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub store_root: PathBuf,
    pub model_bundle: PathBuf,
    pub resource_directory: PathBuf,
    pub max_upload_bytes: usize,
    pub request_timeout_s: u64,
    /// Origins allowed by CORS; empty disables CORS headers.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store_root: PathBuf::from("sessions"),
            model_bundle: PathBuf::from("model.json"),
            resource_directory: PathBuf::from("data/resources.json"),
            max_upload_bytes: 32 * 1024 * 1024,
            request_timeout_s: 60,
            cors_origins: vec!["http://localhost:5173".into()],
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file: {0}")]
    Parse(String),
    #[error("invalid value for {key}: {value:?}")]
    InvalidValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// File layer: every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    bind: Option<SocketAddr>,
    store_root: Option<PathBuf>,
    model_bundle: Option<PathBuf>,
    resource_directory: Option<PathBuf>,
    max_upload_bytes: Option<usize>,
    request_timeout_s: Option<u64>,
    cors_origins: Option<Vec<String>>,
}

pub const ENV_KEYS: [&str; 7] = [
    "PARK_BIND",
    "PARK_STORE_ROOT",
    "PARK_MODEL_BUNDLE",
    "PARK_RESOURCE_DIRECTORY",
    "PARK_MAX_UPLOAD_BYTES",
    "PARK_REQUEST_TIMEOUT_S",
    "PARK_CORS_ORIGINS",
];

impl ServiceConfig {
    /// Applies a TOML document over `self`.
    pub fn merge_toml(mut self, text: &str) -> Result<Self, ConfigError> {
        let f: FileConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(v) = f.bind {
            self.bind = v;
        }
        if let Some(v) = f.store_root {
            self.store_root = v;
        }
        if let Some(v) = f.model_bundle {
            self.model_bundle = v;
        }
        if let Some(v) = f.resource_directory {
            self.resource_directory = v;
        }
        if let Some(v) = f.max_upload_bytes {
            self.max_upload_bytes = v;
        }
        if let Some(v) = f.request_timeout_s {
            self.request_timeout_s = v;
        }
        if let Some(v) = f.cors_origins {
            self.cors_origins = v;
        }
        Ok(self)
    }

    /// Applies `PARK_*` variables from `vars` over `self`.
    pub fn merge_env<I, K, V>(mut self, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let (key, value) = (k.as_ref(), v.as_ref());
            let invalid = || ConfigError::InvalidValue { key: key.into(), value: value.into() };
            match key {
                "PARK_BIND" => self.bind = value.parse().map_err(|_| invalid())?,
                "PARK_STORE_ROOT" => self.store_root = value.into(),
                "PARK_MODEL_BUNDLE" => self.model_bundle = value.into(),
                "PARK_RESOURCE_DIRECTORY" => self.resource_directory = value.into(),
                "PARK_MAX_UPLOAD_BYTES" => self.max_upload_bytes = value.parse().map_err(|_| invalid())?,
                "PARK_REQUEST_TIMEOUT_S" => self.request_timeout_s = value.parse().map_err(|_| invalid())?,
                "PARK_CORS_ORIGINS" => {
                    self.cors_origins =
                        value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
                }
                _ => {}
            }
        }
        Ok(self)
    }

    /// Defaults, then `file` if given, then the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = ServiceConfig::default();
        if let Some(path) = file {
            let text =
                std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
            cfg = cfg.merge_toml(&text)?;
        }
        cfg.merge_env(std::env::vars().filter(|(k, _)| k.starts_with("PARK_")))
    }

    /// Startup checks: positive limits and existing input files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_upload_bytes == 0 {
            return Err(ConfigError::Invalid("max_upload_bytes must be positive".into()));
        }
        if self.request_timeout_s == 0 {
            return Err(ConfigError::Invalid("request_timeout_s must be positive".into()));
        }
        for (what, path) in [("model bundle", &self.model_bundle), ("resource directory", &self.resource_directory)] {
            if !path.is_file() {
                return Err(ConfigError::Invalid(format!("{what} {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_beats_file_beats_defaults() {
        let file = "store_root = \"/srv/a\"\nmax_upload_bytes = 10\nrequest_timeout_s = 5\n";
        let cfg = ServiceConfig::default()
            .merge_toml(file)
            .unwrap()
            .merge_env([("PARK_MAX_UPLOAD_BYTES", "20"), ("PARK_CORS_ORIGINS", "http://a, http://b"), ("HOME", "/x")])
            .unwrap();
        assert_eq!(cfg.store_root, PathBuf::from("/srv/a"));
        assert_eq!(cfg.max_upload_bytes, 20);
        assert_eq!(cfg.request_timeout_s, 5);
        assert_eq!(cfg.cors_origins, vec!["http://a", "http://b"]);
        assert_eq!(cfg.bind, ServiceConfig::default().bind);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ServiceConfig::default().merge_toml("unknown = 1").is_err());
        assert!(ServiceConfig::default().merge_env([("PARK_BIND", "nope")]).is_err());
        let zero = ServiceConfig { max_upload_bytes: 0, ..Default::default() };
        assert!(zero.validate().is_err());
        let missing = ServiceConfig { model_bundle: "/definitely/missing.json".into(), ..Default::default() };
        assert!(missing.validate().is_err());
    }
}
