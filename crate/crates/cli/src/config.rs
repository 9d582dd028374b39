//! Settings resolution: command-line flags, then environment, then
//! `curation.toml`, then built-in defaults.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use curation_core::agents::ExtractStrategy;
use curation_core::providers::ProviderConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_PORT: u16 = 8910;
pub const CONFIG_FILE: &str = "curation.toml";
pub const DEFAULT_CORS_ORIGIN: &str = "http://localhost:5173";

pub const ENV_CONFIG: &str = "CURATION_CONFIG";
pub const ENV_DB_PATH: &str = "CURATION_DB_PATH";
pub const ENV_MODEL: &str = "CURATION_MODEL";
pub const ENV_COLLECTION: &str = "CURATION_COLLECTION";
pub const ENV_PORT: &str = "CURATION_PORT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("{name}: {message}")]
    Env { name: String, message: String },
}

/// Where dynamic wrappers send their HTTP traffic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    /// Serve recorded exchanges from this directory instead of the network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_dir: Option<PathBuf>,
    /// Record live exchanges into this directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_dir: Option<PathBuf>,
}

/// The `curation.toml` layout. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub db_path: Option<PathBuf>,
    pub model_name: Option<String>,
    pub active_collection: Option<String>,
    pub background_source: Option<String>,
    pub extraction_strategy: Option<ExtractStrategy>,
    pub port: Option<u16>,
    pub cors_origin: Option<String>,
    pub provider: Option<ProviderConfig>,
    pub sources: Option<SourcesConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Relative paths in the file are relative to the file itself.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = &mut self.db_path {
            fix(p);
        }
        if let Some(provider) = &mut self.provider {
            provider.fixtures.iter_mut().for_each(fix);
        }
        if let Some(sources) = &mut self.sources {
            if let Some(p) = &mut sources.replay_dir {
                fix(p);
            }
            if let Some(p) = &mut sources.record_dir {
                fix(p);
            }
        }
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub db_path: Option<PathBuf>,
    pub model_name: Option<String>,
    pub collection: Option<String>,
    pub port: Option<u16>,
}

/// Fully resolved session settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub db_path: PathBuf,
    pub model_name: String,
    pub active_collection: Option<String>,
    pub background_source: Option<String>,
    pub extraction_strategy: ExtractStrategy,
    pub port: u16,
    pub cors_origin: String,
    pub provider: ProviderConfig,
    pub sources: SourcesConfig,
    /// The config file that was read, if any.
    pub config_file: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        let provider = ProviderConfig::default();
        Self {
            db_path: PathBuf::from("db"),
            model_name: provider.model.clone(),
            active_collection: None,
            background_source: None,
            extraction_strategy: ExtractStrategy::Basic,
            port: DEFAULT_PORT,
            cors_origin: DEFAULT_CORS_ORIGIN.into(),
            provider,
            sources: SourcesConfig::default(),
            config_file: None,
        }
    }
}

/// A source of environment variables; tests pass a map instead of the process env.
pub trait EnvSource {
    fn var(&self, name: &str) -> Option<String>;
}

pub struct ProcessEnv;

impl EnvSource for ProcessEnv {
    fn var(&self, name: &str) -> Option<String> {
        env::var(name).ok().filter(|v| !v.is_empty())
    }
}

impl<S: std::hash::BuildHasher> EnvSource for std::collections::HashMap<String, String, S> {
    fn var(&self, name: &str) -> Option<String> {
        self.get(name).cloned().filter(|v| !v.is_empty())
    }
}

impl Settings {
    /// Flags beat the environment, which beats the config file.
    ///
    /// The config file is `--config`, else `$CURATION_CONFIG`, else
    /// `./curation.toml` when it exists.
    pub fn resolve(flags: &Overrides, env: &dyn EnvSource) -> Result<Self, ConfigError> {
        let path = flags
            .config
            .clone()
            .or_else(|| env.var(ENV_CONFIG).map(PathBuf::from))
            .or_else(|| Some(PathBuf::from(CONFIG_FILE)).filter(|p| p.is_file()));
        let file = match &path {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };

        let mut s = Settings::default();
        if let Some(provider) = file.provider {
            s.model_name = provider.model.clone();
            s.provider = provider;
        }
        s.config_file = path;
        if let Some(v) = file.db_path {
            s.db_path = v;
        }
        if let Some(v) = file.model_name {
            s.model_name = v;
        }
        s.active_collection = file.active_collection;
        s.background_source = file.background_source;
        if let Some(v) = file.extraction_strategy {
            s.extraction_strategy = v;
        }
        if let Some(v) = file.port {
            s.port = v;
        }
        if let Some(v) = file.cors_origin {
            s.cors_origin = v;
        }
        if let Some(v) = file.sources {
            s.sources = v;
        }

        if let Some(v) = env.var(ENV_DB_PATH) {
            s.db_path = PathBuf::from(v);
        }
        if let Some(v) = env.var(ENV_MODEL) {
            s.model_name = v;
        }
        if let Some(v) = env.var(ENV_COLLECTION) {
            s.active_collection = Some(v);
        }
        if let Some(v) = env.var(ENV_PORT) {
            s.port = v.parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                name: ENV_PORT.into(),
                message: e.to_string(),
            })?;
        }

        if let Some(v) = &flags.db_path {
            s.db_path = v.clone();
        }
        if let Some(v) = &flags.model_name {
            s.model_name = v.clone();
        }
        if let Some(v) = &flags.collection {
            s.active_collection = Some(v.clone());
        }
        if let Some(v) = flags.port {
            s.port = v;
        }
        s.provider.model = s.model_name.clone();
        Ok(s)
    }
}
