//! Service configuration: one TOML file plus environment overrides.

use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use mplab_core::menu::{parse_menu, TaskMenu};
use mplab_core::session::{DieMode, ExperimentConfig};

pub const ENV_PORT: &str = "MPLAB_PORT";
pub const ENV_DATA_DIR: &str = "MPLAB_DATA_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{var}={value:?}: {msg}")]
    Env { var: &'static str, value: String, msg: String },
    #[error("menu file {path}: {msg}")]
    Menu { path: PathBuf, msg: String },
    #[error("experiment: {0}")]
    Experiment(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Session label written to exported tables.
    pub label: String,
    pub seed: u64,
    /// High payoff of the risky HL option and of Bins decision 1.
    pub high_b: f64,
    pub die_mode: DieMode,
    pub fee: f64,
    pub capacity: Option<usize>,
    /// Timestamps equal sequence numbers, for reproducible logs.
    pub logical_clock: bool,
    /// Six menu files for tasks 1..=6, replacing the defaults.
    pub menu_files: Option<Vec<PathBuf>>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            label: "RUN".into(),
            seed: 1,
            high_b: 23.08,
            die_mode: DieMode::SeededRng,
            fee: mplab_core::session::DEFAULT_FEE,
            capacity: None,
            logical_clock: false,
            menu_files: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: IpAddr,
    pub port: u16,
    /// Event logs and session metadata. `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// Replaces the built-in subject text.
    pub content_file: Option<PathBuf>,
    /// Fixed experimenter token; a random one is generated when absent.
    pub experimenter_token: Option<String>,
    pub run: RunSettings,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            data_dir: None,
            content_file: None,
            experimenter_token: None,
            run: RunSettings::default(),
        }
    }
}

impl ServerConfig {
    pub fn from_toml(doc: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(doc)?)
    }

    /// Reads the file (if any) and applies `MPLAB_PORT` / `MPLAB_DATA_DIR`.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let doc = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.into(), source })?;
                let mut cfg = Self::from_toml(&doc)?;
                cfg.resolve_paths(p.parent().unwrap_or(Path::new(".")));
                cfg
            }
            None => ServerConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Relative paths in the file are taken relative to the file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = self.data_dir.as_mut() {
            fix(d);
        }
        if let Some(c) = self.content_file.as_mut() {
            fix(c);
        }
        if let Some(files) = self.run.menu_files.as_mut() {
            files.iter_mut().for_each(fix);
        }
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get(ENV_PORT) {
            self.port = v.trim().parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                var: ENV_PORT,
                value: v.clone(),
                msg: e.to_string(),
            })?;
        }
        if let Some(v) = get(ENV_DATA_DIR) {
            if v.trim().is_empty() {
                return Err(ConfigError::Env { var: ENV_DATA_DIR, value: v, msg: "empty path".into() });
            }
            self.data_dir = Some(PathBuf::from(v));
        }
        Ok(())
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let r = &self.run;
        let mut cfg = match &r.menu_files {
            None => ExperimentConfig::with_default_menus(r.high_b, r.seed, r.die_mode),
            Some(files) => {
                let menus = files.iter().map(|p| read_menu(p)).collect::<Result<Vec<TaskMenu>, _>>()?;
                ExperimentConfig::new(menus, r.seed, r.die_mode)
            }
        }
        .map_err(|e| ConfigError::Experiment(e.to_string()))?;
        cfg.fee = r.fee;
        cfg.validate().map_err(|e| ConfigError::Experiment(e.to_string()))?;
        Ok(cfg)
    }
}

fn read_menu(path: &Path) -> Result<TaskMenu, ConfigError> {
    let doc = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    parse_menu(&doc).map_err(|e| ConfigError::Menu { path: path.into(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file() {
        let mut cfg =
            ServerConfig::from_toml("port = 9000\ndata_dir = \"/tmp/a\"\n[run]\nlabel = \"S1\"\nseed = 5\n").unwrap();
        assert_eq!((cfg.port, cfg.run.label.as_str(), cfg.run.seed), (9000, "S1", 5));
        cfg.apply_env(|k| match k {
            ENV_PORT => Some("9100".into()),
            ENV_DATA_DIR => Some("/srv/mplab".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.port, 9100);
        assert_eq!(cfg.data_dir.as_deref(), Some(Path::new("/srv/mplab")));
        assert!(cfg.apply_env(|k| (k == ENV_PORT).then(|| "http".into())).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ServerConfig::from_toml("prot = 1").is_err());
        assert!(ServerConfig::from_toml("[run]\nseeed = 1").is_err());
    }

    #[test]
    fn default_experiment_bounds() {
        let cfg = ServerConfig::from_toml("[run]\ndie_mode = \"MANUAL_ENTRY\"\nfee = 5.0\n").unwrap();
        let exp = cfg.experiment().unwrap();
        assert_eq!(exp.die_mode, DieMode::ManualEntry);
        assert_eq!(exp.total_bounds(), (5.60, 28.08));
    }
}
