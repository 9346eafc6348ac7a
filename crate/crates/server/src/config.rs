use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use scis_core::billing::FeeSchedule;
use scis_core::clinic::{DEFAULT_MAX_UPLOAD_BYTES, DEFAULT_SESSION_IDLE_MINUTES};
use scis_core::documents::DocumentKey;
use scis_core::{ClinicConfig, Error, Result};
use serde::Deserialize;

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_idle() -> i64 {
    DEFAULT_SESSION_IDLE_MINUTES
}

fn default_max_upload() -> usize {
    DEFAULT_MAX_UPLOAD_BYTES
}

/// The service configuration file.
///
/// A relative `datastore` is resolved against the directory holding the
/// config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub datastore: PathBuf,
    #[serde(default)]
    pub encryption_key_hex: Option<String>,
    #[serde(default)]
    pub fee_schedule: Option<FeeSchedule>,
    #[serde(default = "default_idle")]
    pub session_idle_minutes: i64,
    #[serde(default)]
    pub allow_legacy_md5: bool,
    #[serde(default = "default_max_upload")]
    pub max_upload_bytes: usize,
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.message().to_owned()))
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        if config.datastore.is_relative() {
            if let Some(dir) = path.parent() {
                config.datastore = dir.join(&config.datastore);
            }
        }
        config.clinic_config()?;
        Ok(config)
    }

    /// The clinic settings, with the key decoded and the schedule checked.
    pub fn clinic_config(&self) -> Result<ClinicConfig> {
        let encryption_key = self
            .encryption_key_hex
            .as_deref()
            .map(DocumentKey::from_hex)
            .transpose()?;
        let config = ClinicConfig {
            session_idle_minutes: self.session_idle_minutes,
            allow_legacy_md5: self.allow_legacy_md5,
            max_upload_bytes: self.max_upload_bytes,
            fee_schedule: self.fee_schedule.clone().unwrap_or_default(),
            encryption_key,
        };
        config.validate()?;
        Ok(config)
    }
}
