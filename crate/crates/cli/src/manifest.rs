use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Provenance record written with every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_echo: Value,
    pub seed: Option<u64>,
    pub library_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, config_echo: Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            config_echo,
            seed,
            library_version: shemoments::VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }
}

/// `<out>.manifest.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
