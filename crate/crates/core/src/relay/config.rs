use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::RelayError;
use crate::ledger::Ledger;

/// Client credentials for talking to one accessible network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RemoteCredentials {
    pub client_cert_path: PathBuf,
    pub client_key_path: PathBuf,
    pub remote_ca_path: PathBuf,
}

/// One relay's configuration document.
///
/// `hostChainRef` is the path of the host ledger's journal file. Relative
/// paths are resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RelayConfig {
    pub listen_address: String,
    pub host_chain_ref: String,
    pub server_cert_path: PathBuf,
    pub server_key_path: PathBuf,
    pub ca_cert_path: PathBuf,
    #[serde(default)]
    pub remote_credentials: BTreeMap<String, RemoteCredentials>,
}

impl RelayConfig {
    /// Load a TOML or JSON document; `.json` files are parsed as JSON,
    /// anything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RelayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RelayError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut config = if is_json {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        if let Some(dir) = path.parent() {
            config.resolve_relative_to(dir);
        }
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, RelayError> {
        toml::from_str(text).map_err(|e| RelayError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, RelayError> {
        serde_json::from_str(text).map_err(|e| RelayError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("relay config serializes to TOML")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RelayError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml())
            .map_err(|e| RelayError::Config(format!("cannot write {}: {e}", path.display())))
    }

    pub fn resolve_relative_to(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.server_cert_path);
        fix(&mut self.server_key_path);
        fix(&mut self.ca_cert_path);
        for creds in self.remote_credentials.values_mut() {
            fix(&mut creds.client_cert_path);
            fix(&mut creds.client_key_path);
            fix(&mut creds.remote_ca_path);
        }
        if Path::new(&self.host_chain_ref).is_relative() {
            self.host_chain_ref = dir.join(&self.host_chain_ref).to_string_lossy().into_owned();
        }
    }

    pub fn credentials_for(&self, relay_address: &str) -> Result<&RemoteCredentials, RelayError> {
        self.remote_credentials
            .get(relay_address)
            .ok_or_else(|| RelayError::Config(format!("no remoteCredentials entry for {relay_address}")))
    }

    /// Open the host ledger journal with the policy and demo contracts.
    pub fn open_host_ledger(&self) -> Result<Arc<Ledger>, RelayError> {
        Ledger::open(&self.host_chain_ref, crate::host_registry())
            .map(Arc::new)
            .map_err(|e| RelayError::Config(format!("cannot open host chain {}: {e}", self.host_chain_ref)))
    }
}
