use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use tokio::sync::Mutex;

use super::client::RelayClient;
use super::config::{RelayConfig, RemoteCredentials};
use super::wire::MethodRef;
use super::RelayError;
use crate::connector::ChainConnector;
use crate::policy::{AccessibleNetwork, AccessibleNetworks, PermittedMethod, PermittedNetwork};

/// Client-side router: resolves accessible networks on the host chain and
/// forwards requests to their relays, reusing one connection per remote.
pub struct Mediator {
    connector: Arc<dyn ChainConnector>,
    credentials: BTreeMap<String, RemoteCredentials>,
    clients: Mutex<HashMap<String, RelayClient>>,
}

impl Mediator {
    pub fn new(connector: Arc<dyn ChainConnector>, credentials: BTreeMap<String, RemoteCredentials>) -> Self {
        Self {
            connector,
            credentials,
            clients: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_config(config: &RelayConfig, connector: Arc<dyn ChainConnector>) -> Self {
        Self::new(connector, config.remote_credentials.clone())
    }

    pub fn get_accessible_network(&self, relay_address: &str) -> Result<AccessibleNetwork, RelayError> {
        Ok(AccessibleNetworks(&*self.connector).get_by_address(relay_address)?)
    }

    /// Connected client for `remote`, opening one if needed.
    pub async fn client(&self, remote: &AccessibleNetwork) -> Result<RelayClient, RelayError> {
        let address = &remote.relay_address;
        let creds = self
            .credentials
            .get(address)
            .ok_or_else(|| RelayError::Config(format!("no remoteCredentials entry for {address}")))?;
        let mut clients = self.clients.lock().await;
        if let Some(client) = clients.get(address) {
            if !client.is_closed() {
                return Ok(client.clone());
            }
        }
        let client = RelayClient::connect(address, creds).await?;
        clients.insert(address.clone(), client.clone());
        Ok(client)
    }

    pub async fn fetch_permitted_network_info(
        &self,
        remote: &AccessibleNetwork,
    ) -> Result<PermittedNetwork, RelayError> {
        self.client(remote).await?.permitted_network_info().await
    }

    pub async fn fetch_permitted_methods(
        &self,
        remote: &AccessibleNetwork,
        network_id: &str,
    ) -> Result<Vec<PermittedMethod>, RelayError> {
        self.client(remote).await?.permitted_methods(network_id).await
    }

    pub async fn invoke_remote(
        &self,
        remote: &AccessibleNetwork,
        method: &MethodRef,
        args: &[String],
    ) -> Result<String, RelayError> {
        self.client(remote).await?.invoke(method, args).await
    }
}
