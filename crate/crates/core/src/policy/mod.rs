//! The three policy contracts and typed clients for them.
//!
//! Each contract stores its records as canonical JSON under `rec:<id>`,
//! keeps a contract-local counter under `counter`, and maintains the
//! secondary indexes needed for its lookups. Ids are a three-letter prefix
//! plus the zero-padded counter (`an-00000001`), so ascending key order is
//! ascending id order.

mod accessible;
mod methods;
mod permitted;

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::connector::{ChainConnector, ConnectorError};
use crate::ledger::{ContractContext, ContractError, ContractRegistry, Ledger, LedgerError};

pub use accessible::AccessibleNetworksContract;
pub use methods::PermittedMethodsContract;
pub use permitted::PermittedNetworksContract;

pub const ACCESSIBLE_NETWORKS: &str = "accessible_networks";
pub const PERMITTED_NETWORKS: &str = "permitted_networks";
pub const PERMITTED_METHODS: &str = "permitted_methods";

pub const REGISTER: &str = "Register";
pub const GET_BY_ADDRESS: &str = "GetByAddress";
pub const LIST: &str = "List";
pub const REMOVE: &str = "Remove";
pub const GET_PERMITTED_METHODS_BY_NETWORK_ID: &str = "GetPermittedMethodsByNetworkId";
pub const CHECK_PERMITTED: &str = "CheckPermitted";

/// Contract-to-contract methods; invisible to top-level callers.
pub(crate) const GET_BY_ID: &str = "GetById";
pub(crate) const REMOVE_BY_NETWORK_ID: &str = "RemoveByNetworkId";

/// A remote chain this host may call.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AccessibleNetwork {
    pub id: String,
    pub name: String,
    pub relay_address: String,
}

/// A remote chain granted access to this host. `address` is the common name
/// of the client certificate issued to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PermittedNetwork {
    pub id: String,
    pub name: String,
    pub address: String,
}

/// Grant of one `contract.method` on this host to one permitted network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PermittedMethod {
    pub id: String,
    pub network_id: String,
    pub contract_name: String,
    pub method_name: String,
    pub description: String,
}

/// A registry holding the three policy contracts.
pub fn registry() -> ContractRegistry {
    let mut reg = ContractRegistry::new();
    install(&mut reg).expect("fresh registry has no policy contracts");
    reg
}

/// Add the policy contracts to `reg`.
pub fn install(reg: &mut ContractRegistry) -> Result<(), LedgerError> {
    reg.register(ACCESSIBLE_NETWORKS, Arc::new(AccessibleNetworksContract))?;
    reg.register(PERMITTED_NETWORKS, Arc::new(PermittedNetworksContract))?;
    reg.register(PERMITTED_METHODS, Arc::new(PermittedMethodsContract))?;
    Ok(())
}

/// Register the policy contracts on a live ledger.
pub fn install_on(ledger: &Ledger) -> Result<(), LedgerError> {
    ledger.register_contract(ACCESSIBLE_NETWORKS, AccessibleNetworksContract)?;
    ledger.register_contract(PERMITTED_NETWORKS, PermittedNetworksContract)?;
    ledger.register_contract(PERMITTED_METHODS, PermittedMethodsContract)?;
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("address already registered: {0}")]
    DuplicateAddress(String),
    #[error("method already granted: {0}")]
    DuplicateGrant(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Chain(ConnectorError),
    #[error("undecodable contract result: {0}")]
    Decode(String),
}

impl PolicyError {
    pub fn code(&self) -> &str {
        match self {
            PolicyError::InvalidArgument(_) => "INVALID_ARGUMENT",
            PolicyError::DuplicateAddress(_) => "DUPLICATE_ADDRESS",
            PolicyError::DuplicateGrant(_) => "DUPLICATE_GRANT",
            PolicyError::NotFound(_) => "NOT_FOUND",
            PolicyError::Chain(e) => e.code(),
            PolicyError::Decode(_) => "INTERNAL",
        }
    }
}

impl From<ConnectorError> for PolicyError {
    fn from(e: ConnectorError) -> Self {
        match e {
            ConnectorError::Backend(LedgerError::NotFound(m)) => PolicyError::NotFound(m),
            ConnectorError::Backend(LedgerError::Contract { code, message }) => match code.as_str() {
                "INVALID_ARGUMENT" => PolicyError::InvalidArgument(message),
                "DUPLICATE_ADDRESS" => PolicyError::DuplicateAddress(message),
                "DUPLICATE_GRANT" => PolicyError::DuplicateGrant(message),
                "NOT_FOUND" => PolicyError::NotFound(message),
                _ => PolicyError::Chain(ConnectorError::Backend(LedgerError::Contract { code, message })),
            },
            other => PolicyError::Chain(other),
        }
    }
}

fn decode<T: DeserializeOwned>(text: &str) -> Result<T, PolicyError> {
    serde_json::from_str(text).map_err(|e| PolicyError::Decode(format!("{e}: {text}")))
}

fn owned(args: &[&str]) -> Vec<String> {
    args.iter().map(|s| s.to_string()).collect()
}

/// Typed client for the Accessible Networks contract.
#[derive(Clone, Copy)]
pub struct AccessibleNetworks<'a>(pub &'a dyn ChainConnector);

impl AccessibleNetworks<'_> {
    pub fn register(&self, name: &str, relay_address: &str) -> Result<String, PolicyError> {
        decode(
            &self
                .0
                .submit(ACCESSIBLE_NETWORKS, REGISTER, &owned(&[name, relay_address]))?,
        )
    }

    pub fn get_by_address(&self, relay_address: &str) -> Result<AccessibleNetwork, PolicyError> {
        decode(
            &self
                .0
                .query(ACCESSIBLE_NETWORKS, GET_BY_ADDRESS, &owned(&[relay_address]))?,
        )
    }

    pub fn list(&self) -> Result<Vec<AccessibleNetwork>, PolicyError> {
        decode(&self.0.query(ACCESSIBLE_NETWORKS, LIST, &[])?)
    }

    pub fn remove(&self, id: &str) -> Result<(), PolicyError> {
        self.0.submit(ACCESSIBLE_NETWORKS, REMOVE, &owned(&[id]))?;
        Ok(())
    }
}

/// Typed client for the Permitted Networks contract.
#[derive(Clone, Copy)]
pub struct PermittedNetworks<'a>(pub &'a dyn ChainConnector);

impl PermittedNetworks<'_> {
    pub fn register(&self, name: &str, address: &str) -> Result<String, PolicyError> {
        decode(&self.0.submit(PERMITTED_NETWORKS, REGISTER, &owned(&[name, address]))?)
    }

    pub fn get_by_address(&self, address: &str) -> Result<PermittedNetwork, PolicyError> {
        decode(&self.0.query(PERMITTED_NETWORKS, GET_BY_ADDRESS, &owned(&[address]))?)
    }

    pub fn list(&self) -> Result<Vec<PermittedNetwork>, PolicyError> {
        decode(&self.0.query(PERMITTED_NETWORKS, LIST, &[])?)
    }

    /// Removes the network and every method granted to it.
    pub fn remove(&self, id: &str) -> Result<(), PolicyError> {
        self.0.submit(PERMITTED_NETWORKS, REMOVE, &owned(&[id]))?;
        Ok(())
    }
}

/// Typed client for the Permitted Methods contract.
#[derive(Clone, Copy)]
pub struct PermittedMethods<'a>(pub &'a dyn ChainConnector);

impl PermittedMethods<'_> {
    pub fn register(
        &self,
        network_id: &str,
        contract_name: &str,
        method_name: &str,
        description: &str,
    ) -> Result<String, PolicyError> {
        decode(&self.0.submit(
            PERMITTED_METHODS,
            REGISTER,
            &owned(&[network_id, contract_name, method_name, description]),
        )?)
    }

    pub fn get_by_network_id(&self, network_id: &str) -> Result<Vec<PermittedMethod>, PolicyError> {
        decode(&self.0.query(
            PERMITTED_METHODS,
            GET_PERMITTED_METHODS_BY_NETWORK_ID,
            &owned(&[network_id]),
        )?)
    }

    pub fn check_permitted(
        &self,
        network_id: &str,
        contract_name: &str,
        method_name: &str,
    ) -> Result<bool, PolicyError> {
        decode(&self.0.query(
            PERMITTED_METHODS,
            CHECK_PERMITTED,
            &owned(&[network_id, contract_name, method_name]),
        )?)
    }

    pub fn list(&self) -> Result<Vec<PermittedMethod>, PolicyError> {
        decode(&self.0.query(PERMITTED_METHODS, LIST, &[])?)
    }

    pub fn remove(&self, id: &str) -> Result<(), PolicyError> {
        self.0.submit(PERMITTED_METHODS, REMOVE, &owned(&[id]))?;
        Ok(())
    }
}

// ---- shared handler helpers ----

const COUNTER_KEY: &str = "counter";
const RECORD_PREFIX: &str = "rec:";
const NULL: &str = "null";

fn arity<'a, const N: usize>(args: &'a [String], method: &str) -> Result<&'a [String; N], ContractError> {
    args.try_into()
        .map_err(|_| ContractError::invalid_argument(format!("{method} expects {N} arguments, got {}", args.len())))
}

fn non_empty(value: &str, field: &str) -> Result<(), ContractError> {
    if value.is_empty() {
        Err(ContractError::invalid_argument(format!("{field} must not be empty")))
    } else {
        Ok(())
    }
}

fn next_id(ctx: &mut ContractContext<'_>, prefix: &str) -> String {
    let n: u64 = ctx.get(COUNTER_KEY).and_then(|v| v.parse().ok()).unwrap_or(0) + 1;
    ctx.put(COUNTER_KEY, n.to_string());
    format!("{prefix}-{n:08}")
}

fn record_key(id: &str) -> String {
    format!("{RECORD_PREFIX}{id}")
}

fn put_record<T: Serialize>(ctx: &mut ContractContext<'_>, id: &str, record: &T) {
    ctx.put(&record_key(id), canonical::to_json(record));
}

fn get_record<T: DeserializeOwned>(ctx: &ContractContext<'_>, id: &str) -> Result<Option<T>, ContractError> {
    ctx.get(&record_key(id))
        .map(|text| {
            serde_json::from_str(&text)
                .map_err(|e| ContractError::rejected("CONTRACT_ERROR", format!("corrupt record {id}: {e}")))
        })
        .transpose()
}

/// All records as a canonical JSON array, ascending by id. Stored values
/// are already canonical, so joining them preserves canonical form.
fn list_records(ctx: &ContractContext<'_>) -> String {
    let items: Vec<String> = ctx.scan_prefix(RECORD_PREFIX).into_iter().map(|(_, v)| v).collect();
    format!("[{}]", items.join(","))
}

fn json_string(s: &str) -> String {
    canonical::to_json(s)
}

#[cfg(test)]
mod tests;
