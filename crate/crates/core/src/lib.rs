//! Cross-chain service invocation over policy smart contracts.
//!
//! The crate is organised bottom-up:
//!
//! - [`ledger`]: a deterministic, hash-chained simulated permissioned ledger
//!   that hosts contract handlers.
//! - [`policy`]: the Accessible Networks, Permitted Networks and Permitted
//!   Methods contracts, plus typed clients over a [`connector::ChainConnector`].
//! - [`pki`]: a per-host certificate authority and the certificate helpers
//!   used for relay authentication.
//! - [`relay`]: the mutually-authenticated relay server, client and mediator.
//! - [`bench`]: fixed-rate load generation, sweeps and saturation detection.

pub mod bench;
pub mod canonical;
pub mod connector;
pub mod demo;
pub mod ledger;
pub mod pki;
pub mod policy;
pub mod relay;

pub use connector::{ChainConnector, ConnectorError, LedgerConnector};
pub use ledger::{Ledger, LedgerError, LedgerTransaction};

/// Contracts every host chain in this crate runs: the three policy
/// contracts and [`demo::KvDemo`].
pub fn host_registry() -> ledger::ContractRegistry {
    let mut registry = policy::registry();
    registry
        .register(demo::KV_DEMO, std::sync::Arc::new(demo::KvDemo))
        .expect("kv_demo name is valid and unused");
    registry
}
