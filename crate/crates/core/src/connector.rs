//! Chain Connector: the network-specific seam between a relay and its host
//! chain. Everything above this trait is backend-agnostic.

use std::sync::{Arc, Weak};

use thiserror::Error;

use crate::ledger::{Ledger, LedgerError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConnectorError {
    #[error(transparent)]
    Backend(#[from] LedgerError),
    #[error("connection to host chain lost: {0}")]
    ConnectionLost(String),
}

impl ConnectorError {
    pub fn code(&self) -> &str {
        match self {
            ConnectorError::Backend(e) => e.code(),
            ConnectorError::ConnectionLost(_) => "CONNECTION_LOST",
        }
    }
}

pub trait ChainConnector: Send + Sync {
    /// Read-only invocation; never recorded.
    fn query(&self, contract: &str, method: &str, args: &[String]) -> Result<String, ConnectorError>;

    /// State-changing invocation, committed to the host chain.
    fn submit(&self, contract: &str, method: &str, args: &[String]) -> Result<String, ConnectorError>;
}

impl<C: ChainConnector + ?Sized> ChainConnector for Arc<C> {
    fn query(&self, contract: &str, method: &str, args: &[String]) -> Result<String, ConnectorError> {
        (**self).query(contract, method, args)
    }

    fn submit(&self, contract: &str, method: &str, args: &[String]) -> Result<String, ConnectorError> {
        (**self).submit(contract, method, args)
    }
}

/// Connector onto an in-process [`Ledger`].
///
/// An attached connector does not keep the ledger alive: once every owner
/// drops it, calls fail with `CONNECTION_LOST`.
#[derive(Debug, Clone)]
pub struct LedgerConnector {
    ledger: Weak<Ledger>,
    _owner: Option<Arc<Ledger>>,
}

impl LedgerConnector {
    /// Connector that shares ownership of the ledger.
    pub fn owned(ledger: Arc<Ledger>) -> Self {
        Self {
            ledger: Arc::downgrade(&ledger),
            _owner: Some(ledger),
        }
    }

    /// Connector that observes a ledger owned elsewhere.
    pub fn attached(ledger: &Arc<Ledger>) -> Self {
        Self {
            ledger: Arc::downgrade(ledger),
            _owner: None,
        }
    }

    fn backend(&self) -> Result<Arc<Ledger>, ConnectorError> {
        self.ledger
            .upgrade()
            .ok_or_else(|| ConnectorError::ConnectionLost("ledger is no longer running".into()))
    }
}

impl ChainConnector for LedgerConnector {
    fn query(&self, contract: &str, method: &str, args: &[String]) -> Result<String, ConnectorError> {
        Ok(self.backend()?.query(contract, method, args)?)
    }

    fn submit(&self, contract: &str, method: &str, args: &[String]) -> Result<String, ConnectorError> {
        Ok(self.backend()?.submit(contract, method, args)?)
    }
}
