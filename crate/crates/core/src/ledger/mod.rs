//! Deterministic single-chain simulated ledger.
//!
//! Contract handlers run against a namespaced view of the [`WorldState`].
//! Every successful [`Ledger::submit`] appends a hash-chained
//! [`LedgerTransaction`]; [`Ledger::query`] runs the same handler against a
//! throwaway overlay and leaves no trace. Submits are serialized through a
//! single commit lock; queries take a shared read lock and run in parallel.

mod journal;
mod state;
mod tx;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

pub use state::WorldState;
pub use tx::{result_digest, sha256, Digest, LedgerTransaction, ZERO_DIGEST};

use journal::Journal;

/// Maximum depth of nested cross-contract calls.
const MAX_CALL_DEPTH: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("contract {0} is already registered")]
    DuplicateContract(String),
    #[error("invalid contract name {0:?}")]
    InvalidContractName(String),
    #[error("unknown contract {0}")]
    UnknownContract(String),
    #[error("unknown method {contract}.{method}")]
    UnknownMethod { contract: String, method: String },
    #[error("not found: {0}")]
    NotFound(String),
    /// The handler rejected its input. `code` is `CONTRACT_ERROR` unless the
    /// contract reports something more specific (e.g. `DUPLICATE_ADDRESS`).
    #[error("{code}: {message}")]
    Contract { code: String, message: String },
    #[error("hash chain broken at seq {seq}: {reason}")]
    ChainBroken { seq: u64, reason: String },
    #[error("ledger i/o error: {0}")]
    Io(String),
}

impl LedgerError {
    pub fn code(&self) -> &str {
        match self {
            LedgerError::DuplicateContract(_) => "DUPLICATE_CONTRACT",
            LedgerError::InvalidContractName(_) => "INVALID_ARGUMENT",
            LedgerError::UnknownContract(_) => "UNKNOWN_CONTRACT",
            LedgerError::UnknownMethod { .. } => "UNKNOWN_METHOD",
            LedgerError::NotFound(_) => "NOT_FOUND",
            LedgerError::Contract { code, .. } => code,
            LedgerError::ChainBroken { .. } => "CHAIN_BROKEN",
            LedgerError::Io(_) => "IO_ERROR",
        }
    }

    fn from_contract(contract: &str, method: &str, err: ContractError) -> Self {
        match err {
            ContractError::UnknownMethod => LedgerError::UnknownMethod {
                contract: contract.to_owned(),
                method: method.to_owned(),
            },
            ContractError::NotFound(m) => LedgerError::NotFound(m),
            ContractError::Rejected { code, message } => LedgerError::Contract { code, message },
        }
    }
}

impl From<std::io::Error> for LedgerError {
    fn from(e: std::io::Error) -> Self {
        LedgerError::Io(e.to_string())
    }
}

/// Errors a contract handler may return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContractError {
    UnknownMethod,
    NotFound(String),
    Rejected { code: String, message: String },
}

impl ContractError {
    pub fn rejected(code: impl Into<String>, message: impl Into<String>) -> Self {
        ContractError::Rejected {
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn invalid_argument(message: impl Into<String>) -> Self {
        Self::rejected("INVALID_ARGUMENT", message)
    }
}

impl From<LedgerError> for ContractError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::NotFound(m) => ContractError::NotFound(m),
            other => ContractError::rejected(other.code().to_owned(), other.to_string()),
        }
    }
}

/// A contract: a pure function of (namespaced state, method, args).
pub trait ContractHandler: Send + Sync {
    fn invoke(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<String, ContractError>;
}

impl<F> ContractHandler for F
where
    F: Fn(&mut ContractContext<'_>, &str, &[String]) -> Result<String, ContractError> + Send + Sync,
{
    fn invoke(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<String, ContractError> {
        self(ctx, method, args)
    }
}

/// Named contract handlers. Cheap to clone.
#[derive(Clone, Default)]
pub struct ContractRegistry {
    handlers: BTreeMap<String, Arc<dyn ContractHandler>>,
}

impl ContractRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, handler: Arc<dyn ContractHandler>) -> Result<(), LedgerError> {
        if name.is_empty() || name.contains(':') {
            return Err(LedgerError::InvalidContractName(name.to_owned()));
        }
        if self.handlers.contains_key(name) {
            return Err(LedgerError::DuplicateContract(name.to_owned()));
        }
        self.handlers.insert(name.to_owned(), handler);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.handlers.keys().cloned().collect()
    }

    fn get(&self, name: &str) -> Result<&Arc<dyn ContractHandler>, LedgerError> {
        self.handlers
            .get(name)
            .ok_or_else(|| LedgerError::UnknownContract(name.to_owned()))
    }
}

impl fmt::Debug for ContractRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.handlers.keys()).finish()
    }
}

type Overlay = BTreeMap<String, Option<String>>;

/// A handler's view of the world state, confined to its own namespace.
///
/// Writes are buffered and only reach the world state when the enclosing
/// submit succeeds.
pub struct ContractContext<'a> {
    contract: &'a str,
    caller: Option<&'a str>,
    base: &'a WorldState,
    writes: &'a mut Overlay,
    registry: &'a ContractRegistry,
    depth: usize,
}

impl<'a> ContractContext<'a> {
    fn key(&self, key: &str) -> String {
        format!("{}:{}", self.contract, key)
    }

    /// Name of the contract this context belongs to.
    pub fn contract(&self) -> &str {
        self.contract
    }

    /// The contract that issued this call, when invoked from another contract.
    pub fn caller(&self) -> Option<&str> {
        self.caller
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let full = self.key(key);
        match self.writes.get(&full) {
            Some(v) => v.clone(),
            None => self.base.get(&full).map(str::to_owned),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn put(&mut self, key: &str, value: impl Into<String>) {
        let full = self.key(key);
        self.writes.insert(full, Some(value.into()));
    }

    pub fn delete(&mut self, key: &str) {
        let full = self.key(key);
        self.writes.insert(full, None);
    }

    /// All `(key, value)` pairs under `prefix` in this namespace, ascending,
    /// with the namespace stripped from the keys.
    pub fn scan_prefix(&self, prefix: &str) -> Vec<(String, String)> {
        let full = self.key(prefix);
        let strip = self.contract.len() + 1;
        let mut merged: BTreeMap<String, String> = self
            .base
            .range_prefix(&full)
            .map(|(k, v)| (k.to_owned(), v.to_owned()))
            .collect();
        for (k, v) in self
            .writes
            .range::<String, _>(full.clone()..)
            .take_while(|(k, _)| k.starts_with(&full))
        {
            match v {
                Some(v) => {
                    merged.insert(k.clone(), v.clone());
                }
                None => {
                    merged.remove(k);
                }
            }
        }
        merged.into_iter().map(|(k, v)| (k[strip..].to_owned(), v)).collect()
    }

    /// Call another contract within the same transaction. The callee sees
    /// this contract's name through [`ContractContext::caller`]. Its writes
    /// are kept only if it succeeds.
    pub fn invoke(&mut self, contract: &str, method: &str, args: &[String]) -> Result<String, ContractError> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(ContractError::rejected(
                "CONTRACT_ERROR",
                "cross-contract call depth exceeded",
            ));
        }
        let handler = self.registry.get(contract)?.clone();
        let mut writes = self.writes.clone();
        let result = {
            let mut nested = ContractContext {
                contract,
                caller: Some(self.contract),
                base: self.base,
                writes: &mut writes,
                registry: self.registry,
                depth: self.depth + 1,
            };
            handler.invoke(&mut nested, method, args)
        };
        if result.is_ok() {
            *self.writes = writes;
        }
        result.map_err(|e| match e {
            ContractError::UnknownMethod => {
                ContractError::rejected("UNKNOWN_METHOD", format!("unknown method {contract}.{method}"))
            }
            other => other,
        })
    }
}

fn execute(
    registry: &ContractRegistry,
    state: &WorldState,
    contract: &str,
    method: &str,
    args: &[String],
) -> Result<(String, Overlay), LedgerError> {
    let handler = registry.get(contract)?;
    let mut writes = Overlay::new();
    let mut ctx = ContractContext {
        contract,
        caller: None,
        base: state,
        writes: &mut writes,
        registry,
        depth: 0,
    };
    let result = handler
        .invoke(&mut ctx, method, args)
        .map_err(|e| LedgerError::from_contract(contract, method, e))?;
    Ok((result, writes))
}

#[derive(Debug, Default, Clone)]
struct Chain {
    state: WorldState,
    log: Vec<LedgerTransaction>,
}

impl Chain {
    fn head(&self) -> Digest {
        self.log.last().map_or(ZERO_DIGEST, |t| t.tx_hash)
    }

    /// Verify `tx` against the chain head, re-execute it and apply it.
    fn apply_verified(&mut self, registry: &ContractRegistry, tx: LedgerTransaction) -> Result<(), LedgerError> {
        let seq = self.log.len() as u64;
        let broken = |reason: String| LedgerError::ChainBroken { seq, reason };
        if tx.seq != seq {
            return Err(broken(format!("expected seq {seq}, found {}", tx.seq)));
        }
        if tx.prev_hash != self.head() {
            return Err(broken("prevHash does not match previous txHash".into()));
        }
        if !tx.hash_is_valid() {
            return Err(broken("txHash does not match record contents".into()));
        }
        let (result, writes) = execute(registry, &self.state, &tx.contract, &tx.method, &tx.args)
            .map_err(|e| broken(format!("re-execution failed: {e}")))?;
        if result_digest(&result) != tx.result_digest {
            return Err(broken("re-executed result digest differs".into()));
        }
        self.state.apply(writes);
        self.log.push(tx);
        Ok(())
    }
}

/// The simulated ledger. Share it behind an [`Arc`].
pub struct Ledger {
    registry: RwLock<ContractRegistry>,
    chain: RwLock<Chain>,
    commit: Mutex<Option<Journal>>,
    journal_path: Option<PathBuf>,
    journal_len: AtomicU64,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ledger")
            .field("contracts", &self.contracts())
            .field("height", &self.height())
            .field("journal", &self.journal_path)
            .finish()
    }
}

impl Ledger {
    pub fn new() -> Self {
        Self::with_registry(ContractRegistry::new())
    }

    pub fn with_registry(registry: ContractRegistry) -> Self {
        Self {
            registry: RwLock::new(registry),
            chain: RwLock::new(Chain::default()),
            commit: Mutex::new(None),
            journal_path: None,
            journal_len: AtomicU64::new(0),
        }
    }

    /// Rebuild a ledger by replaying `log` through `registry`.
    pub fn restore(
        registry: ContractRegistry,
        log: impl IntoIterator<Item = LedgerTransaction>,
    ) -> Result<Self, LedgerError> {
        let mut chain = Chain::default();
        for tx in log {
            chain.apply_verified(&registry, tx)?;
        }
        let ledger = Self::with_registry(registry);
        *ledger.chain.write().unwrap() = chain;
        Ok(ledger)
    }

    /// Load a persisted ledger file (read-only snapshot; later submits are
    /// not written back). Fails with `CHAIN_BROKEN` on any invalid record.
    pub fn load(path: impl AsRef<Path>, registry: ContractRegistry) -> Result<Self, LedgerError> {
        let text = std::fs::read_to_string(path)?;
        let mut log = Vec::new();
        for (line_no, line) in text.split_inclusive('\n').enumerate() {
            let Some(record) = line.strip_suffix('\n') else {
                return Err(LedgerError::ChainBroken {
                    seq: line_no as u64,
                    reason: "truncated record".into(),
                });
            };
            log.push(
                LedgerTransaction::from_json(record).map_err(|reason| LedgerError::ChainBroken {
                    seq: line_no as u64,
                    reason,
                })?,
            );
        }
        Self::restore(registry, log)
    }

    /// Open (or create) a ledger backed by an append-only file. Every
    /// successful submit is appended before it returns, and records appended
    /// by other processes are picked up before each operation.
    pub fn open(path: impl AsRef<Path>, registry: ContractRegistry) -> Result<Self, LedgerError> {
        let path = path.as_ref().to_path_buf();
        let journal = Journal::open(&path)?;
        let mut ledger = Self::with_registry(registry);
        ledger.journal_path = Some(path);
        *ledger.commit.get_mut().unwrap() = Some(journal);
        {
            let mut guard = ledger.commit.lock().unwrap();
            let journal = guard.as_mut().expect("journal just installed");
            journal.lock()?;
            let res = ledger.ingest(journal, true);
            journal.unlock()?;
            res?;
        }
        Ok(ledger)
    }

    /// Write the full log to `path`, one canonical JSON record per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LedgerError> {
        let chain = self.chain.read().unwrap();
        let mut out = String::new();
        for tx in &chain.log {
            out.push_str(&tx.to_json());
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn register_contract(&self, name: &str, handler: impl ContractHandler + 'static) -> Result<(), LedgerError> {
        self.registry.write().unwrap().register(name, Arc::new(handler))
    }

    pub fn contracts(&self) -> Vec<String> {
        self.registry.read().unwrap().names()
    }

    pub fn registry(&self) -> ContractRegistry {
        self.registry.read().unwrap().clone()
    }

    /// Execute a state-changing invocation and commit it.
    pub fn submit(&self, contract: &str, method: &str, args: &[String]) -> Result<String, LedgerError> {
        let mut guard = self.commit.lock().unwrap();
        match guard.as_mut() {
            None => self.commit_locked(None, contract, method, args),
            Some(journal) => {
                journal.lock()?;
                let res = self
                    .ingest(journal, true)
                    .and_then(|_| self.commit_locked(Some(journal), contract, method, args));
                journal.unlock()?;
                res
            }
        }
    }

    fn commit_locked(
        &self,
        journal: Option<&mut Journal>,
        contract: &str,
        method: &str,
        args: &[String],
    ) -> Result<String, LedgerError> {
        let registry = self.registry.read().unwrap();
        let mut chain = self.chain.write().unwrap();
        let (result, writes) = execute(&registry, &chain.state, contract, method, args)?;
        let tx = LedgerTransaction::seal(
            chain.log.len() as u64,
            contract,
            method,
            args,
            result_digest(&result),
            chain.head(),
        );
        if let Some(journal) = journal {
            let len = journal.append(&tx)?;
            self.journal_len.store(len, Ordering::Release);
        }
        chain.state.apply(writes);
        chain.log.push(tx);
        Ok(result)
    }

    /// Execute a read-only invocation. Nothing is logged and any writes the
    /// handler attempts are discarded.
    pub fn query(&self, contract: &str, method: &str, args: &[String]) -> Result<String, LedgerError> {
        self.refresh()?;
        let registry = self.registry.read().unwrap();
        let chain = self.chain.read().unwrap();
        execute(&registry, &chain.state, contract, method, args).map(|(result, _)| result)
    }

    /// Pick up records appended to the backing file by other writers.
    pub fn refresh(&self) -> Result<(), LedgerError> {
        let Some(path) = &self.journal_path else {
            return Ok(());
        };
        let on_disk = std::fs::metadata(path)?.len();
        if on_disk == self.journal_len.load(Ordering::Acquire) {
            return Ok(());
        }
        let mut guard = self.commit.lock().unwrap();
        let journal = guard.as_mut().expect("journaled ledger has a journal");
        self.ingest(journal, false)
    }

    fn ingest(&self, journal: &mut Journal, exclusive: bool) -> Result<(), LedgerError> {
        let registry = self.registry.read().unwrap();
        let mut chain = self.chain.write().unwrap();
        let base = chain.log.len() as u64;
        let (records, end) = journal.read_new(exclusive, base)?;
        for tx in records {
            chain.apply_verified(&registry, tx)?;
        }
        journal.advance_to(end);
        self.journal_len.store(end, Ordering::Release);
        Ok(())
    }

    /// Replay `log` from genesis through this ledger's contracts, without
    /// touching this ledger.
    pub fn replay(&self, log: &[LedgerTransaction]) -> Result<WorldState, LedgerError> {
        let registry = self.registry();
        let mut chain = Chain::default();
        for tx in log {
            chain.apply_verified(&registry, tx.clone())?;
        }
        Ok(chain.state)
    }

    pub fn state_root(&self) -> Digest {
        self.chain.read().unwrap().state.root()
    }

    pub fn world_state(&self) -> WorldState {
        self.chain.read().unwrap().state.clone()
    }

    pub fn log(&self) -> Vec<LedgerTransaction> {
        self.chain.read().unwrap().log.clone()
    }

    pub fn height(&self) -> u64 {
        self.chain.read().unwrap().log.len() as u64
    }
}
