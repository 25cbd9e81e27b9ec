//! In-memory reference model of the three policy contracts.

use std::collections::BTreeMap;

use proptest::prelude::*;
use xgate_core::connector::ChainConnector;
use xgate_core::policy::{
    AccessibleNetwork, AccessibleNetworks, PermittedMethod, PermittedMethods, PermittedNetwork, PermittedNetworks,
    PolicyError,
};

#[derive(Debug, Clone)]
pub enum Op {
    AddAccessible {
        name: String,
        address: String,
    },
    RemoveAccessible(String),
    GetAccessible(String),
    ListAccessible,
    AddPermitted {
        name: String,
        address: String,
    },
    RemovePermitted(String),
    GetPermitted(String),
    ListPermitted,
    AddGrant {
        network_id: String,
        contract: String,
        method: String,
        description: String,
    },
    RemoveGrant(String),
    GrantsFor(String),
    Check {
        network_id: String,
        contract: String,
        method: String,
    },
    ListGrants,
}

impl Op {
    pub fn is_mutation(&self) -> bool {
        matches!(
            self,
            Op::AddAccessible { .. }
                | Op::RemoveAccessible(_)
                | Op::AddPermitted { .. }
                | Op::RemovePermitted(_)
                | Op::AddGrant { .. }
                | Op::RemoveGrant(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Id(String),
    Unit,
    Bool(bool),
    Accessible(AccessibleNetwork),
    Permitted(PermittedNetwork),
    AccessibleList(Vec<AccessibleNetwork>),
    PermittedList(Vec<PermittedNetwork>),
    Grants(Vec<PermittedMethod>),
    Error(String),
}

fn err(code: &str) -> Outcome {
    Outcome::Error(code.to_owned())
}

#[derive(Debug, Default, Clone)]
pub struct PolicyModel {
    next_an: u64,
    next_pn: u64,
    next_pm: u64,
    pub accessible: BTreeMap<String, AccessibleNetwork>,
    pub permitted: BTreeMap<String, PermittedNetwork>,
    pub grants: BTreeMap<String, PermittedMethod>,
}

impl PolicyModel {
    pub fn apply(&mut self, op: &Op) -> Outcome {
        match op {
            Op::AddAccessible { name, address } => {
                if name.is_empty() || address.is_empty() {
                    return err("INVALID_ARGUMENT");
                }
                if self.accessible.values().any(|r| &r.relay_address == address) {
                    return err("DUPLICATE_ADDRESS");
                }
                self.next_an += 1;
                let id = format!("an-{:08}", self.next_an);
                self.accessible.insert(
                    id.clone(),
                    AccessibleNetwork {
                        id: id.clone(),
                        name: name.clone(),
                        relay_address: address.clone(),
                    },
                );
                Outcome::Id(id)
            }
            Op::RemoveAccessible(id) => match self.accessible.remove(id) {
                Some(_) => Outcome::Unit,
                None => err("NOT_FOUND"),
            },
            Op::GetAccessible(address) => self
                .accessible
                .values()
                .find(|r| &r.relay_address == address)
                .map_or_else(|| err("NOT_FOUND"), |r| Outcome::Accessible(r.clone())),
            Op::ListAccessible => Outcome::AccessibleList(self.accessible.values().cloned().collect()),
            Op::AddPermitted { name, address } => {
                if name.is_empty() || address.is_empty() {
                    return err("INVALID_ARGUMENT");
                }
                if self.permitted.values().any(|r| &r.address == address) {
                    return err("DUPLICATE_ADDRESS");
                }
                self.next_pn += 1;
                let id = format!("pn-{:08}", self.next_pn);
                self.permitted.insert(
                    id.clone(),
                    PermittedNetwork {
                        id: id.clone(),
                        name: name.clone(),
                        address: address.clone(),
                    },
                );
                Outcome::Id(id)
            }
            Op::RemovePermitted(id) => match self.permitted.remove(id) {
                Some(_) => {
                    self.grants.retain(|_, g| &g.network_id != id);
                    Outcome::Unit
                }
                None => err("NOT_FOUND"),
            },
            Op::GetPermitted(address) => self
                .permitted
                .values()
                .find(|r| &r.address == address)
                .map_or_else(|| err("NOT_FOUND"), |r| Outcome::Permitted(r.clone())),
            Op::ListPermitted => Outcome::PermittedList(self.permitted.values().cloned().collect()),
            Op::AddGrant {
                network_id,
                contract,
                method,
                description,
            } => {
                if network_id.is_empty() || contract.is_empty() || method.is_empty() {
                    return err("INVALID_ARGUMENT");
                }
                if !self.permitted.contains_key(network_id) {
                    return err("NOT_FOUND");
                }
                if self.check(network_id, contract, method) {
                    return err("DUPLICATE_GRANT");
                }
                self.next_pm += 1;
                let id = format!("pm-{:08}", self.next_pm);
                self.grants.insert(
                    id.clone(),
                    PermittedMethod {
                        id: id.clone(),
                        network_id: network_id.clone(),
                        contract_name: contract.clone(),
                        method_name: method.clone(),
                        description: description.clone(),
                    },
                );
                Outcome::Id(id)
            }
            Op::RemoveGrant(id) => match self.grants.remove(id) {
                Some(_) => Outcome::Unit,
                None => err("NOT_FOUND"),
            },
            Op::GrantsFor(network_id) => Outcome::Grants(
                self.grants
                    .values()
                    .filter(|g| &g.network_id == network_id)
                    .cloned()
                    .collect(),
            ),
            Op::Check {
                network_id,
                contract,
                method,
            } => Outcome::Bool(self.check(network_id, contract, method)),
            Op::ListGrants => Outcome::Grants(self.grants.values().cloned().collect()),
        }
    }

    fn check(&self, network_id: &str, contract: &str, method: &str) -> bool {
        self.grants
            .values()
            .any(|g| g.network_id == network_id && g.contract_name == contract && g.method_name == method)
    }

    /// Uniqueness and referential integrity over the model's tables.
    pub fn assert_invariants(&self) {
        let mut seen = std::collections::BTreeSet::new();
        assert!(self.accessible.values().all(|r| seen.insert(r.relay_address.clone())));
        let mut seen = std::collections::BTreeSet::new();
        assert!(self.permitted.values().all(|r| seen.insert(r.address.clone())));
        let mut seen = std::collections::BTreeSet::new();
        for g in self.grants.values() {
            assert!(seen.insert((&g.network_id, &g.contract_name, &g.method_name)));
            assert!(self.permitted.contains_key(&g.network_id));
        }
    }
}

fn outcome<T>(r: Result<T, PolicyError>, f: impl FnOnce(T) -> Outcome) -> Outcome {
    match r {
        Ok(v) => f(v),
        Err(e) => Outcome::Error(e.code().to_owned()),
    }
}

/// Run `op` against the deployed contracts.
pub fn apply_real(conn: &dyn ChainConnector, op: &Op) -> Outcome {
    let an = AccessibleNetworks(conn);
    let pn = PermittedNetworks(conn);
    let pm = PermittedMethods(conn);
    match op {
        Op::AddAccessible { name, address } => outcome(an.register(name, address), Outcome::Id),
        Op::RemoveAccessible(id) => outcome(an.remove(id), |_| Outcome::Unit),
        Op::GetAccessible(address) => outcome(an.get_by_address(address), Outcome::Accessible),
        Op::ListAccessible => outcome(an.list(), Outcome::AccessibleList),
        Op::AddPermitted { name, address } => outcome(pn.register(name, address), Outcome::Id),
        Op::RemovePermitted(id) => outcome(pn.remove(id), |_| Outcome::Unit),
        Op::GetPermitted(address) => outcome(pn.get_by_address(address), Outcome::Permitted),
        Op::ListPermitted => outcome(pn.list(), Outcome::PermittedList),
        Op::AddGrant {
            network_id,
            contract,
            method,
            description,
        } => outcome(pm.register(network_id, contract, method, description), Outcome::Id),
        Op::RemoveGrant(id) => outcome(pm.remove(id), |_| Outcome::Unit),
        Op::GrantsFor(network_id) => outcome(pm.get_by_network_id(network_id), Outcome::Grants),
        Op::Check {
            network_id,
            contract,
            method,
        } => outcome(pm.check_permitted(network_id, contract, method), Outcome::Bool),
        Op::ListGrants => outcome(pm.list(), Outcome::Grants),
    }
}

fn pick(pool: &'static [&'static str]) -> impl Strategy<Value = String> {
    proptest::sample::select(pool).prop_map(str::to_owned)
}

fn id(prefix: &'static str) -> impl Strategy<Value = String> {
    (1u32..=30).prop_map(move |k| format!("{prefix}-{k:08}"))
}

fn name() -> impl Strategy<Value = String> {
    prop_oneof![
        12 => (1u32..=4).prop_map(|k| format!("net{k}")),
        1 => Just(String::new()),
    ]
}

/// Mostly distinct-enough addresses, a few exotic forms, rarely empty.
fn address() -> impl Strategy<Value = String> {
    prop_oneof![
        10 => (1u32..=24).prop_map(|k| format!("10.0.0.{k}:{}", 7050 + k)),
        2 => pick(&["relay.net4:7054", "[::1]:7055", "127.0.0.1:9000"]),
        1 => Just(String::new()),
    ]
}

const CONTRACTS: &[&str] = &["kv_demo", "kv_demo", "svc", "svc", ""];
const METHODS: &[&str] = &["get", "put", "hello", "echo", "Register", "List", "transfer", "balance"];

/// Operations over small value pools so that duplicates, misses and
/// cascades all occur often.
pub fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (name(), address()).prop_map(|(name, address)| Op::AddAccessible { name, address }),
        3 => id("an").prop_map(Op::RemoveAccessible),
        2 => address().prop_map(Op::GetAccessible),
        1 => Just(Op::ListAccessible),
        4 => (name(), address()).prop_map(|(name, address)| Op::AddPermitted { name, address }),
        2 => id("pn").prop_map(Op::RemovePermitted),
        2 => address().prop_map(Op::GetPermitted),
        1 => Just(Op::ListPermitted),
        6 => (id("pn"), pick(CONTRACTS), pick(METHODS), pick(&["", "read access"]))
            .prop_map(|(network_id, contract, method, description)| Op::AddGrant {
                network_id,
                contract,
                method,
                description,
            }),
        3 => id("pm").prop_map(Op::RemoveGrant),
        2 => id("pn").prop_map(Op::GrantsFor),
        3 => (id("pn"), pick(CONTRACTS), pick(METHODS))
            .prop_map(|(network_id, contract, method)| Op::Check { network_id, contract, method }),
        1 => Just(Op::ListGrants),
    ]
}

/// `n` operations drawn deterministically from `seed`.
pub fn seeded_ops(seed: u64, n: usize) -> Vec<Op> {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let mut seed_bytes = [0u8; 32];
    seed_bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &seed_bytes);
    let mut runner = TestRunner::new_with_rng(Config::default(), rng);
    let strategy = proptest::collection::vec(op_strategy(), n);
    strategy.new_tree(&mut runner).unwrap().current()
}
