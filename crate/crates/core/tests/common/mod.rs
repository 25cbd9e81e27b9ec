#![allow(dead_code)]

pub mod model;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tempfile::TempDir;
use xgate_core::canonical;
use xgate_core::connector::{ChainConnector, LedgerConnector};
use xgate_core::demo::KV_DEMO;
use xgate_core::ledger::{ContractContext, ContractError, Ledger};
use xgate_core::pki::{issue_cert, CertRole, CertificateAuthority, CA_CERT_FILE};
use xgate_core::policy::{AccessibleNetwork, AccessibleNetworks, PermittedMethods, PermittedNetworks};
use xgate_core::relay::{serve_on, Mediator, MethodRef, RelayConfig, RemoteCredentials, RunningServer};

pub const SERVICE: &str = "svc";

/// A stateful contract accepting any method name: each call bumps a
/// per-method counter and returns it with the method and args as JSON.
pub fn install_service(ledger: &Ledger) {
    ledger
        .register_contract(
            SERVICE,
            |ctx: &mut ContractContext<'_>, method: &str, args: &[String]| {
                let key = format!("calls/{method}");
                let calls: u64 = ctx.get(&key).map_or(0, |v| v.parse().unwrap()) + 1;
                ctx.put(&key, calls.to_string());
                Ok::<_, ContractError>(canonical::to_json(&serde_json::json!({
                    "args": args,
                    "calls": calls,
                    "method": method,
                })))
            },
        )
        .unwrap();
}

pub fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// One chain: its ledger, CA, relay config and (once started) relay.
pub struct Network {
    pub name: String,
    pub address: String,
    pub dir: PathBuf,
    pub ledger: Arc<Ledger>,
    pub connector: Arc<dyn ChainConnector>,
    pub ca: CertificateAuthority,
    pub config: RelayConfig,
    listener: Option<std::net::TcpListener>,
    pub server: Option<RunningServer>,
}

impl Network {
    pub fn new(root: &Path, name: &str) -> Self {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let address = listener.local_addr().unwrap().to_string();
        let dir = root.join(name);
        let ca = CertificateAuthority::generate(&format!("{name}-ca")).unwrap();
        ca.save(dir.join("ca")).unwrap();
        let server_dir = dir.join("server");
        let (cert, key) = issue_cert(&ca, &address, CertRole::Server)
            .unwrap()
            .write_to(&server_dir)
            .unwrap();
        let ledger = Arc::new(Ledger::with_registry(xgate_core::host_registry()));
        install_service(&ledger);
        let config = RelayConfig {
            listen_address: address.clone(),
            host_chain_ref: dir.join("chain.ledger").to_string_lossy().into_owned(),
            server_cert_path: cert,
            server_key_path: key,
            ca_cert_path: dir.join("ca").join(CA_CERT_FILE),
            remote_credentials: BTreeMap::new(),
        };
        Self {
            name: name.into(),
            address,
            dir,
            connector: Arc::new(LedgerConnector::owned(ledger.clone())),
            ledger,
            ca,
            config,
            listener: Some(listener),
            server: None,
        }
    }

    pub fn start(&mut self) {
        let listener = self.listener.take().expect("relay already started");
        self.server = Some(serve_on(listener, &self.config, self.connector.clone()).unwrap());
    }

    pub async fn stop(&mut self) {
        if let Some(server) = self.server.take() {
            server.shutdown().await;
        }
    }

    /// Issue a client certificate for `peer` (CN = peer's relay address)
    /// and install it in `peer`'s config as credentials for this network.
    pub fn issue_client_credentials(&self, peer: &mut Network) -> RemoteCredentials {
        let out = peer.dir.join(format!("creds-for-{}", self.name));
        let (cert, key) = issue_cert(&self.ca, &peer.address, CertRole::Client)
            .unwrap()
            .write_to(&out)
            .unwrap();
        let creds = RemoteCredentials {
            client_cert_path: cert,
            client_key_path: key,
            remote_ca_path: self.config.ca_cert_path.clone(),
        };
        peer.config
            .remote_credentials
            .insert(self.address.clone(), creds.clone());
        creds
    }

    pub fn mediator(&self) -> Mediator {
        Mediator::from_config(&self.config, self.connector.clone())
    }
}

/// `host` shares services with `caller`, following the registration steps:
/// the host issues the caller a client certificate, registers it as a
/// permitted network and grants methods; the caller registers the host as
/// an accessible network.
pub struct TwoNetworks {
    pub root: TempDir,
    pub host: Network,
    pub caller: Network,
    pub caller_id: String,
    pub remote: AccessibleNetwork,
    pub grants: Vec<MethodRef>,
}

/// `kv_demo` methods granted by every fixture.
pub const BASE_METHODS: [&str; 4] = ["hello", "echo", "put", "get"];

impl TwoNetworks {
    pub fn new() -> Self {
        let root = tempfile::tempdir().unwrap();
        let host = Network::new(root.path(), "net1");
        let mut caller = Network::new(root.path(), "net2");
        host.issue_client_credentials(&mut caller);
        let caller_id = PermittedNetworks(&*host.connector)
            .register(&caller.name, &caller.address)
            .unwrap();
        let remote_id = AccessibleNetworks(&*caller.connector)
            .register(&host.name, &host.address)
            .unwrap();
        let remote = AccessibleNetwork {
            id: remote_id,
            name: host.name.clone(),
            relay_address: host.address.clone(),
        };
        let mut nets = Self {
            root,
            host,
            caller,
            caller_id,
            remote,
            grants: Vec::new(),
        };
        for m in BASE_METHODS {
            nets.grant(KV_DEMO, m);
        }
        nets.host.start();
        nets
    }

    pub fn grant(&mut self, contract: &str, method: &str) -> MethodRef {
        let id = PermittedMethods(&*self.host.connector)
            .register(&self.caller_id, contract, method, "granted in test")
            .unwrap();
        let r = MethodRef {
            permitted_method_id: id,
            contract_name: contract.into(),
            method_name: method.into(),
        };
        self.grants.push(r.clone());
        r
    }

    pub fn grant_ref(&self, method: &str) -> MethodRef {
        self.grants
            .iter()
            .find(|g| g.contract_name == KV_DEMO && g.method_name == method)
            .cloned()
            .unwrap()
    }
}
