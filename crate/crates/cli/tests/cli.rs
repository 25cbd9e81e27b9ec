use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use xgate_core::canonical;
use xgate_core::policy::{PermittedMethods, PermittedNetworks};
use xgate_core::relay::RelayConfig;
use xgate_core::LedgerConnector;

/// Run `xgate` with whitespace-separated arguments.
fn xgate(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xgate"))
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .expect("run xgate")
}

fn ok(dir: &Path, args: &str) -> String {
    let out = xgate(dir, args);
    assert!(
        out.status.success(),
        "xgate {args} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap().trim_end().to_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn free_address() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().to_string()
}

fn stem(address: &str) -> String {
    address.replace(':', "_")
}

/// A network directory with its own CA, server certificate and config.
struct Net {
    dir: PathBuf,
    address: String,
}

impl Net {
    fn new(root: &Path, name: &str) -> Self {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let address = free_address();
        ok(&dir, &format!("pki ca create --name {name} --out ca"));
        ok(
            &dir,
            &format!("pki issue --ca ca --cn {address} --role server --out certs"),
        );
        let s = stem(&address);
        std::fs::write(
            dir.join("relay.toml"),
            format!(
                "listenAddress = \"{address}\"\nhostChainRef = \"chain.ledger\"\n\
                 serverCertPath = \"certs/{s}.crt\"\nserverKeyPath = \"certs/{s}.key\"\n\
                 caCertPath = \"ca/ca.crt\"\n"
            ),
        )
        .unwrap();
        Self { dir, address }
    }

    fn run(&self, args: &str) -> Output {
        xgate(&self.dir, args)
    }

    fn ok(&self, args: &str) -> String {
        ok(&self.dir, args)
    }

    fn config(&self) -> RelayConfig {
        RelayConfig::load(self.dir.join("relay.toml")).unwrap()
    }

    /// Issue `peer` a client certificate and add it to the peer's config.
    fn issue_client(&self, peer: &Net) {
        let out = format!("../{}/creds", peer.dir.file_name().unwrap().to_str().unwrap());
        self.ok(&format!(
            "pki issue --ca ca --cn {} --role client --out {out}",
            peer.address
        ));
        let s = stem(&peer.address);
        let own = self.dir.file_name().unwrap().to_str().unwrap();
        let mut toml = std::fs::read_to_string(peer.dir.join("relay.toml")).unwrap();
        toml.push_str(&format!(
            "\n[remoteCredentials.\"{}\"]\nclientCertPath = \"creds/{s}.crt\"\n\
             clientKeyPath = \"creds/{s}.key\"\nremoteCaPath = \"../{own}/ca/ca.crt\"\n",
            self.address
        ));
        std::fs::write(peer.dir.join("relay.toml"), toml).unwrap();
    }

    fn serve(&self) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_xgate"))
            .current_dir(&self.dir)
            .args(["relay", "serve"])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        assert!(line.starts_with("relay listening on"), "{line:?}");
        Server(child)
    }
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        "",
        "policy",
        "policy permitted add --name n",
        "pki issue --ca x --cn y --role admin --out z",
        "remote invoke --network a --method-id m --contract c --method m --args [1]",
        "bench run --rate 10 --total 5",
        "bench run --synthetic-ms 1 --rate 10 --total 5 --mode sideways",
        "--bogus",
    ] {
        let out = xgate(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_config_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = xgate(dir.path(), "policy permitted list");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("CONFIG_ERROR"));
}

#[test]
fn policy_commands_match_direct_queries() {
    let root = tempfile::tempdir().unwrap();
    let net = Net::new(root.path(), "net1");
    assert_eq!(
        net.ok("policy permitted add --name net2 --address 10.0.0.2:7052"),
        "pn-00000001"
    );
    assert_eq!(
        net.ok("policy permitted add --name net3 --address 10.0.0.3:7053"),
        "pn-00000002"
    );
    let dup = net.run("policy permitted add --name again --address 10.0.0.2:7052");
    assert_eq!(dup.status.code(), Some(1));
    assert!(stderr(&dup).contains("DUPLICATE_ADDRESS"));

    for (network, method) in [("pn-00000001", "get"), ("pn-00000001", "put"), ("pn-00000002", "get")] {
        net.ok(&format!(
            "policy methods add --network-id {network} --contract kv_demo --method {method}"
        ));
    }
    let check = "policy methods check --network-id pn-00000002 --contract kv_demo --method";
    assert_eq!(net.ok(&format!("{check} get")), "true");
    assert_eq!(net.ok(&format!("{check} put")), "false");
    net.ok("policy methods remove --id pm-00000002");

    let conn = LedgerConnector::owned(net.config().open_host_ledger().unwrap());
    let pm = PermittedMethods(&conn);
    assert_eq!(
        net.ok("--json policy methods list"),
        canonical::to_json(&pm.list().unwrap())
    );
    assert_eq!(
        net.ok("--json policy methods list --network-id pn-00000001"),
        canonical::to_json(&pm.get_by_network_id("pn-00000001").unwrap())
    );
    assert_eq!(
        net.ok("--json policy permitted get --address 10.0.0.3:7053"),
        canonical::to_json(&PermittedNetworks(&conn).get_by_address("10.0.0.3:7053").unwrap())
    );

    net.ok("policy permitted remove --id pn-00000001");
    assert_eq!(net.ok("--json policy methods list --network-id pn-00000001"), "[]");
    let table = net.ok("policy permitted list");
    assert_eq!(table.lines().count(), 2, "{table}");
    assert!(table.contains("pn-00000002") && !table.contains("pn-00000001"));
}

#[test]
fn two_relays_through_the_cli() {
    let root = tempfile::tempdir().unwrap();
    let host = Net::new(root.path(), "host");
    let caller = Net::new(root.path(), "caller");
    host.issue_client(&caller);
    let id = host.ok(&format!(
        "policy permitted add --name caller --address {}",
        caller.address
    ));
    caller.ok(&format!("policy accessible add --name host --address {}", host.address));
    let _server = host.serve();

    let grant = |method: &str| {
        host.ok(&format!(
            "policy methods add --network-id {id} --contract kv_demo --method {method}"
        ))
    };
    let (put, get) = (grant("put"), grant("get"));

    let info = caller.ok(&format!("--json remote info --network {}", host.address));
    assert_eq!(
        info,
        format!(r#"{{"address":"{}","id":"{id}","name":"caller"}}"#, caller.address)
    );
    let methods = caller.ok(&format!("remote methods --network {}", host.address));
    assert!(methods.contains(&put) && methods.contains(&get), "{methods}");

    let invoke = |grant: &str, method: &str, args: &str| {
        caller.run(&format!(
            "--json remote invoke --network {} --method-id {grant} --contract kv_demo --method {method} --args {args}",
            host.address
        ))
    };
    assert!(invoke(&put, "put", r#"["color","blue"]"#).status.success());
    let out = invoke(&get, "get", r#"["color"]"#);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim_end(), r#"{"result":"blue"}"#);

    let denied = invoke(&put, "hello", "[]");
    assert_eq!(denied.status.code(), Some(1));
    assert!(stderr(&denied).contains("METHOD_NOT_PERMITTED"));
    assert!(String::from_utf8_lossy(&denied.stdout).contains(r#""code":"METHOD_NOT_PERMITTED""#));

    let unknown = caller.run("remote info --network 10.9.9.9:1");
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).contains("NOT_FOUND"));

    let bench = caller.ok(&format!(
        "--json bench run --target {} --method GetPermittedMethodsByNetworkId --rate 200 --workers 2 --total 40",
        host.address
    ));
    let m: serde_json::Value = serde_json::from_str(&bench).unwrap();
    assert_eq!(
        (m["completed"].as_u64(), m["failed"].as_u64()),
        (Some(40), Some(0)),
        "{bench}"
    );
}

#[test]
fn synthetic_sweep_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let summary = ok(
        dir.path(),
        "bench sweep-workers --synthetic-ms 5 --synthetic-slots 2 --workers 1,2,4 --rate 1000 --total 60 --out w.csv",
    );
    assert_eq!(summary, "workers sweep: saturation at 2 workers");
    let csv = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let written = std::fs::read_to_string(dir.path().join("w.csv.summary.txt")).unwrap();
    assert_eq!(written.trim_end(), summary);
}
