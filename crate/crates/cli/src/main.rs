use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use serde_json::{json, Value};
use tracing_subscriber::EnvFilter;
use xgate_core::bench::{self, BenchError, LoadMetrics, LoadMode, LoadSpec, LoadTarget, RelayTarget, SyntheticTarget};
use xgate_core::pki::{self, CertificateAuthority, PkiError, CA_CERT_FILE, CA_KEY_FILE};
use xgate_core::policy::{AccessibleNetworks, PermittedMethods, PermittedNetworks, PolicyError};
use xgate_core::relay::{self, Mediator, MethodRef, RelayConfig, RelayError};
use xgate_core::{ChainConnector, LedgerConnector};

mod cli;
mod output;

use cli::{
    BenchCmd, CaCmd, Cli, Command, MethodsCmd, Mode, NetworkCmd, PkiCmd, PolicyCmd, RelayCmd, RemoteCmd, TargetArgs,
};
use output::Output;

#[derive(Debug)]
struct CliError {
    code: String,
    message: String,
}

macro_rules! coded {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError { code: e.code().to_owned(), message: e.to_string() }
            }
        }
    )*};
}

coded!(RelayError, PolicyError, PkiError, BenchError);

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(&cli)) {
        Ok(out) => {
            let text = out.render(cli.json);
            if !text.is_empty() {
                println!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if cli.json {
                println!(
                    "{}",
                    xgate_core::canonical::value_to_json(&json!({"error": {"code": e.code, "msg": e.message}}))
                );
            }
            eprintln!("error[{}]: {}", e.code, e.message);
            ExitCode::from(1)
        }
    }
}

async fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Relay(RelayCmd::Serve) => serve(&cli.config).await,
        Command::Pki(cmd) => pki_cmd(cmd),
        Command::Policy(cmd) => {
            let (_, conn) = host(&cli.config)?;
            policy_cmd(&conn, cmd)
        }
        Command::Remote(cmd) => remote_cmd(&cli.config, cmd).await,
        Command::Bench(cmd) => bench_cmd(&cli.config, cmd).await,
    }
}

fn host(config: &Path) -> Result<(RelayConfig, LedgerConnector)> {
    let config = RelayConfig::load(config)?;
    let ledger = config.open_host_ledger()?;
    Ok((config, LedgerConnector::owned(ledger)))
}

async fn serve(config_path: &Path) -> Result<Output> {
    let (config, conn) = host(config_path)?;
    let server = relay::serve(&config, Arc::new(conn)).await?;
    println!("relay listening on {}", server.local_addr());
    tokio::signal::ctrl_c().await.map_err(|e| CliError {
        code: "IO_ERROR".into(),
        message: e.to_string(),
    })?;
    let handled = server.requests_handled();
    server.shutdown().await;
    Ok(Output::new(
        format!("served {handled} requests"),
        json!({"requestsHandled": handled}),
    ))
}

fn pki_cmd(cmd: &PkiCmd) -> Result<Output> {
    match cmd {
        PkiCmd::Ca(CaCmd::Create { name, out }) => {
            pki::create_ca(name, out)?;
            let (cert, key) = (out.join(CA_CERT_FILE), out.join(CA_KEY_FILE));
            Ok(Output::new(
                format!("created CA {name}\ncert: {}\nkey:  {}", cert.display(), key.display()),
                json!({"certPath": cert, "keyPath": key, "name": name}),
            ))
        }
        PkiCmd::Issue { ca, cn, role, out } => {
            let ca = CertificateAuthority::load(ca)?;
            let (cert, key) = pki::issue_cert(&ca, cn, *role)?.write_to(out)?;
            Ok(Output::new(
                format!(
                    "issued {role} certificate for {cn}\ncert: {}\nkey:  {}",
                    cert.display(),
                    key.display()
                ),
                json!({"certPath": cert, "commonName": cn, "keyPath": key, "role": role.as_str()}),
            ))
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("policy records serialize")
}

fn added(id: String) -> Output {
    Output::new(id.clone(), json!({"id": id}))
}

fn removed(id: &str) -> Output {
    Output::new(format!("removed {id}"), json!({"removed": id}))
}

fn policy_cmd(conn: &dyn ChainConnector, cmd: &PolicyCmd) -> Result<Output> {
    Ok(match cmd {
        PolicyCmd::Accessible(cmd) => {
            let an = AccessibleNetworks(conn);
            match cmd {
                NetworkCmd::Add { name, address } => added(an.register(name, address)?),
                NetworkCmd::List => {
                    let rows = an.list()?;
                    Output::new(output::accessible_table(&rows), to_value(&rows))
                }
                NetworkCmd::Get { address } => {
                    let row = an.get_by_address(address)?;
                    Output::new(output::accessible_table(std::slice::from_ref(&row)), to_value(&row))
                }
                NetworkCmd::Remove { id } => {
                    an.remove(id)?;
                    removed(id)
                }
            }
        }
        PolicyCmd::Permitted(cmd) => {
            let pn = PermittedNetworks(conn);
            match cmd {
                NetworkCmd::Add { name, address } => added(pn.register(name, address)?),
                NetworkCmd::List => {
                    let rows = pn.list()?;
                    Output::new(output::permitted_table(&rows), to_value(&rows))
                }
                NetworkCmd::Get { address } => {
                    let row = pn.get_by_address(address)?;
                    Output::new(output::permitted_table(std::slice::from_ref(&row)), to_value(&row))
                }
                NetworkCmd::Remove { id } => {
                    pn.remove(id)?;
                    removed(id)
                }
            }
        }
        PolicyCmd::Methods(cmd) => {
            let pm = PermittedMethods(conn);
            match cmd {
                MethodsCmd::Add {
                    network_id,
                    contract,
                    method,
                    description,
                } => added(pm.register(network_id, contract, method, description)?),
                MethodsCmd::List { network_id } => {
                    let rows = match network_id {
                        Some(id) => pm.get_by_network_id(id)?,
                        None => pm.list()?,
                    };
                    Output::new(output::methods_table(&rows), to_value(&rows))
                }
                MethodsCmd::Remove { id } => {
                    pm.remove(id)?;
                    removed(id)
                }
                MethodsCmd::Check {
                    network_id,
                    contract,
                    method,
                } => {
                    let ok = pm.check_permitted(network_id, contract, method)?;
                    Output::new(ok.to_string(), json!(ok))
                }
            }
        }
    })
}

async fn remote_cmd(config_path: &Path, cmd: &RemoteCmd) -> Result<Output> {
    let (config, conn) = host(config_path)?;
    let mediator = Mediator::from_config(&config, Arc::new(conn));
    match cmd {
        RemoteCmd::Info { network } => {
            let remote = mediator.get_accessible_network(network)?;
            let me = mediator.fetch_permitted_network_info(&remote).await?;
            Ok(Output::new(
                output::permitted_table(std::slice::from_ref(&me)),
                to_value(&me),
            ))
        }
        RemoteCmd::Methods { network } => {
            let remote = mediator.get_accessible_network(network)?;
            let me = mediator.fetch_permitted_network_info(&remote).await?;
            let rows = mediator.fetch_permitted_methods(&remote, &me.id).await?;
            Ok(Output::new(output::methods_table(&rows), to_value(&rows)))
        }
        RemoteCmd::Invoke {
            network,
            method_id,
            contract,
            method,
            args,
        } => {
            let remote = mediator.get_accessible_network(network)?;
            let target = MethodRef {
                permitted_method_id: method_id.clone(),
                contract_name: contract.clone(),
                method_name: method.clone(),
            };
            let result = mediator.invoke_remote(&remote, &target, &args.0).await?;
            Ok(Output::new(result.clone(), json!({"result": result})))
        }
    }
}

fn build_target(config_path: &Path, args: &TargetArgs) -> Result<Box<dyn LoadTarget>> {
    if let Some(ms) = args.synthetic_ms {
        if !(ms.is_finite() && ms >= 0.0) {
            return Err(BenchError::InvalidSpec(format!("synthetic service time {ms} ms")).into());
        }
        let service = Duration::from_secs_f64(ms / 1e3);
        return Ok(Box::new(SyntheticTarget::new(service, args.synthetic_slots)));
    }
    let address = args
        .target
        .as_deref()
        .expect("clap requires --target without --synthetic-ms");
    let config = RelayConfig::load(config_path)?;
    let creds = config.credentials_for(address)?.clone();
    let probe = args.probe.clone().unwrap_or_else(|| config.listen_address.clone());
    Ok(Box::new(RelayTarget::new(address, creds).with_probe_address(probe)))
}

fn metrics_output(m: &LoadMetrics) -> Output {
    let rows = vec![
        vec!["offered rate (tps)".into(), format!("{:.3}", m.offered_rate)],
        vec!["throughput (tps)".into(), format!("{:.3}", m.achieved_throughput)],
        vec!["avg latency (ms)".into(), format!("{:.3}", m.avg_latency_ms)],
        vec!["p95 latency (ms)".into(), format!("{:.3}", m.latency_p95_ms)],
        vec!["min latency (ms)".into(), format!("{:.3}", m.min_latency_ms)],
        vec!["process time (s)".into(), format!("{:.3}", m.process_time_s)],
        vec!["completed".into(), m.completed.to_string()],
        vec!["failed".into(), m.failed.to_string()],
    ];
    Output::new(
        output::table(&["METRIC", "VALUE"], &rows),
        json!({
            "achievedThroughput": m.achieved_throughput,
            "avgLatencyMs": m.avg_latency_ms,
            "completed": m.completed,
            "failed": m.failed,
            "latencyP95Ms": m.latency_p95_ms,
            "minLatencyMs": m.min_latency_ms,
            "offeredRate": m.offered_rate,
            "processTimeS": m.process_time_s,
        }),
    )
}

async fn bench_cmd(config_path: &Path, cmd: &BenchCmd) -> Result<Output> {
    match cmd {
        BenchCmd::Run {
            target,
            rate,
            workers,
            total,
            mode,
        } => {
            let mode = match mode {
                Mode::Open => LoadMode::OpenLoop,
                Mode::Closed => LoadMode::ClosedLoop,
                Mode::Paced => LoadMode::PacedClosedLoop,
            };
            let spec = LoadSpec::new(target.method, *rate, *workers, *total).with_mode(mode);
            let t = build_target(config_path, target)?;
            Ok(metrics_output(&bench::run_load(&spec, t.as_ref()).await?))
        }
        BenchCmd::SweepRates {
            target,
            rates,
            workers,
            total,
            out,
        } => {
            let base = LoadSpec::new(target.method, rates[0], *workers, *total);
            let t = build_target(config_path, target)?;
            let rep = bench::sweep_rates(rates, &base, t.as_ref()).await?;
            let summary = bench::report(&rep, out)?;
            Ok(Output::new(summary.clone(), json!({"csv": out, "summary": summary})))
        }
        BenchCmd::SweepWorkers {
            target,
            workers,
            rate,
            total,
            out,
        } => {
            let base = LoadSpec::new(target.method, *rate, workers[0], *total);
            let t = build_target(config_path, target)?;
            let rep = bench::sweep_workers(workers, &base, t.as_ref()).await?;
            let summary = bench::report(&rep, out)?;
            Ok(Output::new(summary.clone(), json!({"csv": out, "summary": summary})))
        }
    }
}
