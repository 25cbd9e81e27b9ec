use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xgate_core::bench::TargetMethod;
use xgate_core::pki::CertRole;

#[derive(Debug, Parser)]
#[command(name = "xgate", version, about = "Policy-governed cross-chain relay")]
pub struct Cli {
    /// Relay configuration file (TOML, or JSON with a .json extension).
    #[arg(long, global = true, default_value = "relay.toml")]
    pub config: PathBuf,

    /// Print canonical JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the relay server.
    #[command(subcommand)]
    Relay(RelayCmd),
    /// Certificate authority and certificate issuance.
    #[command(subcommand)]
    Pki(PkiCmd),
    /// Manage the host chain's policy contracts.
    #[command(subcommand)]
    Policy(PolicyCmd),
    /// Talk to a remote relay through the mediator.
    #[command(subcommand)]
    Remote(RemoteCmd),
    /// Load generation against a relay or a synthetic target.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Debug, Subcommand)]
pub enum RelayCmd {
    /// Serve until interrupted.
    Serve,
}

#[derive(Debug, Subcommand)]
pub enum PkiCmd {
    #[command(subcommand)]
    Ca(CaCmd),
    /// Issue a leaf certificate signed by a CA directory.
    Issue {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        cn: String,
        #[arg(long)]
        role: CertRole,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CaCmd {
    /// Create a self-signed CA and write ca.crt and ca.key.
    Create {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum PolicyCmd {
    /// Remote networks this host may call.
    #[command(subcommand)]
    Accessible(NetworkCmd),
    /// Remote networks allowed to call this host.
    #[command(subcommand)]
    Permitted(NetworkCmd),
    /// Method grants to permitted networks.
    #[command(subcommand)]
    Methods(MethodsCmd),
}

#[derive(Debug, Subcommand)]
pub enum NetworkCmd {
    Add {
        #[arg(long)]
        name: String,
        #[arg(long)]
        address: String,
    },
    List,
    Get {
        #[arg(long)]
        address: String,
    },
    Remove {
        #[arg(long)]
        id: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum MethodsCmd {
    Add {
        #[arg(long)]
        network_id: String,
        #[arg(long)]
        contract: String,
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "")]
        description: String,
    },
    /// All grants, or only those of one network.
    List {
        #[arg(long)]
        network_id: Option<String>,
    },
    Remove {
        #[arg(long)]
        id: String,
    },
    Check {
        #[arg(long)]
        network_id: String,
        #[arg(long)]
        contract: String,
        #[arg(long)]
        method: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum RemoteCmd {
    /// How the remote relay sees this host.
    Info {
        #[arg(long)]
        network: String,
    },
    /// Methods the remote relay has granted to this host.
    Methods {
        #[arg(long)]
        network: String,
    },
    Invoke {
        #[arg(long)]
        network: String,
        #[arg(long)]
        method_id: String,
        #[arg(long)]
        contract: String,
        #[arg(long)]
        method: String,
        /// JSON array of strings.
        #[arg(long, default_value = "[]", value_parser = parse_args)]
        args: StringList,
    },
}

#[derive(Debug, Clone)]
pub struct StringList(pub Vec<String>);

fn parse_args(s: &str) -> Result<StringList, String> {
    serde_json::from_str(s)
        .map(StringList)
        .map_err(|e| format!("expected a JSON array of strings: {e}"))
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Relay address; must have a remoteCredentials entry in the config.
    #[arg(long, required_unless_present = "synthetic_ms")]
    pub target: Option<String>,

    #[arg(long, default_value_t = TargetMethod::GetPermittedNetworksByAddress)]
    pub method: TargetMethod,

    /// Address looked up by GetAccessibleNetworksByAddress; defaults to the
    /// config's listenAddress.
    #[arg(long)]
    pub probe: Option<String>,

    /// Use a synthetic target with this service time instead of a relay.
    #[arg(long, conflicts_with = "target")]
    pub synthetic_ms: Option<f64>,

    /// Concurrent service slots of the synthetic target; unbounded if unset.
    #[arg(long, requires = "synthetic_ms")]
    pub synthetic_slots: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Open,
    Closed,
    Paced,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    /// One fixed-rate run.
    Run {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        total: usize,
        #[arg(long, value_enum, default_value_t = Mode::Open)]
        mode: Mode,
    },
    /// Open-loop runs over ascending rates.
    SweepRates {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long)]
        total: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paced closed-loop runs over ascending worker counts.
    SweepWorkers {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        workers: Vec<usize>,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        total: usize,
        #[arg(long)]
        out: PathBuf,
    },
}
