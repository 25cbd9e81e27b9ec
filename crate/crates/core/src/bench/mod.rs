//! Fixed-rate load generation against relay lookups, rate and worker
//! sweeps, saturation detection and CSV reporting.

mod load;
mod sweep;
mod target;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use load::{run_load, LoadMetrics};
pub use sweep::{report, sweep_rates, sweep_workers, SaturationReport, SweepAxis, SweepPoint, CSV_HEADER};
pub use target::{BoxFuture, LoadTarget, RelayTarget, SyntheticTarget, WorkerChannel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("invalid load spec: {0}")]
    InvalidSpec(String),
    #[error("aborted: {failed} of {total} requests failed (first error: {first_error})")]
    Aborted {
        failed: usize,
        total: usize,
        first_error: String,
    },
    #[error("target unavailable: {0}")]
    Target(String),
    #[error("io error: {0}")]
    Io(String),
}

impl BenchError {
    pub fn code(&self) -> &str {
        match self {
            BenchError::InvalidSpec(_) => "INVALID_ARGUMENT",
            BenchError::Aborted { .. } => "ABORTED",
            BenchError::Target(_) => "TARGET_UNAVAILABLE",
            BenchError::Io(_) => "IO_ERROR",
        }
    }
}

/// The three policy lookups exercised through the relay path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetMethod {
    GetAccessibleNetworksByAddress,
    GetPermittedNetworksByAddress,
    GetPermittedMethodsByNetworkId,
}

impl TargetMethod {
    pub const ALL: [TargetMethod; 3] = [
        TargetMethod::GetAccessibleNetworksByAddress,
        TargetMethod::GetPermittedNetworksByAddress,
        TargetMethod::GetPermittedMethodsByNetworkId,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetMethod::GetAccessibleNetworksByAddress => "GetAccessibleNetworksByAddress",
            TargetMethod::GetPermittedNetworksByAddress => "GetPermittedNetworksByAddress",
            TargetMethod::GetPermittedMethodsByNetworkId => "GetPermittedMethodsByNetworkId",
        }
    }
}

impl fmt::Display for TargetMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetMethod {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| BenchError::InvalidSpec(format!("unknown target method {s}")))
    }
}

/// How senders are paced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Requests fire on the global schedule regardless of responses.
    #[default]
    OpenLoop,
    /// Each worker waits for its response before sending again.
    ClosedLoop,
    /// Closed loop, but never ahead of the open-loop schedule.
    PacedClosedLoop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpec {
    pub target_method: TargetMethod,
    pub send_rate: f64,
    pub workers: usize,
    pub total_tx: usize,
    pub mode: LoadMode,
}

impl LoadSpec {
    pub fn new(target_method: TargetMethod, send_rate: f64, workers: usize, total_tx: usize) -> Self {
        Self {
            target_method,
            send_rate,
            workers,
            total_tx,
            mode: LoadMode::OpenLoop,
        }
    }

    pub fn with_mode(mut self, mode: LoadMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.send_rate.is_finite() && self.send_rate > 0.0) {
            return Err(BenchError::InvalidSpec(format!(
                "sendRate must be > 0, got {}",
                self.send_rate
            )));
        }
        if self.workers == 0 {
            return Err(BenchError::InvalidSpec("workers must be positive".into()));
        }
        if self.total_tx < self.workers {
            return Err(BenchError::InvalidSpec(format!(
                "totalTx {} is less than workers {}",
                self.total_tx, self.workers
            )));
        }
        Ok(())
    }
}
