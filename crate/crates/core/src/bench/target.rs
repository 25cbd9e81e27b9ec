use std::future::Future;
use std::pin::Pin;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::Value;

use super::{BenchError, TargetMethod};
use crate::policy::{ACCESSIBLE_NETWORKS, GET_BY_ADDRESS};
use crate::relay::{MethodRef, RelayClient, RemoteCredentials};

pub type BoxFuture<'a, T> = Pin<Box<dyn Future<Output = T> + Send + 'a>>;

/// Something a load generator can drive.
pub trait LoadTarget: Send + Sync {
    /// A per-worker channel; relay targets open one connection per worker.
    fn open_worker(&self, method: TargetMethod) -> BoxFuture<'_, Result<Arc<dyn WorkerChannel>, BenchError>>;
}

pub trait WorkerChannel: Send + Sync {
    /// Issue one request; resolves when the response arrives.
    fn request(&self) -> BoxFuture<'static, Result<(), String>>;
}

const COARSE_MARGIN: Duration = Duration::from_millis(2);

/// Sleep until `deadline` with sub-millisecond accuracy: a timer sleep for
/// the bulk, then a short blocking sleep for the remainder.
pub(crate) async fn sleep_precise(deadline: Instant) {
    if let Some(coarse) = deadline.checked_sub(COARSE_MARGIN) {
        if coarse > Instant::now() {
            tokio::time::sleep_until(coarse.into()).await;
        }
    }
    let remaining = deadline.saturating_duration_since(Instant::now());
    if !remaining.is_zero() {
        let _ = tokio::task::spawn_blocking(move || std::thread::sleep(remaining)).await;
    }
}

/// A target with a fixed service time and a fixed number of service slots.
///
/// Each request occupies the earliest free slot for exactly `service`, so
/// capacity is `slots / service` regardless of how requests arrive.
/// `slots = None` means unbounded concurrency.
#[derive(Debug, Clone)]
pub struct SyntheticTarget {
    service: Duration,
    slots: Option<Arc<Mutex<Vec<Instant>>>>,
}

impl SyntheticTarget {
    pub fn new(service: Duration, slots: Option<usize>) -> Self {
        let now = Instant::now();
        Self {
            service,
            slots: slots.map(|n| Arc::new(Mutex::new(vec![now; n.max(1)]))),
        }
    }

    pub fn service_time(&self) -> Duration {
        self.service
    }

    /// Requests per second the slots can sustain; `None` when unbounded.
    pub fn capacity(&self) -> Option<f64> {
        let slots = self.slots.as_ref()?.lock().unwrap().len();
        Some(slots as f64 / self.service.as_secs_f64())
    }

    fn reserve(&self) -> Instant {
        let now = Instant::now();
        let Some(slots) = &self.slots else {
            return now + self.service;
        };
        let mut slots = slots.lock().unwrap();
        let earliest = slots.iter_mut().min().expect("at least one slot");
        let end = (*earliest).max(now) + self.service;
        *earliest = end;
        end
    }
}

impl Default for SyntheticTarget {
    fn default() -> Self {
        Self::new(Duration::from_millis(5), Some(4))
    }
}

struct SyntheticWorker(SyntheticTarget);

impl WorkerChannel for SyntheticWorker {
    fn request(&self) -> BoxFuture<'static, Result<(), String>> {
        let done = self.0.reserve();
        Box::pin(async move {
            sleep_precise(done).await;
            Ok(())
        })
    }
}

impl LoadTarget for SyntheticTarget {
    fn open_worker(&self, _method: TargetMethod) -> BoxFuture<'_, Result<Arc<dyn WorkerChannel>, BenchError>> {
        let worker: Arc<dyn WorkerChannel> = Arc::new(SyntheticWorker(self.clone()));
        Box::pin(async move { Ok(worker) })
    }
}

/// A remote relay reached with this host's client credentials.
///
/// `GetAccessibleNetworksByAddress` is driven through an `invoke` of the
/// host's accessible networks contract, so the caller needs that grant and
/// a probe address to look up.
#[derive(Debug, Clone)]
pub struct RelayTarget {
    address: String,
    credentials: RemoteCredentials,
    probe_address: Option<String>,
}

impl RelayTarget {
    pub fn new(address: impl Into<String>, credentials: RemoteCredentials) -> Self {
        Self {
            address: address.into(),
            credentials,
            probe_address: None,
        }
    }

    pub fn with_probe_address(mut self, address: impl Into<String>) -> Self {
        self.probe_address = Some(address.into());
        self
    }

    async fn open(&self, method: TargetMethod) -> Result<Arc<dyn WorkerChannel>, BenchError> {
        let target = |e: crate::relay::RelayError| BenchError::Target(format!("{}: {e}", self.address));
        let client = RelayClient::connect(&self.address, &self.credentials)
            .await
            .map_err(target)?;
        let me = client.permitted_network_info().await.map_err(target)?;
        let request = match method {
            TargetMethod::GetPermittedNetworksByAddress => RelayRequest::NetworkInfo,
            TargetMethod::GetPermittedMethodsByNetworkId => RelayRequest::Methods(me.id),
            TargetMethod::GetAccessibleNetworksByAddress => {
                let probe = self
                    .probe_address
                    .clone()
                    .ok_or_else(|| BenchError::InvalidSpec(format!("{method} needs a probe address")))?;
                let grant = client
                    .permitted_methods(&me.id)
                    .await
                    .map_err(target)?
                    .iter()
                    .find(|g| g.contract_name == ACCESSIBLE_NETWORKS && g.method_name == GET_BY_ADDRESS)
                    .map(MethodRef::from)
                    .ok_or_else(|| {
                        BenchError::Target(format!(
                            "{} has not granted {ACCESSIBLE_NETWORKS}.{GET_BY_ADDRESS}",
                            self.address
                        ))
                    })?;
                RelayRequest::Invoke(grant, vec![probe])
            }
        };
        Ok(Arc::new(RelayWorker {
            client,
            request: Arc::new(request),
        }))
    }
}

impl LoadTarget for RelayTarget {
    fn open_worker(&self, method: TargetMethod) -> BoxFuture<'_, Result<Arc<dyn WorkerChannel>, BenchError>> {
        Box::pin(self.open(method))
    }
}

enum RelayRequest {
    NetworkInfo,
    Methods(String),
    Invoke(MethodRef, Vec<String>),
}

struct RelayWorker {
    client: RelayClient,
    request: Arc<RelayRequest>,
}

impl WorkerChannel for RelayWorker {
    fn request(&self) -> BoxFuture<'static, Result<(), String>> {
        let (client, request) = (self.client.clone(), self.request.clone());
        Box::pin(async move {
            let outcome = match &*request {
                RelayRequest::NetworkInfo => client.permitted_network_info().await.map(|_| ()),
                RelayRequest::Methods(id) => client.permitted_methods(id).await.map(|_| ()),
                RelayRequest::Invoke(grant, args) => client.invoke(grant, args).await.and_then(|raw| {
                    serde_json::from_str::<Value>(&raw)
                        .map(|_| ())
                        .map_err(|e| crate::relay::RelayError::Protocol(e.to_string()))
                }),
            };
            outcome.map_err(|e| e.to_string())
        })
    }
}
