use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tokio::io::{AsyncWriteExt, ReadHalf};
use tokio::net::TcpStream;
use tokio::sync::{mpsc, oneshot};
use tokio_rustls::client::TlsStream;
use tokio_rustls::TlsConnector;

use super::config::RemoteCredentials;
use super::tls;
use super::wire::{
    read_frame, Envelope, FrameError, InvokeRequest, InvokeResponse, MessageType, MethodRef, PermittedMethodsRequest,
    PermittedMethodsResponse,
};
use super::RelayError;
use crate::policy::{PermittedMethod, PermittedNetwork};

type Reply = oneshot::Sender<Result<Envelope, RelayError>>;

#[derive(Default)]
struct Pending {
    waiting: HashMap<u64, Reply>,
    closed: Option<RelayError>,
}

struct Shared {
    pending: Mutex<Pending>,
    next_id: AtomicU64,
    outbound: mpsc::Sender<Vec<u8>>,
}

impl Shared {
    fn close(&self, reason: RelayError) {
        let waiting = {
            let mut p = self.pending.lock().unwrap();
            if p.closed.is_none() {
                p.closed = Some(reason.clone());
            }
            std::mem::take(&mut p.waiting)
        };
        for (_, reply) in waiting {
            let _ = reply.send(Err(reason.clone()));
        }
    }
}

/// A mutually-authenticated connection to one remote relay.
///
/// Cloning is cheap; clones share the connection. Requests are pipelined and
/// matched to responses by correlation id.
#[derive(Clone)]
pub struct RelayClient {
    shared: Arc<Shared>,
    remote: Arc<str>,
}

impl std::fmt::Debug for RelayClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RelayClient").field("remote", &self.remote).finish()
    }
}

fn classify_io(e: &std::io::Error) -> RelayError {
    let tls_rejection = e
        .get_ref()
        .and_then(|inner| inner.downcast_ref::<rustls::Error>())
        .is_some_and(|inner| {
            matches!(
                inner,
                rustls::Error::AlertReceived(_)
                    | rustls::Error::InvalidCertificate(_)
                    | rustls::Error::NoCertificatesPresented
            )
        });
    if tls_rejection {
        RelayError::TlsRejected(e.to_string())
    } else {
        RelayError::ConnectionLost(e.to_string())
    }
}

impl RelayClient {
    pub async fn connect(remote_address: &str, creds: &RemoteCredentials) -> Result<Self, RelayError> {
        let config = tls::client_config(creds)?;
        let name = tls::server_name(remote_address)?;
        let tcp = TcpStream::connect(remote_address)
            .await
            .map_err(|e| RelayError::ConnectionLost(format!("{remote_address}: {e}")))?;
        let _ = tcp.set_nodelay(true);
        let stream = TlsConnector::from(config)
            .connect(name, tcp)
            .await
            .map_err(|e| classify_io(&e))?;
        let (reader, mut writer) = tokio::io::split(stream);
        let (outbound, mut rx) = mpsc::channel::<Vec<u8>>(1024);
        let shared = Arc::new(Shared {
            pending: Mutex::new(Pending::default()),
            next_id: AtomicU64::new(1),
            outbound,
        });

        let on_write_error = Arc::downgrade(&shared);
        tokio::spawn(async move {
            while let Some(frame) = rx.recv().await {
                let mut result = writer.write_all(&frame).await;
                while result.is_ok() {
                    match rx.try_recv() {
                        Ok(more) => result = writer.write_all(&more).await,
                        Err(_) => break,
                    }
                }
                if let Err(e) = result.and(writer.flush().await) {
                    if let Some(shared) = on_write_error.upgrade() {
                        shared.close(classify_io(&e));
                    }
                    return;
                }
            }
            let _ = writer.shutdown().await;
        });
        tokio::spawn(read_loop(reader, Arc::downgrade(&shared)));

        Ok(Self {
            shared,
            remote: remote_address.into(),
        })
    }

    pub fn remote_address(&self) -> &str {
        &self.remote
    }

    pub fn is_closed(&self) -> bool {
        self.shared.pending.lock().unwrap().closed.is_some()
    }

    /// Send one request and wait for its response envelope.
    pub async fn exchange(&self, kind: MessageType, body: Value) -> Result<Envelope, RelayError> {
        let id = self.shared.next_id.fetch_add(1, Ordering::Relaxed);
        let (reply, response) = oneshot::channel();
        {
            let mut p = self.shared.pending.lock().unwrap();
            if let Some(reason) = &p.closed {
                return Err(reason.clone());
            }
            p.waiting.insert(id, reply);
        }
        let frame = Envelope::request(id, kind, body).to_frame();
        if self.shared.outbound.send(frame).await.is_err() {
            self.shared.pending.lock().unwrap().waiting.remove(&id);
            return Err(RelayError::ConnectionLost("connection writer stopped".into()));
        }
        response
            .await
            .unwrap_or_else(|_| Err(RelayError::ConnectionLost("connection dropped".into())))
    }

    /// Send one request; a failed response becomes [`RelayError::Remote`].
    pub async fn request<T: DeserializeOwned>(&self, kind: MessageType, body: Value) -> Result<T, RelayError> {
        let env = self.exchange(kind, body).await?;
        if env.ok != Some(true) {
            let err = env
                .error
                .ok_or_else(|| RelayError::Protocol("failed response without error".into()))?;
            return Err(RelayError::Remote(err));
        }
        serde_json::from_value(env.body).map_err(|e| RelayError::Protocol(format!("bad response body: {e}")))
    }

    pub async fn permitted_network_info(&self) -> Result<PermittedNetwork, RelayError> {
        self.request(MessageType::PermittedNetworkInfo, json!({})).await
    }

    pub async fn permitted_methods(&self, network_id: &str) -> Result<Vec<PermittedMethod>, RelayError> {
        let body = serde_json::to_value(PermittedMethodsRequest {
            network_id: network_id.to_owned(),
        })
        .expect("serializable");
        let resp: PermittedMethodsResponse = self.request(MessageType::PermittedMethods, body).await?;
        Ok(resp.methods)
    }

    pub async fn invoke(&self, method: &MethodRef, args: &[String]) -> Result<String, RelayError> {
        let body = serde_json::to_value(InvokeRequest::new(method, args)).expect("serializable");
        let resp: InvokeResponse = self.request(MessageType::Invoke, body).await?;
        Ok(resp.result)
    }
}

async fn read_loop(mut reader: ReadHalf<TlsStream<TcpStream>>, shared: std::sync::Weak<Shared>) {
    let reason = loop {
        let payload = match read_frame(&mut reader).await {
            Ok(Some(p)) => p,
            Ok(None) => break RelayError::ConnectionLost("remote relay closed the connection".into()),
            Err(FrameError::Io(e)) => break classify_io(&e),
            Err(e) => break RelayError::Protocol(e.to_string()),
        };
        let Some(shared) = shared.upgrade() else { return };
        let env: Envelope = match serde_json::from_slice(&payload) {
            Ok(env) => env,
            Err(e) => break RelayError::Protocol(format!("undecodable response: {e}")),
        };
        let reply = shared.pending.lock().unwrap().waiting.remove(&env.id);
        match reply {
            Some(reply) => {
                let _ = reply.send(Ok(env));
            }
            None => tracing::debug!(id = env.id, "response for unknown request"),
        }
    };
    if let Some(shared) = shared.upgrade() {
        shared.close(reason);
    }
}
