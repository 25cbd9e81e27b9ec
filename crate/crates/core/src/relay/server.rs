use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use tokio::io::AsyncWriteExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio_rustls::TlsAcceptor;
use tracing::{debug, info, warn};

use super::config::RelayConfig;
use super::handler::MessageHandler;
use super::tls;
use super::wire::{read_frame, Envelope, ErrorCode, FrameError, WireError};
use super::RelayError;
use crate::connector::ChainConnector;
use crate::pki::{extract_common_name, Certificate};

type Handler = MessageHandler<Arc<dyn ChainConnector>>;

/// Handle to a relay accepting connections in the background.
pub struct RunningServer {
    local_addr: SocketAddr,
    requests: Arc<AtomicU64>,
    shutdown: watch::Sender<bool>,
    task: JoinHandle<()>,
}

impl std::fmt::Debug for RunningServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunningServer")
            .field("local_addr", &self.local_addr)
            .finish()
    }
}

impl RunningServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Request envelopes received so far, across all connections.
    pub fn requests_handled(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    /// Stop accepting and close every open connection.
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        let _ = self.task.await;
    }

    /// Run until the accept loop ends.
    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

fn check_server_identity(config: &RelayConfig) -> Result<(), RelayError> {
    let cert = Certificate::load(&config.server_cert_path).map_err(|e| RelayError::TlsConfig(e.to_string()))?;
    let cn = extract_common_name(&cert).map_err(|e| RelayError::TlsConfig(e.to_string()))?;
    if cn != config.listen_address {
        return Err(RelayError::TlsConfig(format!(
            "server certificate CN {cn} does not match listenAddress {}",
            config.listen_address
        )));
    }
    Ok(())
}

/// Bind `config.listenAddress` and serve.
pub async fn serve(config: &RelayConfig, connector: Arc<dyn ChainConnector>) -> Result<RunningServer, RelayError> {
    check_server_identity(config)?;
    let listener = TcpListener::bind(&config.listen_address)
        .await
        .map_err(|e| RelayError::Bind(format!("{}: {e}", config.listen_address)))?;
    start(listener, config, connector)
}

/// Serve on an already-bound listener; the certificate CN must still equal
/// `config.listenAddress`.
pub fn serve_on(
    listener: std::net::TcpListener,
    config: &RelayConfig,
    connector: Arc<dyn ChainConnector>,
) -> Result<RunningServer, RelayError> {
    check_server_identity(config)?;
    listener
        .set_nonblocking(true)
        .map_err(|e| RelayError::Bind(e.to_string()))?;
    let listener = TcpListener::from_std(listener).map_err(|e| RelayError::Bind(e.to_string()))?;
    start(listener, config, connector)
}

fn start(
    listener: TcpListener,
    config: &RelayConfig,
    connector: Arc<dyn ChainConnector>,
) -> Result<RunningServer, RelayError> {
    let tls = tls::server_config(&config.server_cert_path, &config.server_key_path, &config.ca_cert_path)?;
    let local_addr = listener.local_addr().map_err(|e| RelayError::Bind(e.to_string()))?;
    let acceptor = TlsAcceptor::from(tls);
    let handler = Arc::new(MessageHandler::new(connector));
    let requests = Arc::new(AtomicU64::new(0));
    let (shutdown, stop) = watch::channel(false);
    info!(%local_addr, "relay listening");
    let task = tokio::spawn(accept_loop(listener, acceptor, handler, requests.clone(), stop));
    Ok(RunningServer {
        local_addr,
        requests,
        shutdown,
        task,
    })
}

async fn accept_loop(
    listener: TcpListener,
    acceptor: TlsAcceptor,
    handler: Arc<Handler>,
    requests: Arc<AtomicU64>,
    mut stop: watch::Receiver<bool>,
) {
    let mut connections = tokio::task::JoinSet::new();
    loop {
        tokio::select! {
            _ = stop.changed() => break,
            accepted = listener.accept() => match accepted {
                Ok((tcp, peer)) => {
                    let _ = tcp.set_nodelay(true);
                    let conn = serve_connection(tcp, peer, acceptor.clone(), handler.clone(), requests.clone());
                    connections.spawn(conn);
                }
                Err(e) => warn!("accept failed: {e}"),
            },
            Some(_) = connections.join_next(), if !connections.is_empty() => {}
        }
    }
    connections.shutdown().await;
}

async fn serve_connection(
    tcp: TcpStream,
    peer: SocketAddr,
    acceptor: TlsAcceptor,
    handler: Arc<Handler>,
    requests: Arc<AtomicU64>,
) {
    let stream = match acceptor.accept(tcp).await {
        Ok(s) => s,
        Err(e) => {
            debug!(%peer, "handshake rejected: {e}");
            return;
        }
    };
    let Some(cert) = stream
        .get_ref()
        .1
        .peer_certificates()
        .and_then(|chain| chain.first())
        .map(|c| Certificate::from_der(c.as_ref()))
    else {
        return;
    };
    let cert = Arc::new(cert);
    let (mut reader, mut writer) = tokio::io::split(stream);
    let (tx, mut rx) = mpsc::channel::<Vec<u8>>(1024);

    let writer_task = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            if writer.write_all(&frame).await.is_err() {
                return;
            }
            while let Ok(more) = rx.try_recv() {
                if writer.write_all(&more).await.is_err() {
                    return;
                }
            }
            if writer.flush().await.is_err() {
                return;
            }
        }
        let _ = writer.shutdown().await;
    });

    loop {
        match read_frame(&mut reader).await {
            Ok(Some(payload)) => {
                requests.fetch_add(1, Ordering::Relaxed);
                let (handler, cert, tx) = (handler.clone(), cert.clone(), tx.clone());
                tokio::spawn(async move {
                    let response = tokio::task::spawn_blocking(move || handler.handle_payload(&cert, &payload))
                        .await
                        .unwrap_or_else(|e| {
                            Envelope::failure(0, "", WireError::new(ErrorCode::Internal, e.to_string()))
                        });
                    let _ = tx.send(response.to_frame()).await;
                });
            }
            Ok(None) => break,
            Err(e @ FrameError::TooLarge(_)) => {
                debug!(%peer, "closing connection: {e}");
                writer_task.abort();
                return;
            }
            Err(e) => {
                debug!(%peer, "connection ended: {e}");
                break;
            }
        }
    }
    drop(tx);
    let _ = writer_task.await;
}
