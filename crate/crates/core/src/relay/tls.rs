//! rustls configuration: TLS 1.3 only, mutual authentication required.

use std::net::IpAddr;
use std::path::Path;
use std::sync::Arc;

use rustls::crypto::CryptoProvider;
use rustls::pki_types::pem::PemObject;
use rustls::pki_types::{CertificateDer, PrivateKeyDer, ServerName};
use rustls::server::WebPkiClientVerifier;
use rustls::{ClientConfig, RootCertStore, ServerConfig};

use super::config::RemoteCredentials;
use super::RelayError;
use crate::pki::split_host;

fn provider() -> Arc<CryptoProvider> {
    Arc::new(rustls::crypto::ring::default_provider())
}

fn tls_err(what: &str, path: &Path, e: impl std::fmt::Display) -> RelayError {
    RelayError::TlsConfig(format!("{what} {}: {e}", path.display()))
}

pub fn load_certs(path: &Path) -> Result<Vec<CertificateDer<'static>>, RelayError> {
    let certs: Vec<_> = CertificateDer::pem_file_iter(path)
        .map_err(|e| tls_err("cannot read certificates from", path, e))?
        .collect::<Result<_, _>>()
        .map_err(|e| tls_err("bad certificate in", path, e))?;
    if certs.is_empty() {
        return Err(tls_err("no certificate in", path, "empty"));
    }
    Ok(certs)
}

pub fn load_key(path: &Path) -> Result<PrivateKeyDer<'static>, RelayError> {
    PrivateKeyDer::from_pem_file(path).map_err(|e| tls_err("cannot read private key from", path, e))
}

fn root_store(ca_path: &Path) -> Result<RootCertStore, RelayError> {
    let mut roots = RootCertStore::empty();
    for cert in load_certs(ca_path)? {
        roots
            .add(cert)
            .map_err(|e| tls_err("unusable CA certificate", ca_path, e))?;
    }
    Ok(roots)
}

/// Server side: present `cert`/`key`, require client certs chaining to `ca`.
pub fn server_config(cert: &Path, key: &Path, ca: &Path) -> Result<Arc<ServerConfig>, RelayError> {
    let provider = provider();
    let verifier = WebPkiClientVerifier::builder_with_provider(Arc::new(root_store(ca)?), provider.clone())
        .build()
        .map_err(|e| tls_err("client verifier for", ca, e))?;
    let config = ServerConfig::builder_with_provider(provider)
        .with_protocol_versions(&[&rustls::version::TLS13])
        .map_err(|e| RelayError::TlsConfig(e.to_string()))?
        .with_client_cert_verifier(verifier)
        .with_single_cert(load_certs(cert)?, load_key(key)?)
        .map_err(|e| tls_err("server certificate/key mismatch", cert, e))?;
    Ok(Arc::new(config))
}

/// Client side: present the client credentials, trust only the remote CA.
pub fn client_config(creds: &RemoteCredentials) -> Result<Arc<ClientConfig>, RelayError> {
    let config = ClientConfig::builder_with_provider(provider())
        .with_protocol_versions(&[&rustls::version::TLS13])
        .map_err(|e| RelayError::TlsConfig(e.to_string()))?
        .with_root_certificates(root_store(&creds.remote_ca_path)?)
        .with_client_auth_cert(load_certs(&creds.client_cert_path)?, load_key(&creds.client_key_path)?)
        .map_err(|e| tls_err("client certificate/key mismatch", &creds.client_cert_path, e))?;
    Ok(Arc::new(config))
}

/// TLS server name for a relay address `host:port`.
pub fn server_name(address: &str) -> Result<ServerName<'static>, RelayError> {
    let host = split_host(address);
    if let Ok(ip) = host.parse::<IpAddr>() {
        return Ok(ServerName::IpAddress(ip.into()));
    }
    ServerName::try_from(host.to_owned())
        .map_err(|_| RelayError::Config(format!("relay address {address} has no usable host name")))
}
