//! Per-host certificate authority and relay certificates.
//!
//! Relay certificates carry the relay endpoint (`host:port`) verbatim as
//! their subject common name; that name is what the host looks up in its
//! Permitted Networks contract. Keys are ECDSA P-256.

use std::fmt;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use rcgen::{
    BasicConstraints, CertificateParams, DistinguishedName, DnType, ExtendedKeyUsagePurpose, IsCa, KeyPair,
    KeyUsagePurpose, SanType, PKCS_ECDSA_P256_SHA256,
};
use thiserror::Error;
use time::{Duration, OffsetDateTime};
use x509_parser::prelude::{FromDer, X509Certificate};
use x509_parser::time::ASN1Time;

pub const CA_CERT_FILE: &str = "ca.crt";
pub const CA_KEY_FILE: &str = "ca.key";

pub const DEFAULT_LEAF_VALIDITY: Duration = Duration::days(365);
pub const DEFAULT_CA_VALIDITY: Duration = Duration::days(3650);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PkiError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid common name: {0:?}")]
    InvalidCn(String),
    #[error("malformed certificate: {0}")]
    MalformedCert(String),
    #[error("certificate has no subject common name")]
    NoCommonName,
    #[error("certificate generation failed: {0}")]
    Generation(String),
}

impl PkiError {
    pub fn code(&self) -> &'static str {
        match self {
            PkiError::Io(_) => "IO_ERROR",
            PkiError::InvalidCn(_) => "INVALID_CN",
            PkiError::MalformedCert(_) => "MALFORMED_CERT",
            PkiError::NoCommonName => "NO_COMMON_NAME",
            PkiError::Generation(_) => "INTERNAL",
        }
    }
}

impl From<std::io::Error> for PkiError {
    fn from(e: std::io::Error) -> Self {
        PkiError::Io(e.to_string())
    }
}

impl From<rcgen::Error> for PkiError {
    fn from(e: rcgen::Error) -> Self {
        PkiError::Generation(e.to_string())
    }
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> PkiError + '_ {
    move |e| PkiError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CertRole {
    Server,
    Client,
}

impl CertRole {
    pub fn as_str(self) -> &'static str {
        match self {
            CertRole::Server => "server",
            CertRole::Client => "client",
        }
    }
}

impl fmt::Display for CertRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CertRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "server" => Ok(CertRole::Server),
            "client" => Ok(CertRole::Client),
            other => Err(format!("unknown role {other:?}, expected server or client")),
        }
    }
}

/// A DER-encoded X.509 certificate.
#[derive(Clone, PartialEq, Eq)]
pub struct Certificate {
    der: Vec<u8>,
}

impl fmt::Debug for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Certificate({} bytes)", self.der.len())
    }
}

impl Certificate {
    pub fn from_der(der: impl Into<Vec<u8>>) -> Self {
        Self { der: der.into() }
    }

    /// The first certificate in a PEM document.
    pub fn from_pem(pem: &str) -> Result<Self, PkiError> {
        use rustls::pki_types::pem::PemObject;
        let der = rustls::pki_types::CertificateDer::from_pem_slice(pem.as_bytes())
            .map_err(|e| PkiError::MalformedCert(e.to_string()))?;
        Ok(Self::from_der(der.as_ref()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PkiError> {
        let path = path.as_ref();
        let pem = std::fs::read_to_string(path).map_err(io_at(path))?;
        Self::from_pem(&pem)
    }

    pub fn der(&self) -> &[u8] {
        &self.der
    }

    pub fn to_pem(&self) -> String {
        pem::encode(&pem::Pem::new("CERTIFICATE", self.der.clone()))
    }

    fn parse(&self) -> Result<X509Certificate<'_>, PkiError> {
        let (rest, cert) = X509Certificate::from_der(&self.der).map_err(|e| PkiError::MalformedCert(e.to_string()))?;
        if !rest.is_empty() {
            return Err(PkiError::MalformedCert("trailing data after certificate".into()));
        }
        Ok(cert)
    }
}

/// What a certificate says about its holder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateIdentity {
    pub common_name: String,
    /// `None` when the certificate carries neither or both TLS usages.
    pub role: Option<CertRole>,
    pub not_before: OffsetDateTime,
    pub not_after: OffsetDateTime,
    pub issuer_id: String,
}

/// A certificate authority able to issue relay certificates.
pub struct CertificateAuthority {
    name: String,
    cert: Certificate,
    key_pem: String,
    issuer: rcgen::Certificate,
    key: KeyPair,
}

impl fmt::Debug for CertificateAuthority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CertificateAuthority")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl CertificateAuthority {
    /// Generate a self-signed CA in memory.
    pub fn generate(name: &str) -> Result<Self, PkiError> {
        if name.is_empty() {
            return Err(PkiError::InvalidCn(name.to_owned()));
        }
        let key = KeyPair::generate_for(&PKCS_ECDSA_P256_SHA256)?;
        let mut params = CertificateParams::default();
        params.distinguished_name = DistinguishedName::new();
        params.distinguished_name.push(DnType::CommonName, name);
        params.is_ca = IsCa::Ca(BasicConstraints::Unconstrained);
        params.key_usages = vec![
            KeyUsagePurpose::KeyCertSign,
            KeyUsagePurpose::CrlSign,
            KeyUsagePurpose::DigitalSignature,
        ];
        let now = now_seconds();
        params.not_before = now;
        params.not_after = now + DEFAULT_CA_VALIDITY;
        let issuer = params.self_signed(&key)?;
        Ok(Self {
            name: name.to_owned(),
            cert: Certificate::from_der(issuer.der().as_ref()),
            key_pem: key.serialize_pem(),
            issuer,
            key,
        })
    }

    /// Load `ca.crt` and `ca.key` from `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PkiError> {
        let dir = dir.as_ref();
        let cert_path = dir.join(CA_CERT_FILE);
        let key_path = dir.join(CA_KEY_FILE);
        let cert_pem = std::fs::read_to_string(&cert_path).map_err(io_at(&cert_path))?;
        let key_pem = std::fs::read_to_string(&key_path).map_err(io_at(&key_path))?;
        let cert = Certificate::from_pem(&cert_pem)?;
        let name = extract_common_name(&cert)?;
        let key = KeyPair::from_pem(&key_pem)?;
        // Re-signing the parsed parameters yields an issuer with the same
        // subject and key as the on-disk certificate.
        let params = CertificateParams::from_ca_cert_pem(&cert_pem)?;
        let issuer = params.self_signed(&key)?;
        Ok(Self {
            name,
            cert,
            key_pem,
            issuer,
            key,
        })
    }

    /// Write `ca.crt` and `ca.key` into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf), PkiError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(io_at(dir))?;
        let cert_path = dir.join(CA_CERT_FILE);
        let key_path = dir.join(CA_KEY_FILE);
        std::fs::write(&cert_path, self.cert.to_pem()).map_err(io_at(&cert_path))?;
        write_private(&key_path, &self.key_pem)?;
        Ok((cert_path, key_path))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn certificate(&self) -> &Certificate {
        &self.cert
    }
}

/// Create a CA and persist it under `out_dir`.
pub fn create_ca(name: &str, out_dir: impl AsRef<Path>) -> Result<CertificateAuthority, PkiError> {
    let ca = CertificateAuthority::generate(name)?;
    ca.save(out_dir)?;
    Ok(ca)
}

/// A freshly issued leaf certificate and its private key.
#[derive(Debug, Clone)]
pub struct IssuedCert {
    pub common_name: String,
    pub role: CertRole,
    pub cert: Certificate,
    pub key_pem: String,
}

impl IssuedCert {
    pub fn cert_pem(&self) -> String {
        self.cert.to_pem()
    }

    /// Write `<sanitized-cn>.crt` and `.key` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf), PkiError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(io_at(dir))?;
        let stem = sanitize_cn(&self.common_name);
        let cert_path = dir.join(format!("{stem}.crt"));
        let key_path = dir.join(format!("{stem}.key"));
        std::fs::write(&cert_path, self.cert_pem()).map_err(io_at(&cert_path))?;
        write_private(&key_path, &self.key_pem)?;
        Ok((cert_path, key_path))
    }
}

/// File stem for a common name: `:` and `/` become `_`.
pub fn sanitize_cn(cn: &str) -> String {
    cn.replace([':', '/'], "_")
}

/// Issue a leaf valid from now for [`DEFAULT_LEAF_VALIDITY`].
pub fn issue_cert(ca: &CertificateAuthority, common_name: &str, role: CertRole) -> Result<IssuedCert, PkiError> {
    let now = now_seconds();
    issue_cert_with_validity(ca, common_name, role, now, now + DEFAULT_LEAF_VALIDITY)
}

pub fn issue_cert_with_validity(
    ca: &CertificateAuthority,
    common_name: &str,
    role: CertRole,
    not_before: OffsetDateTime,
    not_after: OffsetDateTime,
) -> Result<IssuedCert, PkiError> {
    if common_name.is_empty() {
        return Err(PkiError::InvalidCn(common_name.to_owned()));
    }
    let key = KeyPair::generate_for(&PKCS_ECDSA_P256_SHA256)?;
    let mut params = CertificateParams::default();
    params.distinguished_name = DistinguishedName::new();
    params.distinguished_name.push(DnType::CommonName, common_name);
    params.subject_alt_names = subject_alt_name(common_name).into_iter().collect();
    params.is_ca = IsCa::ExplicitNoCa;
    params.key_usages = vec![KeyUsagePurpose::DigitalSignature];
    params.extended_key_usages = vec![match role {
        CertRole::Server => ExtendedKeyUsagePurpose::ServerAuth,
        CertRole::Client => ExtendedKeyUsagePurpose::ClientAuth,
    }];
    params.use_authority_key_identifier_extension = true;
    params.not_before = not_before;
    params.not_after = not_after;
    let cert = params.signed_by(&key, &ca.issuer, &ca.key)?;
    Ok(IssuedCert {
        common_name: common_name.to_owned(),
        role,
        cert: Certificate::from_der(cert.der().as_ref()),
        key_pem: key.serialize_pem(),
    })
}

/// SAN for the host part of `host:port`, so TLS clients can verify the
/// server name. Hosts that are neither an IP nor a DNS name get none.
fn subject_alt_name(common_name: &str) -> Option<SanType> {
    let host = split_host(common_name);
    if let Ok(ip) = host.parse::<IpAddr>() {
        return Some(SanType::IpAddress(ip));
    }
    let is_dns = !host.is_empty()
        && host.len() <= 253
        && host.split('.').all(|label| {
            !label.is_empty()
                && label.len() <= 63
                && label.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
                && !label.starts_with('-')
                && !label.ends_with('-')
        });
    if is_dns {
        host.to_owned().try_into().ok().map(SanType::DnsName)
    } else {
        None
    }
}

/// Host part of `host:port` (brackets stripped from IPv6 literals).
pub fn split_host(address: &str) -> &str {
    let host = match address.rsplit_once(':') {
        Some((host, port)) if !port.is_empty() && port.bytes().all(|b| b.is_ascii_digit()) => host,
        _ => address,
    };
    host.strip_prefix('[').and_then(|h| h.strip_suffix(']')).unwrap_or(host)
}

/// The subject common name of `cert`.
pub fn extract_common_name(cert: &Certificate) -> Result<String, PkiError> {
    let parsed = cert.parse()?;
    let attr = parsed
        .subject()
        .iter_common_name()
        .next()
        .ok_or(PkiError::NoCommonName)?;
    attr.as_str()
        .map(str::to_owned)
        .map_err(|e| PkiError::MalformedCert(format!("common name is not a string: {e}")))
}

/// Whether `cert` is signed by `trust_root` and both are valid at `at`.
///
/// A self-signed root verifies against itself. Only single-level chains are
/// supported: `trust_root` must be the direct issuer.
pub fn verify_chain(cert: &Certificate, trust_root: &Certificate, at: OffsetDateTime) -> Result<bool, PkiError> {
    let leaf = cert.parse()?;
    let root = trust_root.parse()?;
    let at = ASN1Time::from(at);
    if leaf.issuer().as_raw() != root.subject().as_raw() {
        return Ok(false);
    }
    if cert != trust_root && !root.is_ca() {
        return Ok(false);
    }
    if leaf.verify_signature(Some(root.public_key())).is_err() {
        return Ok(false);
    }
    Ok(leaf.validity().is_valid_at(at) && root.validity().is_valid_at(at))
}

pub fn identity(cert: &Certificate) -> Result<CertificateIdentity, PkiError> {
    let common_name = extract_common_name(cert)?;
    let parsed = cert.parse()?;
    let role = match parsed.extended_key_usage() {
        Ok(Some(eku)) => match (eku.value.server_auth, eku.value.client_auth) {
            (true, false) => Some(CertRole::Server),
            (false, true) => Some(CertRole::Client),
            _ => None,
        },
        _ => None,
    };
    let validity = parsed.validity();
    Ok(CertificateIdentity {
        common_name,
        role,
        not_before: validity.not_before.to_datetime(),
        not_after: validity.not_after.to_datetime(),
        issuer_id: parsed.issuer().to_string(),
    })
}

fn now_seconds() -> OffsetDateTime {
    let now = OffsetDateTime::now_utc();
    now.replace_nanosecond(0).unwrap_or(now)
}

fn write_private(path: &Path, contents: &str) -> Result<(), PkiError> {
    let mut opts = std::fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    use std::io::Write as _;
    let mut f = opts.open(path).map_err(io_at(path))?;
    f.write_all(contents.as_bytes()).map_err(io_at(path))
}
