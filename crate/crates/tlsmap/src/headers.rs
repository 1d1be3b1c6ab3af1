//! Ordered HTTP header capture, canonicalization and MurmurHash3 hashing.
//!
//! A capture records the response header *keys* in exact wire order with
//! original casing; every value is discarded except the `Server` value. The
//! canonical string joins the keys with `\n` (no trailing newline), rendering
//! a Server key as `Server: <value>` and every other key bare:
//!
//! ```text
//! Server: cloudflare
//! Date
//! Content-Type
//! ```
//!
//! The canonical string is hashed with the MurmurHash3 x86 32-bit variant,
//! seed 0, rendered as an unsigned decimal. Header order is part of the
//! identity: permuting two keys changes the canonical string and (with
//! overwhelming probability) the hash. Duplicate keys stay as separate
//! entries, in order.
//!
//! Fetching sends one `GET /` to `https://<domain>/` (with an optional
//! plain-HTTP fallback after a TLS failure) and never follows redirects: a
//! redirect response's own headers are the capture. Failures become a
//! [`FetchStatus`], never an error. Certificates are not verified -- the
//! point is to fingerprint whatever presents itself, self-signed or rotten.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{IpAddr, SocketAddr, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MurmurHash3, x86 32-bit variant.
pub fn mmh3_32(bytes: &[u8], seed: u32) -> u32 {
    const C1: u32 = 0xcc9e2d51;
    const C2: u32 = 0x1b873593;

    let mut h1 = seed;
    let blocks = bytes.len() / 4;
    for i in 0..blocks {
        let k = u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
        let mut k1 = k.wrapping_mul(C1);
        k1 = k1.rotate_left(15);
        k1 = k1.wrapping_mul(C2);
        h1 ^= k1;
        h1 = h1.rotate_left(13);
        h1 = h1.wrapping_mul(5).wrapping_add(0xe6546b64);
    }

    let tail = &bytes[blocks * 4..];
    let mut k1 = 0u32;
    if tail.len() >= 3 {
        k1 ^= (tail[2] as u32) << 16;
    }
    if tail.len() >= 2 {
        k1 ^= (tail[1] as u32) << 8;
    }
    if !tail.is_empty() {
        k1 ^= tail[0] as u32;
        k1 = k1.wrapping_mul(C1);
        k1 = k1.rotate_left(15);
        k1 = k1.wrapping_mul(C2);
        h1 ^= k1;
    }

    h1 ^= bytes.len() as u32;
    h1 ^= h1 >> 16;
    h1 = h1.wrapping_mul(0x85ebca6b);
    h1 ^= h1 >> 13;
    h1 = h1.wrapping_mul(0xc2b2ae35);
    h1 ^= h1 >> 16;
    h1
}

/// Outcome of one header fetch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    Ok,
    Timeout,
    TlsError,
    ConnectError,
    HttpError(u16),
}

impl FetchStatus {
    /// A capture is hashable when a response head actually arrived.
    pub fn has_response(&self) -> bool {
        matches!(self, FetchStatus::Ok | FetchStatus::HttpError(_))
    }
}

/// Response header keys for one domain, in wire order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderCapture {
    pub domain: String,
    pub status: FetchStatus,
    pub keys: Vec<String>,
    pub server_value: Option<String>,
    /// Unix seconds.
    pub fetched_at: u64,
}

/// Canonical string plus its 32-bit MurmurHash3 (seed 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderFingerprint {
    pub canonical: String,
    pub hash: u32,
}

/// Newline-join the captured keys, keeping only the Server value.
pub fn canonicalize(capture: &HeaderCapture) -> Result<String> {
    if capture.keys.is_empty() {
        return Err(Error::EmptyCapture);
    }
    let lines: Vec<String> = capture
        .keys
        .iter()
        .map(|key| {
            if key.eq_ignore_ascii_case("server") {
                match &capture.server_value {
                    Some(value) => format!("{key}: {value}"),
                    None => key.clone(),
                }
            } else {
                key.clone()
            }
        })
        .collect();
    Ok(lines.join("\n"))
}

/// Canonicalize and hash a capture.
pub fn header_fingerprint(capture: &HeaderCapture) -> Result<HeaderFingerprint> {
    let canonical = canonicalize(capture)?;
    let hash = mmh3_32(canonical.as_bytes(), 0);
    Ok(HeaderFingerprint { canonical, hash })
}

/// Fetch settings. Defaults: 10 s timeout, 32-way concurrency, no fallback.
#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub timeout: Duration,
    pub user_agent: String,
    pub concurrency: usize,
    pub allow_http_fallback: bool,
    pub https_port: u16,
    pub http_port: u16,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            timeout: Duration::from_secs(10),
            user_agent: format!("tlsmap/{}", env!("CARGO_PKG_VERSION")),
            concurrency: 32,
            allow_http_fallback: false,
            https_port: 443,
            http_port: 80,
        }
    }
}

/// A domain to fetch, optionally pinned to its scan-resolved address.
#[derive(Debug, Clone)]
pub struct FetchTarget {
    pub domain: String,
    pub ip: Option<IpAddr>,
}

impl FetchTarget {
    pub fn new(domain: impl Into<String>) -> Self {
        FetchTarget {
            domain: domain.into(),
            ip: None,
        }
    }

    pub fn with_ip(domain: impl Into<String>, ip: IpAddr) -> Self {
        FetchTarget {
            domain: domain.into(),
            ip: Some(ip),
        }
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn capture(domain: &str, status: FetchStatus, head: Option<ResponseHead>) -> HeaderCapture {
    let (keys, server_value) = match head {
        Some(head) => (head.keys, head.server_value),
        None => (Vec::new(), None),
    };
    HeaderCapture {
        domain: domain.to_string(),
        status,
        keys,
        server_value,
        fetched_at: now_unix(),
    }
}

/// Fetch the response headers for one domain.
///
/// HTTPS first; on a TLS failure and `allow_http_fallback`, one plain HTTP
/// attempt. Redirects are not followed. Every failure mode is recorded as a
/// status; this function does not return errors.
pub fn fetch_headers(target: &FetchTarget, config: &FetchConfig) -> HeaderCapture {
    match fetch_https(target, config) {
        Ok(head) => {
            let status = status_of(head.code);
            capture(&target.domain, status, Some(head))
        }
        Err(FetchFailure::Tls) if config.allow_http_fallback => match fetch_http(target, config) {
            Ok(head) => {
                let status = status_of(head.code);
                capture(&target.domain, status, Some(head))
            }
            Err(failure) => capture(&target.domain, failure.into_status(), None),
        },
        Err(failure) => capture(&target.domain, failure.into_status(), None),
    }
}

/// Fetch many targets with bounded concurrency.
///
/// Requests for the same domain are serialized (at most one in flight per
/// host); distinct domains run on up to `config.concurrency` workers. The
/// result vector is aligned with the input order.
pub fn fetch_many(targets: &[FetchTarget], config: &FetchConfig) -> Vec<HeaderCapture> {
    // Group indices by domain so one worker owns all requests to a host.
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (index, target) in targets.iter().enumerate() {
        groups.entry(target.domain.as_str()).or_default().push(index);
    }
    let queue: Mutex<Vec<Vec<usize>>> = Mutex::new(groups.into_values().collect());
    let results: Mutex<Vec<Option<HeaderCapture>>> = Mutex::new(vec![None; targets.len()]);
    let workers = config.concurrency.max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let group = match queue.lock().unwrap().pop() {
                    Some(group) => group,
                    None => break,
                };
                for index in group {
                    let result = fetch_headers(&targets[index], config);
                    results.lock().unwrap()[index] = Some(result);
                }
            });
        }
    });

    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|c| c.expect("every index fetched"))
        .collect()
}

/// Read a capture store (JSON lines, one [`HeaderCapture`] per line).
pub fn read_captures(path: impl AsRef<Path>) -> Result<Vec<HeaderCapture>> {
    crate::store::read_jsonl(path)
}

/// Write a capture store.
pub fn write_captures(path: impl AsRef<Path>, captures: &[HeaderCapture]) -> Result<()> {
    crate::store::write_jsonl(path, captures)
}

// ---------------------------------------------------------------------------
// Wire plumbing
// ---------------------------------------------------------------------------

struct ResponseHead {
    code: u16,
    keys: Vec<String>,
    server_value: Option<String>,
}

fn status_of(code: u16) -> FetchStatus {
    if (200..300).contains(&code) {
        FetchStatus::Ok
    } else {
        FetchStatus::HttpError(code)
    }
}

enum FetchFailure {
    Timeout,
    Tls,
    Connect,
}

impl FetchFailure {
    fn into_status(self) -> FetchStatus {
        match self {
            FetchFailure::Timeout => FetchStatus::Timeout,
            FetchFailure::Tls => FetchStatus::TlsError,
            FetchFailure::Connect => FetchStatus::ConnectError,
        }
    }
}

fn io_failure(err: &std::io::Error) -> FetchFailure {
    match err.kind() {
        std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock => FetchFailure::Timeout,
        _ => FetchFailure::Connect,
    }
}

fn resolve(target: &FetchTarget, port: u16) -> std::result::Result<SocketAddr, FetchFailure> {
    if let Some(ip) = target.ip {
        return Ok(SocketAddr::new(ip, port));
    }
    (target.domain.as_str(), port)
        .to_socket_addrs()
        .map_err(|_| FetchFailure::Connect)?
        .next()
        .ok_or(FetchFailure::Connect)
}

fn connect(addr: SocketAddr, timeout: Duration) -> std::result::Result<TcpStream, FetchFailure> {
    let stream = TcpStream::connect_timeout(&addr, timeout).map_err(|e| io_failure(&e))?;
    stream.set_read_timeout(Some(timeout)).map_err(|e| io_failure(&e))?;
    stream.set_write_timeout(Some(timeout)).map_err(|e| io_failure(&e))?;
    Ok(stream)
}

fn request_bytes(domain: &str, user_agent: &str) -> Vec<u8> {
    format!(
        "GET / HTTP/1.1\r\nHost: {domain}\r\nUser-Agent: {user_agent}\r\nAccept: */*\r\nConnection: close\r\n\r\n"
    )
    .into_bytes()
}

/// Read bytes until the end of the response head (`\r\n\r\n`), capped.
fn read_head_bytes(reader: &mut impl Read) -> std::result::Result<Vec<u8>, FetchFailure> {
    const MAX_HEAD: usize = 64 * 1024;
    let mut head = Vec::with_capacity(1024);
    let mut byte = [0u8; 1];
    loop {
        match reader.read(&mut byte) {
            Ok(0) => return Err(FetchFailure::Connect),
            Ok(_) => {
                head.push(byte[0]);
                if head.ends_with(b"\r\n\r\n") {
                    return Ok(head);
                }
                if head.len() > MAX_HEAD {
                    return Err(FetchFailure::Connect);
                }
            }
            Err(e) => return Err(io_failure(&e)),
        }
    }
}

fn parse_head(bytes: &[u8]) -> std::result::Result<ResponseHead, FetchFailure> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines = text.split("\r\n");
    let status_line = lines.next().ok_or(FetchFailure::Connect)?;
    let code: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|c| c.parse().ok())
        .ok_or(FetchFailure::Connect)?;

    let mut keys = Vec::new();
    let mut server_value = None;
    for line in lines {
        if line.is_empty() {
            break;
        }
        if line.starts_with(' ') || line.starts_with('\t') {
            continue; // obs-fold continuation of the previous value
        }
        let (key, value) = match line.split_once(':') {
            Some((key, value)) => (key.to_string(), value.trim().to_string()),
            None => (line.to_string(), String::new()),
        };
        if key.eq_ignore_ascii_case("server") && server_value.is_none() {
            server_value = Some(value);
        }
        keys.push(key);
    }
    Ok(ResponseHead {
        code,
        keys,
        server_value,
    })
}

fn fetch_http(
    target: &FetchTarget,
    config: &FetchConfig,
) -> std::result::Result<ResponseHead, FetchFailure> {
    let addr = resolve(target, config.http_port)?;
    let mut stream = connect(addr, config.timeout)?;
    stream
        .write_all(&request_bytes(&target.domain, &config.user_agent))
        .map_err(|e| io_failure(&e))?;
    let head = read_head_bytes(&mut stream)?;
    parse_head(&head)
}

fn fetch_https(
    target: &FetchTarget,
    config: &FetchConfig,
) -> std::result::Result<ResponseHead, FetchFailure> {
    let stream = match proxy_from_env() {
        Some(proxy) => connect_via_proxy(&proxy, target, config)?,
        None => {
            let addr = resolve(target, config.https_port)?;
            connect(addr, config.timeout)?
        }
    };

    let tls_config = scanning_tls_config();
    let server_name = rustls::pki_types::ServerName::try_from(target.domain.clone())
        .or_else(|_| {
            target
                .ip
                .map(rustls::pki_types::ServerName::from)
                .ok_or(FetchFailure::Tls)
        })?;
    let connection =
        rustls::ClientConnection::new(tls_config, server_name).map_err(|_| FetchFailure::Tls)?;
    let mut tls = rustls::StreamOwned::new(connection, stream);

    tls.write_all(&request_bytes(&target.domain, &config.user_agent))
        .map_err(|e| tls_io_failure(&e))?;
    let head = match read_head_bytes(&mut tls) {
        Ok(head) => head,
        Err(FetchFailure::Connect) if !tls.conn.is_handshaking() => {
            return Err(FetchFailure::Connect)
        }
        Err(FetchFailure::Connect) => return Err(FetchFailure::Tls),
        Err(other) => return Err(other),
    };
    parse_head(&head)
}

/// Handshake-phase I/O problems are TLS failures; timeouts stay timeouts.
fn tls_io_failure(err: &std::io::Error) -> FetchFailure {
    match err.kind() {
        std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock => FetchFailure::Timeout,
        std::io::ErrorKind::InvalidData => FetchFailure::Tls,
        _ => FetchFailure::Tls,
    }
}

fn scanning_tls_config() -> Arc<rustls::ClientConfig> {
    use std::sync::OnceLock;
    static CONFIG: OnceLock<Arc<rustls::ClientConfig>> = OnceLock::new();
    CONFIG
        .get_or_init(|| {
            let roots = rustls::RootCertStore {
                roots: webpki_roots::TLS_SERVER_ROOTS.to_vec(),
            };
            let mut config = rustls::ClientConfig::builder()
                .with_root_certificates(roots)
                .with_no_client_auth();
            config
                .dangerous()
                .set_certificate_verifier(Arc::new(AcceptAnyServerCert));
            Arc::new(config)
        })
        .clone()
}

/// Scanner-mode verifier: fingerprint whatever the server presents.
#[derive(Debug)]
struct AcceptAnyServerCert;

impl rustls::client::danger::ServerCertVerifier for AcceptAnyServerCert {
    fn verify_server_cert(
        &self,
        _end_entity: &rustls::pki_types::CertificateDer<'_>,
        _intermediates: &[rustls::pki_types::CertificateDer<'_>],
        _server_name: &rustls::pki_types::ServerName<'_>,
        _ocsp_response: &[u8],
        _now: rustls::pki_types::UnixTime,
    ) -> std::result::Result<rustls::client::danger::ServerCertVerified, rustls::Error> {
        Ok(rustls::client::danger::ServerCertVerified::assertion())
    }

    fn verify_tls12_signature(
        &self,
        _message: &[u8],
        _cert: &rustls::pki_types::CertificateDer<'_>,
        _dss: &rustls::DigitallySignedStruct,
    ) -> std::result::Result<rustls::client::danger::HandshakeSignatureValid, rustls::Error> {
        Ok(rustls::client::danger::HandshakeSignatureValid::assertion())
    }

    fn verify_tls13_signature(
        &self,
        _message: &[u8],
        _cert: &rustls::pki_types::CertificateDer<'_>,
        _dss: &rustls::DigitallySignedStruct,
    ) -> std::result::Result<rustls::client::danger::HandshakeSignatureValid, rustls::Error> {
        Ok(rustls::client::danger::HandshakeSignatureValid::assertion())
    }

    fn supported_verify_schemes(&self) -> Vec<rustls::SignatureScheme> {
        use rustls::SignatureScheme::*;
        vec![
            RSA_PKCS1_SHA1,
            ECDSA_SHA1_Legacy,
            RSA_PKCS1_SHA256,
            ECDSA_NISTP256_SHA256,
            RSA_PKCS1_SHA384,
            ECDSA_NISTP384_SHA384,
            RSA_PKCS1_SHA512,
            ECDSA_NISTP521_SHA512,
            RSA_PSS_SHA256,
            RSA_PSS_SHA384,
            RSA_PSS_SHA512,
            ED25519,
            ED448,
        ]
    }
}

struct ProxyTarget {
    host: String,
    port: u16,
}

/// `HTTPS_PROXY` (or lowercase) as `[http://]host:port`.
fn proxy_from_env() -> Option<ProxyTarget> {
    let raw = std::env::var("HTTPS_PROXY")
        .or_else(|_| std::env::var("https_proxy"))
        .ok()?;
    parse_proxy_url(&raw)
}

fn parse_proxy_url(raw: &str) -> Option<ProxyTarget> {
    let rest = raw.trim().trim_start_matches("http://");
    let rest = rest.trim_end_matches('/');
    if rest.is_empty() {
        return None;
    }
    let (host, port) = match rest.rsplit_once(':') {
        Some((host, port)) => (host, port.parse().ok()?),
        None => (rest, 8080),
    };
    Some(ProxyTarget {
        host: host.to_string(),
        port,
    })
}

fn connect_via_proxy(
    proxy: &ProxyTarget,
    target: &FetchTarget,
    config: &FetchConfig,
) -> std::result::Result<TcpStream, FetchFailure> {
    let addr = (proxy.host.as_str(), proxy.port)
        .to_socket_addrs()
        .map_err(|_| FetchFailure::Connect)?
        .next()
        .ok_or(FetchFailure::Connect)?;
    let mut stream = connect(addr, config.timeout)?;
    let connect_req = format!(
        "CONNECT {host}:{port} HTTP/1.1\r\nHost: {host}:{port}\r\n\r\n",
        host = target.domain,
        port = config.https_port,
    );
    stream
        .write_all(connect_req.as_bytes())
        .map_err(|e| io_failure(&e))?;
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| io_failure(&e))?;
    if !line.contains(" 200") {
        return Err(FetchFailure::Connect);
    }
    // Drain remaining proxy response headers.
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).map_err(|e| io_failure(&e))?;
        if header == "\r\n" || header == "\n" || header.is_empty() {
            break;
        }
    }
    Ok(reader.into_inner())
}
