//! Live header capture against a loopback fixture server, demonstrating the
//! https-then-fallback fetch, wire-order preservation and failure statuses.
//! Runs fully offline.
//!
//!     cargo run --example capture_headers

use std::io::{Read, Write};
use std::net::TcpListener;
use std::time::Duration;

use tlsmap::headers::{fetch_many, FetchConfig, FetchTarget};

/// Minimal responder: drops TLS ClientHellos (first byte 0x16) so the client
/// falls back to plain HTTP, then answers with a fixed header sequence.
fn spawn_fixture() -> std::net::SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        while let Ok((mut stream, _)) = listener.accept() {
            std::thread::spawn(move || {
                let mut first = [0u8; 1];
                if !matches!(stream.peek(&mut first), Ok(1)) || first[0] == 0x16 {
                    return;
                }
                let mut buf = [0u8; 1024];
                let mut head = Vec::new();
                while let Ok(n) = stream.read(&mut buf) {
                    if n == 0 {
                        break;
                    }
                    head.extend_from_slice(&buf[..n]);
                    if head.windows(4).any(|w| w == b"\r\n\r\n") {
                        break;
                    }
                }
                let _ = stream.write_all(
                    b"HTTP/1.1 200 OK\r\nServer: fixture/0.9\r\nDate: Mon, 01 Jan 2024 00:00:00 GMT\r\nSet-Cookie: a=1\r\nSet-Cookie: b=2\r\nContent-Length: 0\r\n\r\n",
                );
            });
        }
    });
    addr
}

fn main() {
    let addr = spawn_fixture();
    let config = FetchConfig {
        timeout: Duration::from_secs(3),
        allow_http_fallback: true,
        https_port: addr.port(),
        http_port: addr.port(),
        concurrency: 4,
        ..FetchConfig::default()
    };

    let targets = [
        FetchTarget::with_ip("fixture-a.example", addr.ip()),
        FetchTarget::with_ip("fixture-b.example", addr.ip()),
        // tcp/1 on loopback: nothing listens, so this records connect_error.
        FetchTarget::with_ip("dead.example", "127.0.0.2".parse().unwrap()),
    ];
    let dead_config = FetchConfig { https_port: 1, ..config.clone() };

    for capture in fetch_many(&targets[..2], &config) {
        println!("{}:", capture.domain);
        println!("  status: {:?}", capture.status);
        println!("  keys (wire order, duplicates kept): {:?}", capture.keys);
        println!("  server value: {:?}", capture.server_value);
        match tlsmap::headers::header_fingerprint(&capture) {
            Ok(fp) => println!("  header hash: {}", fp.hash),
            Err(e) => println!("  not hashable: {e}"),
        }
    }

    let dead = fetch_many(&targets[2..], &dead_config);
    println!("{}:", dead[0].domain);
    println!("  status: {:?} (no response head, nothing to hash)", dead[0].status);
}
