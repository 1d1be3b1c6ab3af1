//! Canonicalize a header capture and hash it with 32-bit MurmurHash3.
//! Order is identity: permuting two keys changes the hash.
//!
//!     cargo run --example header_fingerprint

use tlsmap::headers::{canonicalize, header_fingerprint, mmh3_32, FetchStatus, HeaderCapture};

fn capture(keys: &[&str], server: Option<&str>) -> HeaderCapture {
    HeaderCapture {
        domain: "demo.example".into(),
        status: FetchStatus::Ok,
        keys: keys.iter().map(|k| k.to_string()).collect(),
        server_value: server.map(str::to_string),
        fetched_at: 0,
    }
}

fn main() -> Result<(), tlsmap::Error> {
    let original = capture(
        &["Server", "Date", "Content-Type", "Content-Length"],
        Some("cloudflare"),
    );
    let canonical = canonicalize(&original)?;
    println!("canonical string:\n{canonical}\n");

    let fp = header_fingerprint(&original)?;
    println!("mmh3_32(canonical, seed 0) = {}", fp.hash);

    // Same keys, different order: a different fingerprint.
    let reordered = capture(
        &["Date", "Server", "Content-Type", "Content-Length"],
        Some("cloudflare"),
    );
    let fp2 = header_fingerprint(&reordered)?;
    println!("reordered keys             = {}", fp2.hash);
    assert_ne!(fp.hash, fp2.hash);

    // Values are discarded; only the Server value participates.
    let other_server = capture(
        &["Server", "Date", "Content-Type", "Content-Length"],
        Some("nginx"),
    );
    println!("different Server value     = {}", header_fingerprint(&other_server)?.hash);

    // The raw hash function against a couple of reference inputs.
    println!("\nmmh3_32(\"test\", 0)          = {}", mmh3_32(b"test", 0));
    println!("mmh3_32(\"Hello, world!\", 0) = {}", mmh3_32(b"Hello, world!", 0));
    Ok(())
}
