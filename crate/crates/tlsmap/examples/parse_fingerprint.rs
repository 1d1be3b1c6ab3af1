//! Parse a raw ten-probe scan fingerprint into segments, deduplicated
//! feature sets and its SHA-256 identity.
//!
//!     cargo run --example parse_fingerprint

use tlsmap::tls::parse_raw;

fn main() -> Result<(), tlsmap::Error> {
    // A server that completed four handshakes with different parameters and
    // answered three probes with TLS alerts.
    let raw = concat!(
        "771_1302_43.AwQ-51.23_0.-16.AAMCaDI__43.AwQ-51.23_-",
        "|771_c030_0.-1.AQ-16.AAkIaHR0cC8xLjE____",
        "|771_c02f_65281.-0.-11.AwABAg-35.-16.AAMCaDI____",
        "|771_1301_43.AwQ-51.29_0.-10.AAQAFwAd___-",
        "|______<40",
        "|771_1302_43.AwQ-51.23_0.-16.AAMCaDI__43.AwQ-51.23_-",
        "|______<70",
        "|771_c02c_0.-1.AQ-35.-16.AAMCaDI____",
        "|______<40",
        "|771_cca8_0.-16.AAMCaDI____",
    );

    let fingerprint = parse_raw(raw)?;

    println!("segments: {}", fingerprint.segments.len());
    for (index, segment) in fingerprint.segments.iter().enumerate() {
        if segment.is_alert() {
            println!("  [{index}] alert {}", segment.alert().unwrap_or("?"));
        } else {
            println!(
                "  [{index}] version {} cipher {}",
                segment.version(),
                segment.cipher()
            );
        }
    }

    let dedup = &fingerprint.dedup;
    println!("\ndeduplicated feature sets (first-seen order):");
    println!("  versions:               {:?}", dedup.versions);
    println!("  ciphers:                {:?}", dedup.ciphers);
    println!("  extensions:             {:?}", dedup.extensions);
    println!("  encrypted extensions:   {:?}", dedup.encrypted_extensions);
    println!("  certificate extensions: {:?}", dedup.certificate_extensions);
    println!("  alerts:                 {:?}", dedup.alerts);

    println!("\nsha256 identity: {}", fingerprint.sha256_id);
    assert_eq!(fingerprint.to_raw(), raw, "parse is lossless");
    println!("re-serialization is byte-identical to the input");
    Ok(())
}
