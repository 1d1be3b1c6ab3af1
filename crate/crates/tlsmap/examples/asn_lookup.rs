//! Longest-prefix-match AS lookups over a pyasn-style database.
//!
//!     cargo run --example asn_lookup

use std::path::Path;

use tlsmap::ingest::load_asn_db;

fn main() -> Result<(), tlsmap::Error> {
    let db_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus60/asn.dat");
    let db = load_asn_db(&db_path)?;
    println!(
        "loaded {} prefixes from {} ({} malformed lines skipped)",
        db.len(),
        db_path.display(),
        db.skipped_lines()
    );

    for ip in ["203.0.113.5", "203.0.113.200", "198.51.100.9", "192.0.2.13", "8.8.8.8"] {
        let parsed: std::net::Ipv4Addr = ip.parse().unwrap();
        match db.lookup(parsed) {
            // 203.0.113.5 sits inside both the /24 and the /25; the /25 wins.
            Some(asn) => println!("{ip:>15} -> AS{asn}"),
            None => println!("{ip:>15} -> no covering prefix"),
        }
    }
    Ok(())
}
