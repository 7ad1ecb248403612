//! Capture-file round trips: the crate's own pcap writer produces files the
//! parser must read back losslessly, and filtering rules (responses,
//! malformed frames) are exercised on byte-patched captures.

use dnslsh::ingest::{parse_pcap, write_query_pcap, DnsQueryRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn query(ts: f64, qname: &str, qtype: &str) -> DnsQueryRecord {
    DnsQueryRecord {
        timestamp: ts,
        qname: qname.to_string(),
        qtype: qtype.to_string(),
        family_label: None,
        behavior_label: None,
        source: String::new(),
    }
}

#[test]
fn single_query_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.pcap");
    write_query_pcap(&path, &[query(1716200000.125, "x.example.com", "A")]).unwrap();
    let (records, summary) = parse_pcap(&path, "cap").unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].qname, "x.example.com");
    assert_eq!(records[0].qtype, "A");
    assert_eq!(records[0].source, "cap");
    assert!((records[0].timestamp - 1716200000.125).abs() < 1e-5);
    assert_eq!(summary.packets, 1);
    assert_eq!(summary.queries, 1);
}

#[test]
fn hundred_query_round_trip_exact_qnames() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let alphabet: Vec<char> = ('a'..='z').chain('0'..='9').collect();
    let types = ["A", "TXT", "NULL", "CNAME", "MX", "AAAA", "SRV", "TYPE65281"];
    let mut queries = Vec::new();
    for i in 0..100 {
        let label: String = (0..rng.random_range(5..40))
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        queries.push(query(
            1000.0 + i as f64 * 0.37,
            &format!("{label}.tunnel{}.example.com", i % 7),
            types[i % types.len()],
        ));
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hundred.pcap");
    let written = write_query_pcap(&path, &queries).unwrap();
    assert_eq!(written, 100);

    let (records, summary) = parse_pcap(&path, "synthcap").unwrap();
    assert_eq!(records.len(), 100);
    assert_eq!(summary.queries, 100);
    assert_eq!(summary.malformed, 0);
    for (got, want) in records.iter().zip(&queries) {
        assert_eq!(got.qname, want.qname);
        assert_eq!(got.qtype, want.qtype);
        assert!((got.timestamp - want.timestamp).abs() < 1e-5);
        assert!(got.family_label.is_none(), "pcap carries no labels");
    }
}

/// Byte offset of the DNS flags field inside the first packet of a capture
/// written by `write_query_pcap`: 24 (pcap global header) + 16 (record
/// header) + 14 (ethernet) + 20 (ipv4) + 8 (udp) + 2 (dns id).
const FIRST_DNS_FLAGS_OFFSET: usize = 24 + 16 + 14 + 20 + 8 + 2;

#[test]
fn responses_are_filtered() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("resp.pcap");
    write_query_pcap(&path, &[query(5.0, "a.example.com", "A")]).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[FIRST_DNS_FLAGS_OFFSET] |= 0x80; // set QR: query → response
    std::fs::write(&path, &bytes).unwrap();

    let (records, summary) = parse_pcap(&path, "cap").unwrap();
    assert_eq!(records.len(), 0);
    assert_eq!(summary.responses, 1);
    assert_eq!(summary.queries, 0);
}

#[test]
fn corrupt_dns_payload_counted_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.pcap");
    write_query_pcap(
        &path,
        &[query(1.0, "ok.example.com", "A"), query(2.0, "x.example.com", "A")],
    )
    .unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    // Claim a 63-byte label in packet 1's qname but leave shorter data:
    // the DNS message still fits its UDP envelope but the name overruns.
    bytes[FIRST_DNS_FLAGS_OFFSET + 10] = 63;
    std::fs::write(&path, &bytes).unwrap();

    let (records, summary) = parse_pcap(&path, "cap").unwrap();
    assert_eq!(summary.malformed, 1);
    assert_eq!(records.len(), 1, "healthy packet still extracted");
    assert_eq!(records[0].qname, "x.example.com");
}

#[test]
fn truncated_file_keeps_leading_packets() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trunc.pcap");
    write_query_pcap(
        &path,
        &[query(1.0, "a.example.com", "A"), query(2.0, "b.example.com", "A")],
    )
    .unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 30]).unwrap();

    let (records, summary) = parse_pcap(&path, "cap").unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].qname, "a.example.com");
    assert_eq!(summary.malformed, 1);
}

#[test]
fn not_a_capture_is_an_io_level_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noise.pcap");
    std::fs::write(&path, b"this is not a capture file at all").unwrap();
    let err = parse_pcap(&path, "cap").unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let missing = parse_pcap(&dir.path().join("gone.pcap"), "cap").unwrap_err();
    assert_eq!(missing.exit_code(), 3);
}
