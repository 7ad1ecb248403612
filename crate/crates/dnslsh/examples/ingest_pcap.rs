//! Round-trip DNS queries through a PCAP capture.
//!
//! Writes synthetic queries out as a real capture file (Ethernet/IPv4/UDP
//! frames carrying DNS question packets), parses the capture back, and
//! groups the recovered queries into per-domain streams — the first stage
//! of the detection pipeline.
//!
//! Run with: `cargo run --example ingest_pcap`

use dnslsh::ingest::{group_by_domain, parse_pcap, write_query_pcap, SuffixRules};
use dnslsh::lsh::HashConfig;
use dnslsh::synth::{generate, SynthKind, SynthProfile};

fn main() -> dnslsh::Result<()> {
    let dir = std::env::temp_dir().join("dnslsh-pcap-example");
    std::fs::create_dir_all(&dir).expect("create output directory");
    let pcap_path = dir.join("tunnel.pcap");

    // Some traffic to capture: an idle tunnel beaconing to one domain.
    let mut profile = SynthProfile::for_kind(SynthKind::TunnelIdle, 3);
    profile.domain = "updates.example".into();
    profile.queries = 50;
    let records = generate(&profile)?;

    let written = write_query_pcap(&pcap_path, &records)?;
    println!("wrote {written} query packets to {}", pcap_path.display());

    // Parse it back. The parser keeps DNS queries (QR=0), skips responses
    // and non-DNS traffic, and reports what it saw.
    let (parsed, summary) = parse_pcap(&pcap_path, "tunnel-capture")?;
    println!("{summary}");
    assert_eq!(parsed.len(), records.len(), "every query survives the trip");
    for (a, b) in parsed.iter().zip(&records) {
        assert_eq!(a.qname, b.qname);
        assert_eq!(a.qtype, b.qtype);
    }
    println!("all {} query names and types recovered intact", parsed.len());
    println!();

    // Group into per-domain streams: queries are keyed by
    // (source, registered domain) and ordered by timestamp. The registered
    // domain comes from public-suffix rules, so `foo.updates.example` and
    // `bar.updates.example` share a stream.
    let config = HashConfig::default();
    let (streams, report) = group_by_domain(parsed, SuffixRules::bundled(), &config.delimiters);
    println!("{report}");
    for stream in &streams {
        println!(
            "stream {}: {} queries, first subdomain {:?}",
            stream.key,
            stream.queries.len(),
            stream.queries[0].subdomain_clean
        );
    }
    Ok(())
}
