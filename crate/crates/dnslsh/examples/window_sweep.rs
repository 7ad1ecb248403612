//! How window size trades latency against accuracy.
//!
//! Small windows flag a channel after a handful of queries but give the
//! statistics little to work with; large windows smooth the score
//! distributions at the cost of needing more traffic per decision. This
//! example sweeps n over the standard grid on a fixed synthetic mix and
//! prints the resulting metrics table.
//!
//! Run with: `cargo run --release --example window_sweep`

use std::path::PathBuf;

use dnslsh::ingest::{write_csv, DnsQueryRecord};
use dnslsh::pipeline::{run_sweep, PipelineConfig, SWEEP_WINDOW_SIZES};
use dnslsh::synth::{generate, SynthKind, SynthProfile};

fn main() -> dnslsh::Result<()> {
    let dir = std::env::temp_dir().join("dnslsh-sweep-example");
    std::fs::create_dir_all(&dir).expect("create output directory");
    let queries_path: PathBuf = dir.join("queries.csv");
    let table_path: PathBuf = dir.join("sweep.csv");

    // A fixed labeled mix: three benign domains, three tunnels.
    let mix = [
        (SynthKind::BenignStatic, "corp.example", 51u64),
        (SynthKind::BenignCdn, "cdn.example", 52),
        (SynthKind::BenignStatic, "wiki.example", 53),
        (SynthKind::TunnelUpload, "exfil.example", 54),
        (SynthKind::TunnelDownload, "c2.example", 55),
        (SynthKind::TunnelIdle, "beacon.example", 56),
    ];
    let mut records: Vec<DnsQueryRecord> = Vec::new();
    for (kind, domain, seed) in mix {
        let mut profile = SynthProfile::for_kind(kind, seed);
        profile.domain = domain.to_string();
        profile.queries = 300;
        records.extend(generate(&profile)?);
    }
    write_csv(&records, &queries_path)?;
    println!(
        "sweeping window sizes {SWEEP_WINDOW_SIZES:?} over {} queries",
        records.len()
    );
    println!();

    // Featurize + 70/30 split + train + evaluate per window size.
    let mut config = PipelineConfig::default();
    config.forest.tree_count = 50;
    let report = run_sweep(&config, &queries_path, &table_path, None)?;
    println!("{report}");

    println!("metrics table: {}", table_path.display());
    let table = std::fs::read_to_string(&table_path).expect("read sweep table");
    for line in table.lines() {
        println!("  {line}");
    }
    Ok(())
}
