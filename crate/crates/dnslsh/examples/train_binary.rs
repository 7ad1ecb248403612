//! Train and evaluate a binary covert-channel detector, entirely in memory.
//!
//! Mixes synthetic benign and tunnel traffic from several domains,
//! featurizes it, takes a seeded stratified 70/30 split, trains a random
//! forest, and reports accuracy, F1 and false-positive rate on the held-out
//! windows.
//!
//! Run with: `cargo run --release --example train_binary`

use dnslsh::features::{featurize_window, label_window, make_windows, FeatureRow};
use dnslsh::ingest::{group_by_domain, DnsQueryRecord, SuffixRules};
use dnslsh::model::{
    assemble_dataset, compute_metrics, stratified_split, train_forest, Hyperparams, Task,
};
use dnslsh::pipeline::PipelineConfig;
use dnslsh::synth::{generate, SynthKind, SynthProfile};

fn main() -> dnslsh::Result<()> {
    let config = PipelineConfig::default();
    let hash = config.hash_config();

    // Six domains, half benign, half tunneling.
    let mut records: Vec<DnsQueryRecord> = Vec::new();
    let mix = [
        (SynthKind::BenignStatic, "corp.example", 1u64),
        (SynthKind::BenignCdn, "cdn.example", 2),
        (SynthKind::BenignStatic, "shop.example", 3),
        (SynthKind::TunnelUpload, "exfil.example", 4),
        (SynthKind::TunnelDownload, "c2.example", 5),
        (SynthKind::TunnelIdle, "beacon.example", 6),
    ];
    for (kind, domain, seed) in mix {
        let mut profile = SynthProfile::for_kind(kind, seed);
        profile.domain = domain.to_string();
        profile.queries = 400;
        records.extend(generate(&profile)?);
    }

    // Group → window → featurize + label.
    let (streams, _) = group_by_domain(records, SuffixRules::bundled(), &config.delimiters);
    let mut rows = Vec::new();
    for stream in &streams {
        let (windows, _) = make_windows(stream, config.window_size, &hash)?;
        for window in &windows {
            let features = featurize_window(window)?;
            let label = label_window(window)?;
            rows.push(FeatureRow {
                stream_key: window.key.to_string(),
                window_index: window.index,
                label_binary: Some(label.binary),
                label_family: Some(label.family.clone()),
                label_behavior: label.behavior,
                values: features.values,
            });
        }
    }
    println!(
        "{} windows of {} queries from {} domain streams",
        rows.len(),
        config.window_size,
        streams.len()
    );

    let (dataset, _excluded) = assemble_dataset(&rows, Task::Binary)?;
    let (train, test) = stratified_split(&dataset, 0.7, config.seed)?;
    println!("train {} / test {}", train.len(), test.len());

    let meta = config.feature_metadata();
    let model = train_forest(&train, &Hyperparams::default(), config.seed, &meta)?;

    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for (x, &label) in test.features.iter().zip(&test.labels) {
        truth.push(label);
        predicted.push(model.predict(x)?.class_index as u32);
    }
    let metrics = compute_metrics(&test.classes, &truth, &predicted, true)?;
    println!();
    println!("{metrics}");
    Ok(())
}
