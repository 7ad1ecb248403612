//! Two-step classification: detect first, then identify.
//!
//! Stage one is a binary detector over all traffic. Only windows it flags
//! as malicious reach stage two, which assigns the malware family — so a
//! benign window can never receive a family label, and the family model's
//! mistakes are confined to traffic already deemed malicious.
//!
//! Run with: `cargo run --release --example two_step_pipeline`

use dnslsh::features::{featurize_window, label_window, make_windows, FeatureRow};
use dnslsh::ingest::{group_by_domain, DnsQueryRecord, SuffixRules};
use dnslsh::model::{
    assemble_dataset, evaluate_two_step, stratified_split, train_forest, two_step_classify,
    Hyperparams, Task,
};
use dnslsh::pipeline::PipelineConfig;
use dnslsh::synth::{generate, SynthKind, SynthProfile};

fn main() -> dnslsh::Result<()> {
    let config = PipelineConfig::default();
    let hash = config.hash_config();

    // Benign traffic plus three distinguishable tunnel profiles, which the
    // generator labels as the `synthetic` family; to give the family model
    // more than one malicious class we rename per behavior here.
    let mix = [
        (SynthKind::BenignStatic, "corp.example", 31u64, None),
        (SynthKind::BenignCdn, "cdn.example", 32, None),
        (SynthKind::TunnelUpload, "exfil.example", 33, Some("redteam-upload")),
        (SynthKind::TunnelDownload, "c2.example", 34, Some("redteam-download")),
        (SynthKind::TunnelIdle, "beacon.example", 35, Some("redteam-idle")),
    ];
    let mut records: Vec<DnsQueryRecord> = Vec::new();
    for (kind, domain, seed, rename) in mix {
        let mut profile = SynthProfile::for_kind(kind, seed);
        profile.domain = domain.to_string();
        profile.queries = 400;
        let mut generated = generate(&profile)?;
        if let Some(family) = rename {
            for record in &mut generated {
                record.family_label = Some(family.to_string());
            }
        }
        records.extend(generated);
    }

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

    // Split once on the binary dataset, then train both stages on the same
    // training rows.
    let (binary_all, _) = assemble_dataset(&rows, Task::Binary)?;
    let (train_refs, test_refs) = {
        let (train, test) = stratified_split(&binary_all, 0.7, config.seed)?;
        (train.refs.clone(), test.refs.clone())
    };
    let in_refs = |refs: &[(String, usize)], row: &FeatureRow| {
        refs.iter()
            .any(|(key, index)| key == &row.stream_key && *index == row.window_index)
    };
    let train_rows: Vec<FeatureRow> = rows
        .iter()
        .filter(|row| in_refs(&train_refs, row))
        .cloned()
        .collect();
    let test_rows: Vec<FeatureRow> = rows
        .iter()
        .filter(|row| in_refs(&test_refs, row))
        .cloned()
        .collect();

    let meta = config.feature_metadata();
    let (binary_train, _) = assemble_dataset(&train_rows, Task::Binary)?;
    let binary_model = train_forest(&binary_train, &Hyperparams::default(), config.seed, &meta)?;
    let (family_train, _) = assemble_dataset(&train_rows, Task::Family)?;
    let family_model = train_forest(&family_train, &Hyperparams::default(), config.seed, &meta)?;
    println!("binary classes: {:?}", binary_model.classes);
    println!("family classes: {:?}", family_model.classes);
    println!();

    // Classify a few held-out windows through the chain.
    println!("sample chained decisions:");
    for row in test_rows.iter().take(6) {
        let verdict = two_step_classify(&binary_model, &family_model, &row.values)?;
        println!(
            "  {}#{} true={} → {verdict}",
            row.stream_key,
            row.window_index,
            row.label_family.as_deref().unwrap_or("?")
        );
    }
    println!();

    // Full two-step evaluation on the held-out rows.
    let metrics = evaluate_two_step(&binary_model, &family_model, &test_rows)?;
    println!("{metrics}");
    Ok(())
}
