// Shared example helper: a labeled synthetic mix, featurized.
// Included via `include!` by examples that need ready-made feature rows.

use dnslsh::features::{featurize_window, label_window, make_windows, FeatureRow};
use dnslsh::ingest::{group_by_domain, DnsQueryRecord, SuffixRules};
use dnslsh::pipeline::PipelineConfig;
use dnslsh::synth::{generate, SynthKind, SynthProfile};

/// Generate a six-domain benign/tunnel mix, group it, and featurize it
/// under `config`, returning one labeled row per window.
pub fn synthetic_feature_rows(
    config: &PipelineConfig,
    queries_per_domain: usize,
) -> dnslsh::Result<Vec<FeatureRow>> {
    let mix = [
        (SynthKind::BenignStatic, "corp.example", 71u64),
        (SynthKind::BenignCdn, "cdn.example", 72),
        (SynthKind::BenignStatic, "wiki.example", 73),
        (SynthKind::TunnelUpload, "exfil.example", 74),
        (SynthKind::TunnelDownload, "c2.example", 75),
        (SynthKind::TunnelIdle, "beacon.example", 76),
    ];
    let mut records: Vec<DnsQueryRecord> = Vec::new();
    for (kind, domain, seed) in mix {
        let mut profile = SynthProfile::for_kind(kind, seed);
        profile.domain = domain.to_string();
        profile.queries = queries_per_domain;
        records.extend(generate(&profile)?);
    }

    let hash = config.hash_config();
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
    Ok(rows)
}
