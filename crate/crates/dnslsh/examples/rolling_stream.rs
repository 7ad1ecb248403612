//! Streaming featurization with a rolling window.
//!
//! Batch featurization recomputes every pairwise comparison per window.
//! `RollingState` instead maintains one sliding window per domain stream:
//! each arriving query is compared only against the current residents
//! (n−1 comparisons per slot once warm), and evicted queries retract
//! their scores. The emitted vectors are bit-for-bit identical to the
//! batch path over the same queries.
//!
//! Run with: `cargo run --example rolling_stream`

use dnslsh::features::{featurize_window, make_windows, RollingState};
use dnslsh::ingest::{group_by_domain, SuffixRules};
use dnslsh::lsh::HashConfig;
use dnslsh::synth::{generate, SynthKind, SynthProfile};

fn main() -> dnslsh::Result<()> {
    let config = HashConfig::default();
    let n = 8;

    let mut profile = SynthProfile::for_kind(SynthKind::TunnelDownload, 21);
    profile.domain = "stream.example".into();
    profile.queries = 40;
    let records = generate(&profile)?;
    let (streams, _) = group_by_domain(records, SuffixRules::bundled(), &config.delimiters);
    let stream = &streams[0];

    // Streaming pass: feed cleaned subdomains one at a time. The state
    // emits a vector for every full window, sliding by one query.
    let mut state = RollingState::new(stream.key.clone(), n, &config)?;
    let mut emitted = Vec::new();
    for query in &stream.queries {
        if let Some(vector) = state.push(&query.subdomain_clean)? {
            emitted.push(vector);
        }
    }
    println!(
        "streamed {} queries through a window of {n}: {} vectors emitted, {} digest comparisons",
        stream.queries.len(),
        emitted.len(),
        state.compare_calls()
    );

    // Batch reference: only non-overlapping windows exist there, so
    // compare stride-n snapshots of the stream.
    let (windows, _) = make_windows(stream, n, &config)?;
    for (w, window) in windows.iter().enumerate() {
        let batch = featurize_window(window)?;
        let streaming = &emitted[w * n];
        assert_eq!(
            streaming.values, batch.values,
            "window {w}: streaming must equal batch exactly"
        );
    }
    println!(
        "{} non-overlapping windows match the batch path bit for bit",
        windows.len()
    );

    // The emission index records which query completed the window.
    let first = &emitted[0];
    println!(
        "first emission: stream {} window index {}",
        first.window_ref.0, first.window_ref.1
    );
    Ok(())
}
