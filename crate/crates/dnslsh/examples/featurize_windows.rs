//! From raw queries to feature vectors.
//!
//! Each per-domain stream is cut into fixed-size windows of consecutive
//! queries. Within a window, every pair of queries is compared per digest
//! slot, and each slot's score distribution is summarized by eight order
//! statistics — mean, median, quartiles, variance, min, max, range. The
//! result is one fixed-width vector per window, plus a label when the
//! input is labeled.
//!
//! Run with: `cargo run --example featurize_windows`

use dnslsh::features::{
    featurize_window, label_window, make_windows, pairwise_scores, STAT_NAMES,
};
use dnslsh::ingest::{group_by_domain, SuffixRules};
use dnslsh::lsh::HashConfig;
use dnslsh::synth::{generate, SynthKind, SynthProfile};

fn main() -> dnslsh::Result<()> {
    let config = HashConfig::default();

    // 45 queries from one benign domain: with n = 20 that is two full
    // windows; the 5 trailing queries are discarded.
    let mut profile = SynthProfile::for_kind(SynthKind::BenignStatic, 11);
    profile.domain = "files.example".into();
    profile.queries = 45;
    let records = generate(&profile)?;

    let (streams, _report) = group_by_domain(records, SuffixRules::bundled(), &config.delimiters);
    let stream = &streams[0];

    let n = 20;
    let (windows, discarded) = make_windows(stream, n, &config)?;
    println!(
        "stream {}: {} queries → {} windows of {n} ({discarded} trailing queries discarded)",
        stream.key,
        stream.queries.len(),
        windows.len()
    );
    println!();

    // Raw pairwise scores for the first window, slot 0 (the whole-subdomain
    // digest): n·(n−1)/2 comparisons.
    let window = &windows[0];
    let scores = pairwise_scores(window, 0)?;
    assert_eq!(scores.len(), n * (n - 1) / 2);
    let preview: Vec<i32> = scores.iter().take(10).copied().collect();
    println!(
        "window 0, slot `global`: {} pairwise scores, first ten {preview:?}",
        scores.len()
    );
    println!();

    // The feature vector: 8 statistics × slot count, in slot-major order.
    let features = featurize_window(window)?;
    println!("feature vector ({} values):", features.values.len());
    for (slot, slot_name) in config.slot_names().iter().enumerate() {
        print!("  {slot_name:<9}");
        for (stat, stat_name) in STAT_NAMES.iter().enumerate() {
            print!(" {stat_name}={:<8.2}", features.values[slot * STAT_NAMES.len() + stat]);
        }
        println!();
    }
    println!();

    // Labels are majority votes over the window's queries.
    let label = label_window(window)?;
    println!(
        "window label: binary={} family={} compound={}",
        label.binary,
        label.family,
        label.compound.as_deref().unwrap_or("n/a")
    );
    Ok(())
}
