//! Windowed similarity features.
//!
//! A stream's queries are cut into fixed-size non-overlapping windows. For
//! every digest slot (global + segments), all `n(n−1)/2` unordered pairs of
//! queries in a window are compared, and the resulting integer score list
//! is summarized into eight statistics: mean, median, Q1, Q3, variance,
//! min, max, range. The concatenation over slots is the window's feature
//! vector.
//!
//! All aggregation runs on exact integer accumulators (scores are in
//! [−128, 128], so sums and sums of squares stay far inside `i64`), and the
//! statistics of a score multiset are computed from a 257-bin histogram by
//! one shared routine. The batch path ([`featurize_window`]) and the
//! streaming path ([`rolling::RollingState`]) therefore produce
//! bit-identical vectors for the same multiset — not merely close ones.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Behavior, CleanQuery, DomainStream, StreamKey, LEGITIMATE};
use crate::lsh::{compare, digest_query, HashConfig, QueryDigests};

pub mod rolling;

pub use rolling::RollingState;

/// Number of statistics per digest slot.
pub const STATS_PER_SLOT: usize = 8;

/// Statistic names in feature order, for reports and metadata.
pub const STAT_NAMES: [&str; STATS_PER_SLOT] = [
    "mean", "median", "q1", "q3", "variance", "min", "max", "range",
];

/// A fixed-size block of consecutive queries from one stream, with their
/// digests.
#[derive(Clone, Debug)]
pub struct Window {
    pub key: StreamKey,
    /// Ordinal of this window within its stream (0-based).
    pub index: usize,
    /// Exactly `n` queries, in stream order.
    pub queries: Vec<CleanQuery>,
    /// One digest bundle per query; all with identical slot counts.
    pub digests: Vec<QueryDigests>,
}

/// One window's feature vector: `8 × slot_count` values, per slot in
/// [`STAT_NAMES`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub window_ref: (StreamKey, usize),
}

/// Binary ground truth of a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Legitimate,
    Malicious,
}

impl BinaryLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            BinaryLabel::Legitimate => "legitimate",
            BinaryLabel::Malicious => "malicious",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground-truth labels of one window, derived from its queries by majority
/// vote.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowLabel {
    pub binary: BinaryLabel,
    /// Winning family (possibly `legitimate`).
    pub family: String,
    /// Majority behavior among the winning family's queries; `None` for
    /// legitimate windows or when the family's queries carry no behavior.
    pub behavior: Option<Behavior>,
    /// `Family_Behavior` compound class, defined only when `behavior` is.
    pub compound: Option<String>,
}

/// Cut `stream` into ⌊len/n⌋ windows of exactly `n` queries and hash every
/// query under `config`. Returns the windows and the count of trailing
/// queries discarded because they could not fill a window.
pub fn make_windows(
    stream: &DomainStream,
    n: usize,
    config: &HashConfig,
) -> Result<(Vec<Window>, usize)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "window size must be at least 2, got {n}"
        )));
    }
    config.validate()?;
    let full = stream.queries.len() / n;
    let discarded = stream.queries.len() - full * n;
    let mut windows = Vec::with_capacity(full);
    for index in 0..full {
        let queries = stream.queries[index * n..(index + 1) * n].to_vec();
        let digests = queries
            .iter()
            .map(|q| digest_query(&q.subdomain_clean, config))
            .collect();
        windows.push(Window {
            key: stream.key.clone(),
            index,
            queries,
            digests,
        });
    }
    Ok((windows, discarded))
}

/// Similarity scores of all unordered query pairs in `window` at `slot`,
/// in (i, j)-lexicographic order (i < j).
pub fn pairwise_scores(window: &Window, slot: usize) -> Result<Vec<i32>> {
    let slot_count = window
        .digests
        .first()
        .map(|d| d.slots.len())
        .unwrap_or(0);
    if slot >= slot_count {
        return Err(Error::InvalidArgument(format!(
            "slot {slot} out of range (window has {slot_count} slots)"
        )));
    }
    let n = window.digests.len();
    let mut scores = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            scores.push(compare(
                &window.digests[i].slots[slot],
                &window.digests[j].slots[slot],
            ));
        }
    }
    Ok(scores)
}

/// Exact integer aggregate of a similarity-score multiset: a histogram over
/// the 257 possible values plus running sums. This is the meeting point of
/// the batch and rolling paths — both feed one of these and read statistics
/// out through [`ScoreAggregate::stats`].
#[derive(Clone)]
pub struct ScoreAggregate {
    /// counts[s + 128] = multiplicity of score s.
    counts: [u32; 257],
    sum: i64,
    sum_sq: i64,
    len: u64,
}

impl Default for ScoreAggregate {
    fn default() -> Self {
        ScoreAggregate {
            counts: [0u32; 257],
            sum: 0,
            sum_sq: 0,
            len: 0,
        }
    }
}

impl ScoreAggregate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, score: i32) {
        debug_assert!((-128..=128).contains(&score));
        self.counts[(score + 128) as usize] += 1;
        self.sum += score as i64;
        self.sum_sq += (score as i64) * (score as i64);
        self.len += 1;
    }

    pub fn remove(&mut self, score: i32) {
        let bin = &mut self.counts[(score + 128) as usize];
        debug_assert!(*bin > 0, "removing a score that was never inserted");
        *bin -= 1;
        self.sum -= score as i64;
        self.sum_sq -= (score as i64) * (score as i64);
        self.len -= 1;
    }

    /// Score at 0-based rank `rank` of the sorted multiset.
    fn value_at_rank(&self, rank: u64) -> i32 {
        let mut seen = 0u64;
        for (bin, &count) in self.counts.iter().enumerate() {
            seen += count as u64;
            if seen > rank {
                return bin as i32 - 128;
            }
        }
        unreachable!("rank {rank} out of range for {} scores", self.len)
    }

    /// Quantile by linear interpolation between closest ranks: position
    /// `p·(m−1)` on the sorted list.
    fn quantile(&self, p: f64) -> f64 {
        let h = p * (self.len - 1) as f64;
        let lo = h.floor() as u64;
        let frac = h - lo as f64;
        let v_lo = self.value_at_rank(lo) as f64;
        if frac == 0.0 {
            v_lo
        } else {
            let v_hi = self.value_at_rank(lo + 1) as f64;
            v_lo + frac * (v_hi - v_lo)
        }
    }

    /// The eight statistics of the aggregated multiset, in [`STAT_NAMES`]
    /// order. Errors on an empty aggregate.
    pub fn stats(&self) -> Result<[f64; STATS_PER_SLOT]> {
        if self.len == 0 {
            return Err(Error::InvalidArgument(
                "statistics of an empty score list are undefined".into(),
            ));
        }
        let m = self.len as i64;
        let mean = self.sum as f64 / m as f64;
        // Population variance, computed exactly in integers first:
        // Var = (m·Σx² − (Σx)²) / m². Both products stay below 2^53 for
        // any window this crate can produce, so the division is the only
        // rounding step — and it is identical on every path.
        let numerator = m * self.sum_sq - self.sum * self.sum;
        let variance = numerator as f64 / (m * m) as f64;
        let min = self.value_at_rank(0) as f64;
        let max = self.value_at_rank(self.len - 1) as f64;
        Ok([
            mean,
            self.quantile(0.5),
            self.quantile(0.25),
            self.quantile(0.75),
            variance,
            min,
            max,
            max - min,
        ])
    }
}

/// The eight statistics of a raw score list. Errors on an empty list.
pub fn stats_block(scores: &[i32]) -> Result<[f64; STATS_PER_SLOT]> {
    let mut agg = ScoreAggregate::new();
    for &s in scores {
        agg.insert(s);
    }
    agg.stats()
}

/// Compute the full feature vector of a window: per-slot statistics over
/// pairwise scores, concatenated in slot order.
pub fn featurize_window(window: &Window) -> Result<FeatureVector> {
    let slot_count = window
        .digests
        .first()
        .map(|d| d.slots.len())
        .ok_or_else(|| Error::InvalidArgument("cannot featurize an empty window".into()))?;
    if window.digests.len() < 2 {
        return Err(Error::InvalidArgument(
            "windows must hold at least 2 queries".into(),
        ));
    }
    let n = window.digests.len();
    let mut values = Vec::with_capacity(STATS_PER_SLOT * slot_count);
    for slot in 0..slot_count {
        let mut agg = ScoreAggregate::new();
        for i in 0..n {
            for j in i + 1..n {
                agg.insert(compare(
                    &window.digests[i].slots[slot],
                    &window.digests[j].slots[slot],
                ));
            }
        }
        values.extend_from_slice(&agg.stats()?);
    }
    Ok(FeatureVector {
        values,
        window_ref: (window.key.clone(), window.index),
    })
}

/// Derive the window's ground-truth labels from its queries.
///
/// Family: strict majority wins; on ties, any malicious family beats
/// `legitimate`, remaining ties go to the lexicographically smallest
/// family. Behavior: majority among the winning family's queries,
/// lexicographic tie-break. Errors if any query lacks a family label.
pub fn label_window(window: &Window) -> Result<WindowLabel> {
    let mut family_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for q in &window.queries {
        let family = q.record.family_label.as_deref().ok_or_else(|| {
            Error::Data(format!(
                "unlabeled query `{}` in labeled window {} of stream {}",
                q.record.qname, window.index, window.key
            ))
        })?;
        *family_counts.entry(family).or_default() += 1;
    }
    // BTreeMap iterates keys in lexicographic order, so on equal counts the
    // first maximum seen is the lexicographically smallest family; the
    // malicious-beats-legitimate rule is the only override needed.
    let mut winner: (&str, usize) = ("", 0);
    for (&family, &count) in &family_counts {
        let beats = count > winner.1
            || (count == winner.1 && winner.0 == LEGITIMATE && family != LEGITIMATE);
        if beats {
            winner = (family, count);
        }
    }
    let family = winner.0.to_string();

    let behavior = if family == LEGITIMATE {
        None
    } else {
        let mut behavior_counts: BTreeMap<Behavior, usize> = BTreeMap::new();
        for q in &window.queries {
            if q.record.family_label.as_deref() == Some(family.as_str()) {
                if let Some(b) = q.record.behavior_label {
                    *behavior_counts.entry(b).or_default() += 1;
                }
            }
        }
        // Behavior ordering is lexicographic on the wire form, so the first
        // maximum is already the tie-break winner.
        behavior_counts
            .into_iter()
            .fold(None, |best: Option<(Behavior, usize)>, (b, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((b, c)),
            })
            .map(|(b, _)| b)
    };

    let binary = if family == LEGITIMATE {
        BinaryLabel::Legitimate
    } else {
        BinaryLabel::Malicious
    };
    let compound = behavior
        .map(|b| format!("{}_{}", crate::model::display_family(&family), b.display_name()));
    Ok(WindowLabel {
        binary,
        family,
        behavior,
        compound,
    })
}

/// Featurization parameters, stored alongside every feature file and model
/// so incompatible artifacts are rejected instead of silently mixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetadata {
    pub format_version: u32,
    pub window_size: usize,
    pub hash: HashConfig,
    pub slot_names: Vec<String>,
    /// Total feature count D = 8 × slot count.
    pub feature_count: usize,
}

/// Current feature-file format version.
pub const FEATURE_FORMAT_VERSION: u32 = 1;

impl FeatureMetadata {
    pub fn new(window_size: usize, hash: &HashConfig) -> FeatureMetadata {
        FeatureMetadata {
            format_version: FEATURE_FORMAT_VERSION,
            window_size,
            hash: hash.clone(),
            slot_names: hash.slot_names(),
            feature_count: STATS_PER_SLOT * hash.slot_count(),
        }
    }

    /// Check that `other` describes the same featurization. Used before
    /// applying a model to a feature file.
    pub fn ensure_compatible(&self, other: &FeatureMetadata) -> Result<()> {
        if self != other {
            return Err(Error::ConfigMismatch(format!(
                "feature metadata mismatch: \
                 expected window={} k={} global={} mode={} D={}, \
                 found window={} k={} global={} mode={} D={}",
                self.window_size,
                self.hash.segments,
                self.hash.include_global,
                self.hash.threshold_mode,
                self.feature_count,
                other.window_size,
                other.hash.segments,
                other.hash.include_global,
                other.hash.threshold_mode,
                other.feature_count,
            )));
        }
        Ok(())
    }

    /// Path of the metadata sidecar for a feature file.
    pub fn sidecar_path(feature_path: &Path) -> std::path::PathBuf {
        let mut os = feature_path.as_os_str().to_os_string();
        os.push(".meta.json");
        std::path::PathBuf::from(os)
    }
}

/// One row of a feature file: a window's labels (empty when unlabeled) and
/// its feature values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub stream_key: String,
    pub window_index: usize,
    pub label_binary: Option<BinaryLabel>,
    pub label_family: Option<String>,
    pub label_behavior: Option<Behavior>,
    pub values: Vec<f64>,
}

/// Write a feature CSV plus its metadata sidecar
/// (`<path>.meta.json`).
pub fn write_features(rows: &[FeatureRow], meta: &FeatureMetadata, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut header: Vec<String> = vec![
        "stream_key".into(),
        "window_index".into(),
        "label_binary".into(),
        "label_family".into(),
        "label_behavior".into(),
    ];
    for i in 0..meta.feature_count {
        header.push(format!("f{i}"));
    }
    writer
        .write_record(&header)
        .map_err(|e| Error::Data(e.to_string()))?;
    for row in rows {
        if row.values.len() != meta.feature_count {
            return Err(Error::ConfigMismatch(format!(
                "feature row for {}#{} has {} values, metadata says {}",
                row.stream_key,
                row.window_index,
                row.values.len(),
                meta.feature_count
            )));
        }
        let mut record: Vec<String> = vec![
            row.stream_key.clone(),
            row.window_index.to_string(),
            row.label_binary.map(|b| b.to_string()).unwrap_or_default(),
            row.label_family.clone().unwrap_or_default(),
            row.label_behavior
                .map(|b| b.to_string())
                .unwrap_or_default(),
        ];
        for v in &row.values {
            record.push(v.to_string());
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = FeatureMetadata::sidecar_path(path);
    let json = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::Data(format!("metadata serialization failed: {e}")))?;
    std::fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

/// Read a feature CSV and its metadata sidecar back.
pub fn read_features(path: &Path) -> Result<(Vec<FeatureRow>, FeatureMetadata)> {
    let sidecar = FeatureMetadata::sidecar_path(path);
    let meta_text =
        std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: FeatureMetadata = serde_json::from_str(&meta_text).map_err(|e| {
        Error::Data(format!("{}: invalid metadata sidecar: {e}", sidecar.display()))
    })?;
    if meta.format_version != FEATURE_FORMAT_VERSION {
        return Err(Error::ConfigMismatch(format!(
            "feature format version {} unsupported (this build reads {})",
            meta.format_version, FEATURE_FORMAT_VERSION
        )));
    }

    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(e.to_string()))?
        .clone();
    let expected_cols = 5 + meta.feature_count;
    if headers.len() != expected_cols {
        return Err(Error::ConfigMismatch(format!(
            "{}: {} columns but metadata implies {}",
            path.display(),
            headers.len(),
            expected_cols
        )));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::BadRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != expected_cols {
            return Err(bad(format!(
                "{} fields, expected {expected_cols}",
                record.len()
            )));
        }
        let window_index: usize = record[1]
            .parse()
            .map_err(|_| bad(format!("bad window_index `{}`", &record[1])))?;
        let label_binary = match &record[2] {
            "" => None,
            "legitimate" => Some(BinaryLabel::Legitimate),
            "malicious" => Some(BinaryLabel::Malicious),
            other => return Err(bad(format!("bad label_binary `{other}`"))),
        };
        let label_family = match &record[3] {
            "" => None,
            f => Some(f.to_string()),
        };
        let label_behavior = match &record[4] {
            "" => None,
            b => Some(b.parse::<Behavior>().map_err(|e| bad(e.to_string()))?),
        };
        let mut values = Vec::with_capacity(meta.feature_count);
        for i in 0..meta.feature_count {
            let raw = &record[5 + i];
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(format!("bad feature value f{i} `{raw}`")))?;
            values.push(v);
        }
        rows.push(FeatureRow {
            stream_key: record[0].to_string(),
            window_index,
            label_binary,
            label_family,
            label_behavior,
            values,
        });
    }
    Ok((rows, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DnsQueryRecord;

    fn clean(subdomain: &str, family: &str, behavior: Option<Behavior>) -> CleanQuery {
        CleanQuery {
            record: DnsQueryRecord {
                timestamp: 0.0,
                qname: format!("{subdomain}.example.com"),
                qtype: "A".into(),
                family_label: Some(family.to_string()),
                behavior_label: behavior,
                source: "t".into(),
            },
            registered_domain: "example.com".into(),
            subdomain_clean: subdomain.to_string(),
        }
    }

    fn stream(subdomains: &[&str]) -> DomainStream {
        DomainStream {
            key: StreamKey {
                source: "t".into(),
                registered_domain: "example.com".into(),
            },
            queries: subdomains
                .iter()
                .map(|s| clean(s, LEGITIMATE, None))
                .collect(),
        }
    }

    fn window_of(queries: Vec<CleanQuery>, config: &HashConfig) -> Window {
        let digests = queries
            .iter()
            .map(|q| digest_query(&q.subdomain_clean, config))
            .collect();
        Window {
            key: StreamKey {
                source: "t".into(),
                registered_domain: "example.com".into(),
            },
            index: 0,
            queries,
            digests,
        }
    }

    #[test]
    fn make_windows_floors_and_counts_discards() {
        let config = HashConfig::default();
        let names: Vec<String> = (0..45).map(|i| format!("query{i:02}data")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let s = stream(&refs);
        let (windows, discarded) = make_windows(&s, 20, &config).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(discarded, 5);
        assert_eq!(windows[0].queries.len(), 20);
        assert_eq!(windows[1].index, 1);
        assert_eq!(
            windows[1].queries[0].subdomain_clean, "query20data",
            "window 1 starts at query 20"
        );

        let (windows, discarded) = make_windows(&stream(&refs[..19]), 20, &config).unwrap();
        assert!(windows.is_empty());
        assert_eq!(discarded, 19);

        assert!(make_windows(&s, 1, &config).is_err());
        assert!(make_windows(&s, 0, &config).is_err());
    }

    #[test]
    fn pairwise_scores_count_and_order() {
        let config = HashConfig::default();
        let names: Vec<String> = (0..20).map(|i| format!("sub{i}longenough")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let (windows, _) = make_windows(&stream(&refs), 20, &config).unwrap();
        let scores = pairwise_scores(&windows[0], 0).unwrap();
        assert_eq!(scores.len(), 190);

        // Independent nested-loop oracle over a smaller window.
        let (windows, _) = make_windows(&stream(&refs[..10]), 10, &config).unwrap();
        let w = &windows[0];
        let scores = pairwise_scores(w, 1).unwrap();
        let mut expected = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                if i < j {
                    expected.push(compare(&w.digests[i].slots[1], &w.digests[j].slots[1]));
                }
            }
        }
        assert_eq!(scores, expected);
        assert!(pairwise_scores(w, 3).is_err(), "slot out of range");
    }

    #[test]
    fn identical_queries_score_128_everywhere() {
        let config = HashConfig::default();
        let refs = vec!["aaaabbbbccccdddd"; 6];
        let (windows, _) = make_windows(&stream(&refs), 6, &config).unwrap();
        for slot in 0..3 {
            let scores = pairwise_scores(&windows[0], slot).unwrap();
            assert_eq!(scores.len(), 15);
            assert!(scores.iter().all(|&s| s == 128));
        }
        let fv = featurize_window(&windows[0]).unwrap();
        assert_eq!(fv.values.len(), 24);
        for slot in 0..3 {
            let block = &fv.values[slot * 8..slot * 8 + 8];
            assert_eq!(block, &[128.0, 128.0, 128.0, 128.0, 0.0, 128.0, 128.0, 0.0]);
        }
    }

    #[test]
    fn stats_block_matches_hand_computed_examples() {
        assert_eq!(
            stats_block(&[5, 5, 5, 5]).unwrap(),
            [5.0, 5.0, 5.0, 5.0, 0.0, 5.0, 5.0, 0.0]
        );
        assert_eq!(
            stats_block(&[1, 2, 3, 4]).unwrap(),
            [2.5, 2.5, 1.75, 3.25, 1.25, 1.0, 4.0, 3.0]
        );
        // Order must not matter.
        assert_eq!(
            stats_block(&[4, 1, 3, 2]).unwrap(),
            stats_block(&[1, 2, 3, 4]).unwrap()
        );
        assert_eq!(
            stats_block(&[7]).unwrap(),
            [7.0, 7.0, 7.0, 7.0, 0.0, 7.0, 7.0, 0.0]
        );
        assert!(stats_block(&[]).is_err());
    }

    #[test]
    fn featurize_equals_stats_of_pairwise_scores() {
        let config = HashConfig::default();
        let names: Vec<String> = (0..12)
            .map(|i| format!("x{}{}", i, "abcdefghij".repeat(1 + i % 3)))
            .collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let (windows, _) = make_windows(&stream(&refs), 12, &config).unwrap();
        let fv = featurize_window(&windows[0]).unwrap();
        for slot in 0..3 {
            let expected = stats_block(&pairwise_scores(&windows[0], slot).unwrap()).unwrap();
            assert_eq!(&fv.values[slot * 8..slot * 8 + 8], &expected);
        }
    }

    #[test]
    fn permuting_queries_leaves_features_unchanged() {
        let config = HashConfig::default();
        let names: Vec<String> = (0..8).map(|i| format!("payload{i}chunkdata")).collect();
        let queries: Vec<CleanQuery> = names
            .iter()
            .map(|s| clean(s, LEGITIMATE, None))
            .collect();
        let mut reversed = queries.clone();
        reversed.reverse();
        let a = featurize_window(&window_of(queries, &config)).unwrap();
        let b = featurize_window(&window_of(reversed, &config)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn label_window_majority_and_ties() {
        let config = HashConfig::default();
        // All one family and behavior.
        let queries: Vec<CleanQuery> = (0..20)
            .map(|i| clean(&format!("q{i}"), "iodine", Some(Behavior::Download)))
            .collect();
        let label = label_window(&window_of(queries, &config)).unwrap();
        assert_eq!(label.family, "iodine");
        assert_eq!(label.binary, BinaryLabel::Malicious);
        assert_eq!(label.behavior, Some(Behavior::Download));
        assert_eq!(label.compound.as_deref(), Some("Iodine_Download"));

        // Strict majority: 11 legitimate vs 9 iodine.
        let mut queries: Vec<CleanQuery> =
            (0..11).map(|i| clean(&format!("l{i}"), LEGITIMATE, None)).collect();
        queries.extend((0..9).map(|i| clean(&format!("m{i}"), "iodine", Some(Behavior::Idle))));
        let label = label_window(&window_of(queries, &config)).unwrap();
        assert_eq!(label.family, LEGITIMATE);
        assert_eq!(label.binary, BinaryLabel::Legitimate);
        assert_eq!(label.behavior, None);
        assert_eq!(label.compound, None);

        // Tie: malicious beats legitimate.
        let mut queries: Vec<CleanQuery> =
            (0..10).map(|i| clean(&format!("l{i}"), LEGITIMATE, None)).collect();
        queries.extend((0..10).map(|i| clean(&format!("m{i}"), "iodine", Some(Behavior::Upload))));
        let label = label_window(&window_of(queries, &config)).unwrap();
        assert_eq!(label.family, "iodine");

        // Tie between malicious families: lexicographic.
        let mut queries: Vec<CleanQuery> =
            (0..10).map(|i| clean(&format!("a{i}"), "saitama", Some(Behavior::Idle))).collect();
        queries.extend((0..10).map(|i| clean(&format!("b{i}"), "dnscat2", Some(Behavior::Idle))));
        let label = label_window(&window_of(queries, &config)).unwrap();
        assert_eq!(label.family, "dnscat2");

        // Behavior tie within winning family: lexicographic (download < upload).
        let mut queries: Vec<CleanQuery> =
            (0..5).map(|i| clean(&format!("u{i}"), "iodine", Some(Behavior::Upload))).collect();
        queries.extend((0..5).map(|i| clean(&format!("d{i}"), "iodine", Some(Behavior::Download))));
        let label = label_window(&window_of(queries, &config)).unwrap();
        assert_eq!(label.behavior, Some(Behavior::Download));

        // Unlabeled query → error.
        let mut queries: Vec<CleanQuery> = vec![clean("x", LEGITIMATE, None)];
        queries[0].record.family_label = None;
        assert!(label_window(&window_of(queries, &config)).is_err());
    }

    #[test]
    fn behavior_counts_only_winning_family() {
        let config = HashConfig::default();
        // 12 iodine-upload + 8 dnscat2-download: winner iodine, and the
        // dnscat2 downloads must not influence the behavior vote.
        let mut queries: Vec<CleanQuery> =
            (0..12).map(|i| clean(&format!("u{i}"), "iodine", Some(Behavior::Upload))).collect();
        queries.extend(
            (0..8).map(|i| clean(&format!("d{i}"), "dnscat2", Some(Behavior::Download))),
        );
        let label = label_window(&window_of(queries, &config)).unwrap();
        assert_eq!(label.family, "iodine");
        assert_eq!(label.behavior, Some(Behavior::Upload));
        assert_eq!(label.compound.as_deref(), Some("Iodine_Upload"));
    }

    #[test]
    fn feature_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let meta = FeatureMetadata::new(20, &HashConfig::default());
        assert_eq!(meta.feature_count, 24);
        let rows = vec![
            FeatureRow {
                stream_key: "run1|example.com".into(),
                window_index: 0,
                label_binary: Some(BinaryLabel::Malicious),
                label_family: Some("iodine".into()),
                label_behavior: Some(Behavior::Download),
                values: (0..24).map(|i| i as f64 * 0.125 - 1.0).collect(),
            },
            FeatureRow {
                stream_key: "isp|other.net".into(),
                window_index: 3,
                label_binary: None,
                label_family: None,
                label_behavior: None,
                values: (0..24).map(|i| (i as f64).sqrt()).collect(),
            },
        ];
        write_features(&rows, &meta, &path).unwrap();
        let (back, meta_back) = read_features(&path).unwrap();
        assert_eq!(back, rows, "values must round-trip exactly");
        assert_eq!(meta_back, meta);
    }

    #[test]
    fn feature_file_rejects_mismatched_width() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let meta = FeatureMetadata::new(20, &HashConfig::default());
        let rows = vec![FeatureRow {
            stream_key: "k".into(),
            window_index: 0,
            label_binary: None,
            label_family: None,
            label_behavior: None,
            values: vec![1.0; 7],
        }];
        let err = write_features(&rows, &meta, &path).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn metadata_compatibility() {
        let a = FeatureMetadata::new(20, &HashConfig::default());
        let mut cfg = HashConfig::default();
        cfg.segments = 3;
        let b = FeatureMetadata::new(20, &cfg);
        assert!(a.ensure_compatible(&a.clone()).is_ok());
        let err = a.ensure_compatible(&b).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let c = FeatureMetadata::new(10, &HashConfig::default());
        assert!(a.ensure_compatible(&c).is_err());
    }
}
