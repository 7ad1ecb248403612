//! Streaming (stride-1) windowed features.
//!
//! [`RollingState`] maintains the last `n` queries of one stream and the
//! exact multiset of their pairwise similarity scores per digest slot.
//! Each arriving query is compared against the `n−1` queries already in the
//! window — never against anything older — so an update costs `O(n)`
//! compares instead of the `O(n²)` a naive recompute would spend.
//!
//! Score bookkeeping: every window member remembers its scores against the
//! *older* members still present (oldest first). When the oldest member is
//! evicted, each survivor drops the front of that list — precisely the
//! scores that paired it with the evicted query. The per-slot aggregate is
//! the same [`ScoreAggregate`] the batch path uses, so emitted vectors are
//! bit-identical to batch featurization of the same n queries.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, ScoreAggregate, STATS_PER_SLOT};
use crate::ingest::StreamKey;
use crate::lsh::{compare, digest_query, HashConfig, QueryDigests};

struct Entry {
    digests: QueryDigests,
    /// Per slot: scores against older live entries, front = oldest.
    scores: Vec<VecDeque<i32>>,
}

/// Incremental sliding-window featurizer for one stream.
pub struct RollingState {
    key: StreamKey,
    n: usize,
    config: HashConfig,
    slot_count: usize,
    entries: VecDeque<Entry>,
    aggs: Vec<ScoreAggregate>,
    seen: u64,
    compare_calls: u64,
}

impl RollingState {
    pub fn new(key: StreamKey, n: usize, config: &HashConfig) -> Result<RollingState> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "window size must be at least 2, got {n}"
            )));
        }
        config.validate()?;
        let slot_count = config.slot_count();
        Ok(RollingState {
            key,
            n,
            config: config.clone(),
            slot_count,
            entries: VecDeque::with_capacity(n),
            aggs: vec![ScoreAggregate::new(); slot_count],
            seen: 0,
            compare_calls: 0,
        })
    }

    /// Window size `n`.
    pub fn window_size(&self) -> usize {
        self.n
    }

    /// Queries currently held (saturates at `n`).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total queries ever pushed.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Total digest comparisons performed so far, across all slots. After
    /// warm-up this grows by exactly `(n−1) × slot_count` per update.
    pub fn compare_calls(&self) -> u64 {
        self.compare_calls
    }

    /// Hash and push a cleaned subdomain. See [`RollingState::update`].
    pub fn push(&mut self, subdomain_clean: &str) -> Result<Option<FeatureVector>> {
        self.update(digest_query(subdomain_clean, &self.config))
    }

    /// Push an already-hashed query. Once `n` queries have been seen, every
    /// update emits the feature vector of the current window (the most
    /// recent `n` queries); earlier updates return `None`. The emitted
    /// `window_ref` index counts emissions: the window covering queries
    /// `t..t+n` (0-based) gets index `t`.
    pub fn update(&mut self, digests: QueryDigests) -> Result<Option<FeatureVector>> {
        if digests.slots.len() != self.slot_count {
            return Err(Error::ConfigMismatch(format!(
                "query hashed with {} slots, rolling state expects {}",
                digests.slots.len(),
                self.slot_count
            )));
        }

        if self.entries.len() == self.n {
            let evicted = self.entries.pop_front().expect("non-empty");
            debug_assert!(
                evicted.scores.iter().all(|d| d.is_empty()),
                "oldest entry still holds scores against older queries"
            );
            for survivor in &mut self.entries {
                for (slot, deque) in survivor.scores.iter_mut().enumerate() {
                    let score = deque
                        .pop_front()
                        .expect("survivor lost its score against the evicted entry");
                    self.aggs[slot].remove(score);
                }
            }
        }

        let mut scores: Vec<VecDeque<i32>> = (0..self.slot_count)
            .map(|_| VecDeque::with_capacity(self.n - 1))
            .collect();
        for older in &self.entries {
            for slot in 0..self.slot_count {
                let score = compare(&older.digests.slots[slot], &digests.slots[slot]);
                self.compare_calls += 1;
                scores[slot].push_back(score);
                self.aggs[slot].insert(score);
            }
        }
        self.entries.push_back(Entry { digests, scores });
        self.seen += 1;

        if self.entries.len() < self.n {
            return Ok(None);
        }
        let mut values = Vec::with_capacity(STATS_PER_SLOT * self.slot_count);
        for agg in &self.aggs {
            debug_assert_eq!(agg.len() as usize, self.n * (self.n - 1) / 2);
            values.extend_from_slice(&agg.stats()?);
        }
        let index = (self.seen - self.n as u64) as usize;
        Ok(Some(FeatureVector {
            values,
            window_ref: (self.key.clone(), index),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::featurize_window;
    use crate::features::Window;
    use crate::ingest::{CleanQuery, DnsQueryRecord};

    fn key() -> StreamKey {
        StreamKey {
            source: "roll".into(),
            registered_domain: "example.com".into(),
        }
    }

    /// Deterministic pseudo-random subdomains without pulling in an RNG:
    /// a few repeating shapes plus a counter, enough to exercise evictions
    /// with non-trivial score spreads.
    fn subdomains(count: usize) -> Vec<String> {
        (0..count)
            .map(|i| match i % 4 {
                0 => format!("cdn{:03}.assets", i * 7 % 100),
                1 => format!("{:x}{:x}payload{:x}", i * 31, i * 17 + 3, i),
                2 => "www".to_string(),
                _ => format!("chunk{}of{}data{}", i, i % 9, "q".repeat(i % 13)),
            })
            .collect()
    }

    fn clean(subdomain: &str) -> CleanQuery {
        CleanQuery {
            record: DnsQueryRecord {
                timestamp: 0.0,
                qname: format!("{subdomain}.example.com"),
                qtype: "A".into(),
                family_label: None,
                behavior_label: None,
                source: "roll".into(),
            },
            registered_domain: "example.com".into(),
            subdomain_clean: subdomain.to_string(),
        }
    }

    fn batch_window(names: &[String], start: usize, n: usize, config: &HashConfig) -> Window {
        let queries: Vec<CleanQuery> = names[start..start + n].iter().map(|s| clean(s)).collect();
        let digests = queries
            .iter()
            .map(|q| digest_query(&q.subdomain_clean, config))
            .collect();
        Window {
            key: key(),
            index: start,
            queries,
            digests,
        }
    }

    #[test]
    fn rolling_matches_batch_bit_for_bit() {
        for (n, k) in [(5usize, 2u8), (8, 3), (20, 1)] {
            let mut config = HashConfig::default();
            config.segments = k;
            let names = subdomains(60);
            let mut state = RollingState::new(key(), n, &config).unwrap();
            let mut emissions = 0usize;
            for (t, name) in names.iter().enumerate() {
                let out = state.push(name).unwrap();
                if t + 1 < n {
                    assert!(out.is_none(), "no emission before warm-up");
                    continue;
                }
                let fv = out.expect("one emission per post-warm-up update");
                emissions += 1;
                let start = t + 1 - n;
                assert_eq!(fv.window_ref.1, start);
                let expected =
                    featurize_window(&batch_window(&names, start, n, &config)).unwrap();
                // Bit-identical, not approximately equal: both paths reduce
                // the same integer multiset through the same routine.
                assert_eq!(fv.values, expected.values, "n={n} k={k} start={start}");
            }
            assert_eq!(emissions, names.len() - n + 1);
        }
    }

    #[test]
    fn compare_call_law() {
        let config = HashConfig::default(); // 3 slots
        let n = 20;
        let mut state = RollingState::new(key(), n, &config).unwrap();
        let names = subdomains(50);
        let mut previous = 0u64;
        for (t, name) in names.iter().enumerate() {
            state.push(name).unwrap();
            let grew = state.compare_calls() - previous;
            previous = state.compare_calls();
            let expected_pairs = t.min(n - 1) as u64; // vs everything already held
            assert_eq!(grew, expected_pairs * 3, "update {t}");
        }
        // Post-warm-up steady state: exactly (n−1) compares per slot per update.
        assert_eq!(
            state.compare_calls(),
            (0..50).map(|t| (t as u64).min(n as u64 - 1) * 3).sum::<u64>()
        );
    }

    #[test]
    fn rejects_mismatched_slot_count() {
        let config = HashConfig::default();
        let mut other = HashConfig::default();
        other.segments = 3;
        let mut state = RollingState::new(key(), 4, &config).unwrap();
        let err = state
            .update(digest_query("abcdef", &other))
            .unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn constructor_validates() {
        assert!(RollingState::new(key(), 1, &HashConfig::default()).is_err());
        let mut bad = HashConfig::default();
        bad.segments = 9;
        assert!(RollingState::new(key(), 5, &bad).is_err());
    }
}
