//! Nilsimsa-style locality-sensitive hashing.
//!
//! The digest walks the input with a width-5 sliding window, feeds every
//! selected trigram through a keyed transition table to pick one of 256
//! accumulator buckets, and finally keeps the buckets whose counts are
//! strictly above a threshold. Similar strings light up mostly the same
//! buckets, so the bitwise distance between two digests tracks how much the
//! underlying strings have in common — unlike a cryptographic hash, where a
//! one-character edit scrambles everything.
//!
//! Two thresholding modes are supported:
//!
//! * [`ThresholdMode::Median`] (default): threshold is the lower median of
//!   the 256 bucket counts. At most half the bits can come out set, which
//!   keeps digests of short inputs sparse and comparable.
//! * [`ThresholdMode::CanonicalMean`]: threshold is `total_trigrams / 256`
//!   (integer division), matching the classic reference implementations so
//!   digests can be exchanged with other tools.
//!
//! Inputs shorter than 3 bytes produce no trigrams and therefore the
//! all-zero digest.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sliding-window width used by the trigram selector. The algorithm is
/// defined for width 5 only; the field exists in [`HashConfig`] so stored
/// metadata is self-describing.
pub const WINDOW_WIDTH: u8 = 5;

/// Number of accumulator buckets / digest bits.
pub const BUCKETS: usize = 256;

/// The 53-based transition table. This is the classic table shared by all
/// interoperable implementations; changing a single entry changes every
/// digest, so it is spelled out in full and pinned by the golden-vector
/// tests.
pub const TRAN: [u8; 256] = [
    0x02, 0xd6, 0x9e, 0x6f, 0xf9, 0x1d, 0x04, 0xab,
    0xd0, 0x22, 0x16, 0x1f, 0xd8, 0x73, 0xa1, 0xac,
    0x3b, 0x70, 0x62, 0x96, 0x1e, 0x6e, 0x8f, 0x39,
    0x9d, 0x05, 0x14, 0x4a, 0xa6, 0xbe, 0xae, 0x0e,
    0xcf, 0xb9, 0x9c, 0x9a, 0xc7, 0x68, 0x13, 0xe1,
    0x2d, 0xa4, 0xeb, 0x51, 0x8d, 0x64, 0x6b, 0x50,
    0x23, 0x80, 0x03, 0x41, 0xec, 0xbb, 0x71, 0xcc,
    0x7a, 0x86, 0x7f, 0x98, 0xf2, 0x36, 0x5e, 0xee,
    0x8e, 0xce, 0x4f, 0xb8, 0x32, 0xb6, 0x5f, 0x59,
    0xdc, 0x1b, 0x31, 0x4c, 0x7b, 0xf0, 0x63, 0x01,
    0x6c, 0xba, 0x07, 0xe8, 0x12, 0x77, 0x49, 0x3c,
    0xda, 0x46, 0xfe, 0x2f, 0x79, 0x1c, 0x9b, 0x30,
    0xe3, 0x00, 0x06, 0x7e, 0x2e, 0x0f, 0x38, 0x33,
    0x21, 0xad, 0xa5, 0x54, 0xca, 0xa7, 0x29, 0xfc,
    0x5a, 0x47, 0x69, 0x7d, 0xc5, 0x95, 0xb5, 0xf4,
    0x0b, 0x90, 0xa3, 0x81, 0x6d, 0x25, 0x55, 0x35,
    0xf5, 0x75, 0x74, 0x0a, 0x26, 0xbf, 0x19, 0x5c,
    0x1a, 0xc6, 0xff, 0x99, 0x5d, 0x84, 0xaa, 0x66,
    0x3e, 0xaf, 0x78, 0xb3, 0x20, 0x43, 0xc1, 0xed,
    0x24, 0xea, 0xe6, 0x3f, 0x18, 0xf3, 0xa0, 0x42,
    0x57, 0x08, 0x53, 0x60, 0xc3, 0xc0, 0x83, 0x40,
    0x82, 0xd7, 0x09, 0xbd, 0x44, 0x2a, 0x67, 0xa8,
    0x93, 0xe0, 0xc2, 0x56, 0x9f, 0xd9, 0xdd, 0x85,
    0x15, 0xb4, 0x8a, 0x27, 0x28, 0x92, 0x76, 0xde,
    0xef, 0xf8, 0xb2, 0xb7, 0xc9, 0x3d, 0x45, 0x94,
    0x4b, 0x11, 0x0d, 0x65, 0xd5, 0x34, 0x8b, 0x91,
    0x0c, 0xfa, 0x87, 0xe9, 0x7c, 0x5b, 0xb1, 0x4d,
    0xe5, 0xd4, 0xcb, 0x10, 0xa2, 0x17, 0x89, 0xbc,
    0xdb, 0xb0, 0xe2, 0x97, 0x88, 0x52, 0xf7, 0x48,
    0xd3, 0x61, 0x2c, 0x3a, 0x2b, 0xd1, 0x8c, 0xfb,
    0xf1, 0xcd, 0xe4, 0x6a, 0xe7, 0xa9, 0xfd, 0xc4,
    0x37, 0xc8, 0xd2, 0xf6, 0xdf, 0x58, 0x72, 0x4e,
];

/// Keyed trigram hash: maps three bytes plus a combination index `n`
/// (0..=7) onto a bucket in `0..256`.
#[inline]
fn tran3(a: u8, b: u8, c: u8, n: u8) -> u8 {
    let keyed = TRAN[(a as usize + n as usize) & 0xff] as u32
        ^ (TRAN[b as usize] as u32 * (2 * n as u32 + 1));
    ((keyed + TRAN[(c ^ TRAN[n as usize]) as usize] as u32) & 0xff) as u8
}

/// How bucket counts are turned into digest bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Keep buckets strictly above the lower median of all 256 counts.
    Median,
    /// Keep buckets strictly above `total_trigrams / 256`, as the classic
    /// implementations do. Use this when digests must match other tools.
    CanonicalMean,
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::Median
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::Median => f.write_str("median"),
            ThresholdMode::CanonicalMean => f.write_str("canonical-mean"),
        }
    }
}

impl FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(ThresholdMode::Median),
            "canonical-mean" | "canonical_mean" => Ok(ThresholdMode::CanonicalMean),
            other => Err(Error::InvalidArgument(format!(
                "unknown threshold mode `{other}` (expected `median` or `canonical-mean`)"
            ))),
        }
    }
}

/// Hashing parameters. These travel with every derived artifact (feature
/// files, models) so that mixing incompatible stages is detected rather
/// than silently producing garbage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashConfig {
    /// Trigram window width; only 5 is supported.
    pub window_width: u8,
    /// Thresholding mode for digest bits.
    pub threshold_mode: ThresholdMode,
    /// Number of segments each subdomain is split into (1..=3).
    pub segments: u8,
    /// Whether a digest of the whole (unsegmented) subdomain is included
    /// as an extra slot alongside the per-segment digests.
    pub include_global: bool,
    /// Characters stripped from subdomains before hashing.
    pub delimiters: BTreeSet<char>,
}

impl Default for HashConfig {
    fn default() -> Self {
        HashConfig {
            window_width: WINDOW_WIDTH,
            threshold_mode: ThresholdMode::Median,
            segments: 2,
            include_global: true,
            delimiters: ['.', '-', '_'].into_iter().collect(),
        }
    }
}

impl HashConfig {
    /// Check that all fields are inside their supported ranges.
    pub fn validate(&self) -> Result<()> {
        if self.window_width != WINDOW_WIDTH {
            return Err(Error::InvalidArgument(format!(
                "window_width must be {WINDOW_WIDTH}, got {}",
                self.window_width
            )));
        }
        if !(1..=3).contains(&self.segments) {
            return Err(Error::InvalidArgument(format!(
                "segments must be in 1..=3, got {}",
                self.segments
            )));
        }
        Ok(())
    }

    /// Number of digest slots produced per query under this configuration.
    pub fn slot_count(&self) -> usize {
        self.segments as usize + usize::from(self.include_global)
    }

    /// Human-readable slot names, in slot order. Used for feature metadata
    /// and report headers.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.slot_count());
        if self.include_global {
            names.push("global".to_string());
        }
        for i in 0..self.segments {
            names.push(format!("segment{i}"));
        }
        names
    }
}

/// A 256-bit locality-sensitive digest.
///
/// Bucket `b` lives in byte `b / 8` at bit `7 - (b % 8)`, i.e. bucket 0 is
/// the most significant bit of the first byte of [`Digest::to_hex`] output.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    /// The digest of any input too short to contain a trigram.
    pub const ZERO: Digest = Digest([0u8; 32]);

    /// Raw digest bytes, bucket 0 in the MSB of byte 0.
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Whether bucket `b` (0..256) is set.
    pub fn bit(&self, b: usize) -> bool {
        debug_assert!(b < BUCKETS);
        (self.0[b >> 3] >> (7 - (b & 7))) & 1 == 1
    }

    fn set_bit(&mut self, b: usize) {
        self.0[b >> 3] |= 1 << (7 - (b & 7));
    }

    /// Number of set bits.
    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|b| b.count_ones()).sum()
    }

    /// True for the all-zero digest.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// Lowercase hex, 64 characters, bucket 0 first.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(64);
        for b in self.0 {
            use fmt::Write;
            write!(s, "{b:02x}").expect("writing to String cannot fail");
        }
        s
    }

    /// Parse the format produced by [`Digest::to_hex`]. Uppercase hex is
    /// accepted; anything that is not exactly 64 hex characters is an error.
    pub fn from_hex(s: &str) -> Result<Digest> {
        let bytes = s.as_bytes();
        if bytes.len() != 64 {
            return Err(Error::InvalidArgument(format!(
                "digest hex must be 64 characters, got {}",
                bytes.len()
            )));
        }
        let mut out = [0u8; 32];
        for (i, chunk) in bytes.chunks_exact(2).enumerate() {
            let hi = hex_val(chunk[0])?;
            let lo = hex_val(chunk[1])?;
            out[i] = (hi << 4) | lo;
        }
        Ok(Digest(out))
    }
}

fn hex_val(c: u8) -> Result<u8> {
    match c {
        b'0'..=b'9' => Ok(c - b'0'),
        b'a'..=b'f' => Ok(c - b'a' + 10),
        b'A'..=b'F' => Ok(c - b'A' + 10),
        _ => Err(Error::InvalidArgument(format!(
            "invalid hex character `{}` in digest",
            c as char
        ))),
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

/// Accumulate trigram counts for `input`. Returns the 256 bucket counts and
/// the total number of trigrams fed in.
///
/// The window holds the last four bytes, most recent first. For each new
/// byte `ch` at a position with a full window `[w0, w1, w2, w3]`, eight
/// trigram/“skip-gram” combinations are hashed; positions near the start of
/// the input contribute the subset whose window slots already exist.
pub(crate) fn accumulate(input: &[u8]) -> ([u32; BUCKETS], u64) {
    let mut acc = [0u32; BUCKETS];
    let mut total = 0u64;
    // window[0] is the previous byte, window[3] the oldest retained one.
    let mut window = [0u8; 4];
    for (pos, &ch) in input.iter().enumerate() {
        if pos >= 2 {
            acc[tran3(ch, window[0], window[1], 0) as usize] += 1;
            total += 1;
        }
        if pos >= 3 {
            acc[tran3(ch, window[0], window[2], 1) as usize] += 1;
            acc[tran3(ch, window[1], window[2], 2) as usize] += 1;
            total += 2;
        }
        if pos >= 4 {
            acc[tran3(ch, window[0], window[3], 3) as usize] += 1;
            acc[tran3(ch, window[1], window[3], 4) as usize] += 1;
            acc[tran3(ch, window[2], window[3], 5) as usize] += 1;
            acc[tran3(window[3], window[0], ch, 6) as usize] += 1;
            acc[tran3(window[3], window[2], ch, 7) as usize] += 1;
            total += 5;
        }
        window = [ch, window[0], window[1], window[2]];
    }
    (acc, total)
}

/// Compute the digest of `input` under the given thresholding mode.
pub fn digest_bytes(input: &[u8], mode: ThresholdMode) -> Digest {
    let (acc, total) = accumulate(input);
    let threshold = match mode {
        ThresholdMode::Median => {
            let mut sorted = acc;
            sorted.sort_unstable();
            // Lower median: element 127 of the 256 sorted counts.
            sorted[BUCKETS / 2 - 1] as u64
        }
        ThresholdMode::CanonicalMean => total / BUCKETS as u64,
    };
    let mut digest = Digest::ZERO;
    for (b, &count) in acc.iter().enumerate() {
        if count as u64 > threshold {
            digest.set_bit(b);
        }
    }
    digest
}

/// Compute the digest of `input` using the mode from `config`.
pub fn nilsimsa_digest(input: &[u8], config: &HashConfig) -> Digest {
    digest_bytes(input, config.threshold_mode)
}

/// Similarity score between two digests: `128 - hamming_distance`, in
/// `-128..=128`. Identical digests score 128; digests that disagree on
/// every bit score -128. Random unrelated strings land near 0.
pub fn compare(a: &Digest, b: &Digest) -> i32 {
    let mut distance = 0u32;
    for i in 0..32 {
        distance += (a.0[i] ^ b.0[i]).count_ones();
    }
    128 - distance as i32
}

/// Split `s` into `k` contiguous segments of near-equal character length.
///
/// When the length does not divide evenly, the first `len % k` segments get
/// one extra character, so the remainder lands at the front. Splitting is
/// done on `char` boundaries, so multi-byte UTF-8 input cannot be cut
/// mid-character. Segments of an input shorter than `k` come out empty at
/// the tail.
pub fn segment_string(s: &str, k: usize) -> Result<Vec<&str>> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "segment count must be at least 1".to_string(),
        ));
    }
    let total_chars = s.chars().count();
    let base = total_chars / k;
    let extra = total_chars % k;

    let mut segments = Vec::with_capacity(k);
    let mut iter = s.char_indices();
    let mut byte_start = 0usize;
    for seg in 0..k {
        let want = base + usize::from(seg < extra);
        let mut byte_end = byte_start;
        for _ in 0..want {
            // `want` never exceeds the remaining chars by construction.
            let (idx, c) = iter.next().expect("segment lengths sum to char count");
            byte_end = idx + c.len_utf8();
        }
        segments.push(&s[byte_start..byte_end]);
        byte_start = byte_end;
    }
    Ok(segments)
}

/// Digests of one query's subdomain: an optional whole-string slot followed
/// by one slot per segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryDigests {
    /// Slot digests: `[global?, segment0, segment1, ...]` matching
    /// [`HashConfig::slot_names`].
    pub slots: Vec<Digest>,
    /// Character length of the subdomain that was hashed (after delimiter
    /// stripping).
    pub subdomain_length: usize,
}

/// Hash a (already delimiter-stripped) subdomain into per-slot digests
/// according to `config`. `config` must have been validated.
pub fn digest_query(subdomain: &str, config: &HashConfig) -> QueryDigests {
    debug_assert!(config.validate().is_ok());
    let mut slots = Vec::with_capacity(config.slot_count());
    if config.include_global {
        slots.push(digest_bytes(subdomain.as_bytes(), config.threshold_mode));
    }
    let segments = segment_string(subdomain, config.segments as usize)
        .expect("validated config has segments >= 1");
    for seg in &segments {
        slots.push(digest_bytes(seg.as_bytes(), config.threshold_mode));
    }
    QueryDigests {
        slots,
        subdomain_length: subdomain.chars().count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form of the trigram count [`accumulate`] produces for an
    /// input of `len` bytes.
    fn trigram_total(len: usize) -> u64 {
        match len {
            0..=2 => 0,
            3 => 1,
            4 => 4,
            n => 8 * n as u64 - 28,
        }
    }

    #[test]
    fn tran_table_spot_checks() {
        assert_eq!(TRAN[0], 0x02);
        assert_eq!(TRAN[1], 0xd6);
        assert_eq!(TRAN[255], 0x4e);
        // Every byte value appears exactly once: TRAN is a permutation.
        let mut seen = [false; 256];
        for &v in &TRAN {
            assert!(!seen[v as usize], "duplicate entry {v:#04x}");
            seen[v as usize] = true;
        }
    }

    #[test]
    fn short_inputs_hash_to_zero() {
        for input in [&b""[..], b"a", b"ab"] {
            for mode in [ThresholdMode::Median, ThresholdMode::CanonicalMean] {
                assert!(digest_bytes(input, mode).is_zero(), "input {input:?}");
            }
        }
        // Three bytes is the first length that produces a trigram.
        assert!(!digest_bytes(b"abc", ThresholdMode::CanonicalMean).is_zero());
    }

    #[test]
    fn trigram_totals_match_accumulator() {
        for len in 0..64usize {
            let input: Vec<u8> = (0..len as u8).map(|i| i.wrapping_mul(37)).collect();
            let (_, total) = accumulate(&input);
            assert_eq!(total, trigram_total(len), "len {len}");
        }
    }

    #[test]
    fn compare_bounds_and_identity() {
        let a = digest_bytes(b"the quick brown fox", ThresholdMode::Median);
        let b = digest_bytes(b"jumps over the lazy dog", ThresholdMode::Median);
        assert_eq!(compare(&a, &a), 128);
        let score = compare(&a, &b);
        assert!((-128..=128).contains(&score));
        assert_eq!(compare(&a, &b), compare(&b, &a));
        // Complementary digests are maximally distant.
        let mut inv = a;
        for byte in inv.0.iter_mut() {
            *byte = !*byte;
        }
        assert_eq!(compare(&a, &inv), -128);
    }

    #[test]
    fn median_mode_sets_at_most_half_the_bits() {
        // With a strict lower-median threshold, at least 128 of the 256
        // counts are <= threshold, so at most 128 bits can be set.
        for seed in 0u8..20 {
            let input: Vec<u8> = (0..200u32)
                .map(|i| ((i * 131 + seed as u32 * 7919) % 251) as u8)
                .collect();
            let d = digest_bytes(&input, ThresholdMode::Median);
            assert!(d.count_ones() <= 128, "seed {seed}: {}", d.count_ones());
        }
    }

    #[test]
    fn hex_round_trip() {
        let d = digest_bytes(b"example-subdomain-payload", ThresholdMode::Median);
        let hex = d.to_hex();
        assert_eq!(hex.len(), 64);
        assert_eq!(Digest::from_hex(&hex).unwrap(), d);
        assert_eq!(Digest::from_hex(&hex.to_uppercase()).unwrap(), d);
        assert!(Digest::from_hex("zz").is_err());
        assert!(Digest::from_hex(&"0".repeat(63)).is_err());
        assert!(Digest::from_hex(&"g".repeat(64)).is_err());
    }

    #[test]
    fn segment_string_balances_remainder_to_front() {
        let segs = segment_string("abcdefg", 3).unwrap();
        assert_eq!(segs, vec!["abc", "de", "fg"]);
        let segs = segment_string("abcdef", 3).unwrap();
        assert_eq!(segs, vec!["ab", "cd", "ef"]);
        let segs = segment_string("abcdefgh", 3).unwrap();
        assert_eq!(segs, vec!["abc", "def", "gh"]);
        let segs = segment_string("abc", 1).unwrap();
        assert_eq!(segs, vec!["abc"]);
        // Shorter than k: tail segments are empty.
        let segs = segment_string("ab", 3).unwrap();
        assert_eq!(segs, vec!["a", "b", ""]);
        assert!(segment_string("abc", 0).is_err());
    }

    #[test]
    fn segment_string_respects_char_boundaries() {
        let s = "aéb🦀cd";
        let segs = segment_string(s, 3).unwrap();
        assert_eq!(segs.iter().map(|t| t.chars().count()).sum::<usize>(), 6);
        assert_eq!(segs.concat(), s);
        assert_eq!(segs, vec!["aé", "b🦀", "cd"]);
    }

    #[test]
    fn digest_query_slot_layout() {
        let mut config = HashConfig::default();
        config.segments = 3;
        config.include_global = true;
        let q = digest_query("aaaabbbbcccc", &config);
        assert_eq!(q.slots.len(), 4);
        assert_eq!(q.subdomain_length, 12);
        // Global slot hashes the whole string, segment slots the pieces.
        assert_eq!(
            q.slots[0],
            digest_bytes(b"aaaabbbbcccc", ThresholdMode::Median)
        );
        assert_eq!(q.slots[1], digest_bytes(b"aaaa", ThresholdMode::Median));
        assert_eq!(q.slots[2], digest_bytes(b"bbbb", ThresholdMode::Median));
        assert_eq!(q.slots[3], digest_bytes(b"cccc", ThresholdMode::Median));

        config.include_global = false;
        let q = digest_query("aaaabbbbcccc", &config);
        assert_eq!(q.slots.len(), 3);
        assert_eq!(q.slots[0], digest_bytes(b"aaaa", ThresholdMode::Median));
    }

    #[test]
    fn slot_names_match_layout() {
        let config = HashConfig::default();
        assert_eq!(config.slot_names(), vec!["global", "segment0", "segment1"]);
        let mut no_global = config.clone();
        no_global.include_global = false;
        no_global.segments = 1;
        assert_eq!(no_global.slot_names(), vec!["segment0"]);
    }

    #[test]
    fn config_validation() {
        assert!(HashConfig::default().validate().is_ok());
        let mut bad = HashConfig::default();
        bad.segments = 4;
        assert!(bad.validate().is_err());
        bad.segments = 0;
        assert!(bad.validate().is_err());
        let mut bad_width = HashConfig::default();
        bad_width.window_width = 4;
        assert!(bad_width.validate().is_err());
    }

    #[test]
    fn threshold_mode_parse_display() {
        assert_eq!(
            "median".parse::<ThresholdMode>().unwrap(),
            ThresholdMode::Median
        );
        assert_eq!(
            "canonical-mean".parse::<ThresholdMode>().unwrap(),
            ThresholdMode::CanonicalMean
        );
        assert!("mean".parse::<ThresholdMode>().is_err());
        assert_eq!(ThresholdMode::Median.to_string(), "median");
        assert_eq!(ThresholdMode::CanonicalMean.to_string(), "canonical-mean");
    }
}
