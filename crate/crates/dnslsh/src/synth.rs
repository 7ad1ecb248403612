//! Labeled synthetic DNS traffic.
//!
//! Generates benign-like streams (small fixed vocabulary, or high-variance
//! CDN-style tokens) and tunnel-like streams (long encoded payloads, polled
//! downloads, near-identical idle keepalives) so the whole pipeline can be
//! exercised end to end without any external dataset. Every profile is
//! fully deterministic under its seed.
//!
//! Alphabets deliberately avoid the default delimiter characters (`.`,
//! `-`, `_`), so a cleaned subdomain's length equals the generated payload
//! length — which keeps length contracts exact even after label chunking
//! (payloads longer than 63 characters are split into dot-separated DNS
//! labels that the cleaning step strips back out).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Behavior, DnsQueryRecord, LEGITIMATE};

/// Family label attached to all malicious synthetic traffic, so it can
/// never be confused with a real capture.
pub const SYNTH_FAMILY: &str = "synthetic";

/// Traffic shape to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Repetitive lookups from a ≤10-name vocabulary (www/mail/api/...).
    BenignStatic,
    /// High-variance short random tokens, CDN style.
    BenignCdn,
    /// Long random-alphabet payload subdomains.
    TunnelUpload,
    /// Poll queries: an incrementing counter plus mostly-patterned filler.
    TunnelDownload,
    /// A fixed keepalive token with an incrementing counter.
    TunnelIdle,
}

impl SynthKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SynthKind::BenignStatic => "benign-static",
            SynthKind::BenignCdn => "benign-cdn",
            SynthKind::TunnelUpload => "tunnel-upload",
            SynthKind::TunnelDownload => "tunnel-download",
            SynthKind::TunnelIdle => "tunnel-idle",
        }
    }

    pub fn is_tunnel(&self) -> bool {
        matches!(
            self,
            SynthKind::TunnelUpload | SynthKind::TunnelDownload | SynthKind::TunnelIdle
        )
    }

    /// Behavior label for tunnel kinds.
    pub fn behavior(&self) -> Option<Behavior> {
        match self {
            SynthKind::TunnelUpload => Some(Behavior::Upload),
            SynthKind::TunnelDownload => Some(Behavior::Download),
            SynthKind::TunnelIdle => Some(Behavior::Idle),
            _ => None,
        }
    }
}

impl std::fmt::Display for SynthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SynthKind> {
        match s {
            "benign-static" => Ok(SynthKind::BenignStatic),
            "benign-cdn" => Ok(SynthKind::BenignCdn),
            "tunnel-upload" => Ok(SynthKind::TunnelUpload),
            "tunnel-download" => Ok(SynthKind::TunnelDownload),
            "tunnel-idle" => Ok(SynthKind::TunnelIdle),
            other => Err(Error::InvalidArgument(format!(
                "unknown synth kind `{other}` (expected benign-static, benign-cdn, \
                 tunnel-upload, tunnel-download or tunnel-idle)"
            ))),
        }
    }
}

/// Payload character set. None of these contain delimiter characters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alphabet {
    /// A–Z a–z 0–9 (base64url without the `-_` pair, which the cleaning
    /// step would strip).
    Base64UrlLike,
    /// a–z 2–7.
    Base32Like,
    /// 0–9 a–f.
    HexLetters,
}

impl Alphabet {
    pub fn chars(&self) -> &'static [u8] {
        match self {
            Alphabet::Base64UrlLike => {
                b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
            }
            Alphabet::Base32Like => b"abcdefghijklmnopqrstuvwxyz234567",
            Alphabet::HexLetters => b"0123456789abcdef",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Alphabet::Base64UrlLike => "base64url-like",
            Alphabet::Base32Like => "base32-like",
            Alphabet::HexLetters => "hex-letters",
        }
    }
}

impl std::fmt::Display for Alphabet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Alphabet> {
        match s {
            "base64url-like" | "base64url" => Ok(Alphabet::Base64UrlLike),
            "base32-like" | "base32" => Ok(Alphabet::Base32Like),
            "hex-letters" | "hex" => Ok(Alphabet::HexLetters),
            other => Err(Error::InvalidArgument(format!(
                "unknown alphabet `{other}` (expected base64url-like, base32-like \
                 or hex-letters)"
            ))),
        }
    }
}

/// Everything needed to generate one deterministic synthetic stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub kind: SynthKind,
    /// Number of query records to emit.
    pub queries: usize,
    /// Payload length bounds (cleaned characters), inclusive. Ignored by
    /// benign-static (vocabulary names) and tunnel-idle (token + counter).
    pub length_min: usize,
    pub length_max: usize,
    pub alphabet: Alphabet,
    /// Benign kinds: probability of repeating the previous subdomain.
    /// Tunnel kinds: fraction of payload characters drawn at random (the
    /// rest follow a fixed per-stream pattern).
    pub randomness: f64,
    /// Registered domain the queries target, e.g. `example.com`.
    pub domain: String,
    pub seed: u64,
}

impl SynthProfile {
    /// Sensible per-kind defaults; callers override fields as needed.
    pub fn for_kind(kind: SynthKind, seed: u64) -> SynthProfile {
        let (queries, length_min, length_max, alphabet, randomness) = match kind {
            SynthKind::BenignStatic => (400, 3, 8, Alphabet::Base32Like, 0.6),
            SynthKind::BenignCdn => (400, 8, 16, Alphabet::Base32Like, 0.1),
            SynthKind::TunnelUpload => (400, 40, 110, Alphabet::Base64UrlLike, 1.0),
            SynthKind::TunnelDownload => (400, 24, 48, Alphabet::Base32Like, 0.3),
            SynthKind::TunnelIdle => (400, 9, 16, Alphabet::Base32Like, 0.0),
        };
        SynthProfile {
            kind,
            queries,
            length_min,
            length_max,
            alphabet,
            randomness,
            domain: "example.com".into(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_min > self.length_max {
            return Err(Error::InvalidArgument(format!(
                "length bounds inverted: min {} > max {}",
                self.length_min, self.length_max
            )));
        }
        if !(0.0..=1.0).contains(&self.randomness) {
            return Err(Error::InvalidArgument(format!(
                "randomness/repeat probability must be in [0, 1], got {}",
                self.randomness
            )));
        }
        if self.domain.is_empty()
            || self.domain.starts_with('.')
            || self.domain.ends_with('.')
            || self.domain.split('.').any(|l| l.is_empty() || l.len() > 63)
        {
            return Err(Error::InvalidArgument(format!(
                "bad domain `{}`",
                self.domain
            )));
        }
        Ok(())
    }

    /// Source tag for the generated records; includes kind and seed so
    /// separate runs never interleave into one stream.
    pub fn source(&self) -> String {
        format!("synth:{}:{}", self.kind, self.seed)
    }
}

/// Benign-static vocabulary (10 names).
const VOCABULARY: [&str; 10] = [
    "www", "mail", "api", "cdn", "static", "img", "login", "mx", "ns1", "app",
];

/// Mean seconds between queries, per kind.
fn query_spacing(kind: SynthKind) -> f64 {
    match kind {
        SynthKind::BenignStatic => 2.0,
        SynthKind::BenignCdn => 0.5,
        SynthKind::TunnelUpload => 0.08,
        SynthKind::TunnelDownload => 0.15,
        SynthKind::TunnelIdle => 30.0,
    }
}

fn qtype_for(kind: SynthKind) -> &'static str {
    match kind {
        SynthKind::BenignStatic | SynthKind::BenignCdn | SynthKind::TunnelIdle => "A",
        SynthKind::TunnelUpload => "TXT",
        SynthKind::TunnelDownload => "CNAME",
    }
}

/// Split a payload into DNS labels of at most 63 characters.
fn chunk_into_labels(payload: &str) -> String {
    if payload.len() <= 63 {
        return payload.to_string();
    }
    payload
        .as_bytes()
        .chunks(63)
        .map(|c| std::str::from_utf8(c).expect("ascii payload"))
        .collect::<Vec<_>>()
        .join(".")
}

/// Payload of `len` characters: each position is random with probability
/// `randomness`, otherwise follows a fixed per-stream pattern, so low
/// randomness yields high mutual similarity.
fn build_payload(
    len: usize,
    randomness: f64,
    alphabet: &'static [u8],
    pattern_salt: u64,
    rng: &mut ChaCha8Rng,
) -> String {
    let mut out = String::with_capacity(len);
    for i in 0..len {
        let c = if randomness > 0.0 && rng.random::<f64>() < randomness {
            alphabet[rng.random_range(0..alphabet.len())]
        } else {
            let idx = (i as u64)
                .wrapping_mul(11)
                .wrapping_add(pattern_salt)
                .wrapping_add((i / 7) as u64) as usize;
            alphabet[idx % alphabet.len()]
        };
        out.push(c as char);
    }
    out
}

/// Generate the profile's query records. Deterministic under the seed.
pub fn generate(profile: &SynthProfile) -> Result<Vec<DnsQueryRecord>> {
    profile.validate()?;
    let mut rng = {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&profile.seed.to_le_bytes());
        bytes[8] = b'g';
        ChaCha8Rng::from_seed(bytes)
    };
    let alphabet = profile.alphabet.chars();
    // Per-stream constants drawn once, so all queries in a stream share a
    // pattern substrate and an idle/keepalive token.
    let pattern_salt: u64 = rng.random();
    let idle_token: String = {
        let len = profile.length_min.clamp(6, 12);
        (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())] as char)
            .collect()
    };

    let spacing = query_spacing(profile.kind);
    let mut timestamp = 1_716_000_000.0_f64;
    let source = profile.source();
    let (family, behavior) = if profile.kind.is_tunnel() {
        (SYNTH_FAMILY.to_string(), profile.kind.behavior())
    } else {
        (LEGITIMATE.to_string(), None)
    };

    let mut records = Vec::with_capacity(profile.queries);
    let mut previous: Option<String> = None;
    for i in 0..profile.queries {
        timestamp += spacing + rng.random_range(0.0..spacing * 0.25);
        let subdomain = match profile.kind {
            SynthKind::BenignStatic => {
                let repeat =
                    previous.is_some() && rng.random::<f64>() < profile.randomness;
                if repeat {
                    previous.clone().unwrap()
                } else {
                    VOCABULARY[rng.random_range(0..VOCABULARY.len())].to_string()
                }
            }
            SynthKind::BenignCdn => {
                let repeat =
                    previous.is_some() && rng.random::<f64>() < profile.randomness;
                if repeat {
                    previous.clone().unwrap()
                } else {
                    let len = rng.random_range(profile.length_min..=profile.length_max);
                    (0..len)
                        .map(|_| alphabet[rng.random_range(0..alphabet.len())] as char)
                        .collect()
                }
            }
            SynthKind::TunnelUpload => {
                let len = rng.random_range(profile.length_min..=profile.length_max);
                build_payload(len, profile.randomness, alphabet, pattern_salt, &mut rng)
            }
            SynthKind::TunnelDownload => {
                // Poll query: sequence counter up front, patterned filler
                // behind it.
                let len = rng.random_range(profile.length_min..=profile.length_max);
                let counter = format!("{i:06x}");
                if len <= counter.len() {
                    counter[..len.max(1)].to_string()
                } else {
                    let fill = build_payload(
                        len - counter.len(),
                        profile.randomness,
                        alphabet,
                        pattern_salt,
                        &mut rng,
                    );
                    format!("{counter}{fill}")
                }
            }
            SynthKind::TunnelIdle => format!("{idle_token}{i}"),
        };
        previous = Some(subdomain.clone());
        let qname = format!("{}.{}", chunk_into_labels(&subdomain), profile.domain);
        records.push(DnsQueryRecord {
            timestamp,
            qname,
            qtype: qtype_for(profile.kind).to_string(),
            family_label: Some(family.clone()),
            behavior_label: behavior,
            source: source.clone(),
        });
    }
    Ok(records)
}
