//! DNS covert-channel detection with locality-sensitive hashing.
//!
//! Tunneling tools smuggle data through DNS by packing payload bytes into
//! query names. Their encodings vary, but queries from the same tool keep a
//! recognizable internal structure. This crate exploits that: it hashes each
//! query's subdomain with a locality-sensitive digest ([`lsh`]), scores how
//! similar nearby queries are to each other, summarizes those scores over
//! sliding windows into fixed-width feature vectors ([`features`]), and
//! trains a random-forest classifier ([`model`]) to tell tunneled traffic
//! from legitimate lookups — and to name the tool family and its current
//! behavior (handshake, upload, download, idle).
//!
//! The crate ships as a library plus a thin `dnslsh` command-line wrapper.
//! The `examples/` directory walks through every stage; start with
//! `cargo run --release -p dnslsh --example compare_strings`.
//!
//! # Pipeline at a glance
//!
//! ```text
//! pcap / csv ──ingest──▶ queries grouped per (source, registered domain)
//!            ──features──▶ windowed pairwise-similarity statistics
//!            ──model──▶ random forest ──▶ binary / family / behavior labels
//! ```
//!
//! [`synth`] generates labeled synthetic traffic so the full pipeline can be
//! exercised without real captures, and [`pipeline`] wires the stages
//! together behind a single configuration struct.

pub mod error;
pub mod features;
pub mod ingest;
pub mod lsh;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
