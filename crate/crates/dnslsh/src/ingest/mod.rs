//! Traffic ingestion: parse DNS queries from captures or CSV, isolate the
//! subdomain each query smuggles its payload in, and group queries into
//! per-registered-domain streams that preserve capture order.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod dns_wire;
pub mod pcap;
pub mod suffix;

pub use pcap::{parse_pcap, write_query_pcap, PcapSummary};
pub use suffix::SuffixRules;

/// Tunnel activity phases used for behavioral labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Download,
    Handshake,
    Idle,
    Upload,
}

impl Behavior {
    /// All behaviors, in lexicographic order of their wire form.
    pub const ALL: [Behavior; 4] = [
        Behavior::Download,
        Behavior::Handshake,
        Behavior::Idle,
        Behavior::Upload,
    ];

    /// Lowercase wire form used in CSV files.
    pub fn as_str(&self) -> &'static str {
        match self {
            Behavior::Download => "download",
            Behavior::Handshake => "handshake",
            Behavior::Idle => "idle",
            Behavior::Upload => "upload",
        }
    }

    /// Capitalized form used in compound class names.
    pub fn display_name(&self) -> &'static str {
        match self {
            Behavior::Download => "Download",
            Behavior::Handshake => "Handshake",
            Behavior::Idle => "Idle",
            Behavior::Upload => "Upload",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "download" => Ok(Behavior::Download),
            "handshake" => Ok(Behavior::Handshake),
            "idle" => Ok(Behavior::Idle),
            "upload" => Ok(Behavior::Upload),
            other => Err(Error::InvalidArgument(format!(
                "unknown behavior `{other}` (expected handshake|idle|download|upload)"
            ))),
        }
    }
}

/// The family label marking non-malicious traffic.
pub const LEGITIMATE: &str = "legitimate";

/// One observed DNS query, with optional ground-truth labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnsQueryRecord {
    /// Seconds since epoch, fractional.
    pub timestamp: f64,
    /// Full query name, presentation form, no trailing dot.
    pub qname: String,
    /// RR type mnemonic (A, TXT, NULL, ...).
    pub qtype: String,
    /// Malware family (or `legitimate`); `None` when unlabeled.
    pub family_label: Option<String>,
    /// Tunnel activity phase; only meaningful for malicious traffic.
    pub behavior_label: Option<Behavior>,
    /// Capture identifier this query came from.
    pub source: String,
}

impl DnsQueryRecord {
    /// Validate the record's internal invariants.
    pub fn validate(&self) -> Result<()> {
        if self.qname.is_empty() {
            return Err(Error::Data("qname must be non-empty".into()));
        }
        if !(self.timestamp >= 0.0) {
            return Err(Error::Data(format!(
                "timestamp must be >= 0, got {}",
                self.timestamp
            )));
        }
        if self.behavior_label.is_some() {
            match self.family_label.as_deref() {
                None => {
                    return Err(Error::Data(
                        "behavior label requires a family label".into(),
                    ))
                }
                Some(LEGITIMATE) => {
                    return Err(Error::Data(
                        "legitimate traffic cannot carry a behavior label".into(),
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// True when the record is labeled as malicious (any family other than
    /// `legitimate`).
    pub fn is_malicious(&self) -> bool {
        matches!(&self.family_label, Some(f) if f != LEGITIMATE)
    }
}

/// A query whose subdomain has been isolated and cleaned for hashing.
#[derive(Clone, Debug, PartialEq)]
pub struct CleanQuery {
    pub record: DnsQueryRecord,
    /// eTLD+1 the query targets.
    pub registered_domain: String,
    /// Subdomain with all delimiter characters removed — the byte string
    /// that gets hashed.
    pub subdomain_clean: String,
}

/// Identifies one stream: all queries from one capture to one registered
/// domain.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub source: String,
    pub registered_domain: String,
}

impl fmt::Display for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.source, self.registered_domain)
    }
}

/// Ordered queries sharing a [`StreamKey`], in original capture order.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainStream {
    pub key: StreamKey,
    pub queries: Vec<CleanQuery>,
}

/// What [`group_by_domain`] excluded and why.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct GroupReport {
    /// Input record count.
    pub total: usize,
    /// Records placed into streams.
    pub grouped: usize,
    /// Records whose qname had no registered domain (bare suffixes etc.).
    pub no_registered_domain: usize,
    /// Up to five sample qnames from the excluded set, for diagnostics.
    pub excluded_samples: Vec<String>,
}

impl fmt::Display for GroupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} records: {} grouped, {} without a registered domain",
            self.total, self.grouped, self.no_registered_domain
        )?;
        if !self.excluded_samples.is_empty() {
            write!(f, " (e.g. {})", self.excluded_samples.join(", "))?;
        }
        Ok(())
    }
}

/// Remove every character in `delimiters` from `subdomain`, preserving the
/// order of everything else.
pub fn strip_delimiters(subdomain: &str, delimiters: &BTreeSet<char>) -> String {
    subdomain.chars().filter(|c| !delimiters.contains(c)).collect()
}

/// Split a query name into `(subdomain, registered_domain)` under `rules`.
///
/// Errors with the qname when the name has no registered domain (it is
/// itself a public suffix, or syntactically invalid).
pub fn extract_subdomain<'a>(
    qname: &'a str,
    rules: &SuffixRules,
) -> Result<(&'a str, &'a str)> {
    rules.split(qname).ok_or_else(|| {
        Error::Data(format!("no-registered-domain: `{qname}`"))
    })
}

/// Group records into per-(source, registered-domain) streams, preserving
/// input order within each stream. Stream order follows first appearance.
/// Records without a registered domain are excluded and counted.
pub fn group_by_domain(
    records: Vec<DnsQueryRecord>,
    rules: &SuffixRules,
    delimiters: &BTreeSet<char>,
) -> (Vec<DomainStream>, GroupReport) {
    let mut report = GroupReport {
        total: records.len(),
        ..GroupReport::default()
    };
    let mut streams: Vec<DomainStream> = Vec::new();
    // Key → index into `streams`; BTreeMap for deterministic iteration
    // anywhere it might be iterated, though lookup is all we need.
    let mut index: std::collections::BTreeMap<StreamKey, usize> = std::collections::BTreeMap::new();

    for record in records {
        let (subdomain, registered) = match rules.split(&record.qname) {
            Some(parts) => parts,
            None => {
                report.no_registered_domain += 1;
                if report.excluded_samples.len() < 5 {
                    report.excluded_samples.push(record.qname.clone());
                }
                continue;
            }
        };
        let clean = CleanQuery {
            registered_domain: registered.to_string(),
            subdomain_clean: strip_delimiters(subdomain, delimiters),
            record,
        };
        let key = StreamKey {
            source: clean.record.source.clone(),
            registered_domain: clean.registered_domain.clone(),
        };
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            streams.push(DomainStream {
                key,
                queries: Vec::new(),
            });
            streams.len() - 1
        });
        streams[slot].queries.push(clean);
        report.grouped += 1;
    }
    (streams, report)
}

/// Expected CSV header, in order.
pub const CSV_HEADER: [&str; 6] = ["ts", "qname", "qtype", "family", "behavior", "source"];

/// Read query records from the canonical CSV schema
/// (`ts,qname,qtype,family,behavior,source`). Extra columns are ignored;
/// missing ones are an error naming the column. Any bad row aborts with its
/// line number.
pub fn read_csv(path: &Path) -> Result<Vec<DnsQueryRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_open_error(path, e))?
        .clone();
    let mut positions = [0usize; 6];
    for (i, want) in CSV_HEADER.iter().enumerate() {
        positions[i] = headers
            .iter()
            .position(|h| h == *want)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: want.to_string(),
            })?;
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| match e.position() {
            Some(pos) => Error::BadRow {
                path: path.to_path_buf(),
                line: pos.line(),
                message: e.to_string(),
            },
            None => Error::Data(e.to_string()),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::BadRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        let field = |i: usize| row.get(positions[i]).unwrap_or("");

        let timestamp: f64 = field(0)
            .parse()
            .map_err(|_| bad(format!("unparsable ts `{}`", field(0))))?;
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(bad(format!("ts must be finite and >= 0, got `{}`", field(0))));
        }
        let qname = field(1).to_string();
        if qname.is_empty() {
            return Err(bad("empty qname".into()));
        }
        let qtype = field(2).to_string();
        if qtype.is_empty() {
            return Err(bad("empty qtype".into()));
        }
        let family_label = match field(3) {
            "" => None,
            f => Some(f.to_string()),
        };
        let behavior_label = match field(4) {
            "" => None,
            b => Some(
                b.parse::<Behavior>()
                    .map_err(|e| bad(e.to_string()))?,
            ),
        };
        let record = DnsQueryRecord {
            timestamp,
            qname,
            qtype,
            family_label,
            behavior_label,
            source: field(5).to_string(),
        };
        record.validate().map_err(|e| bad(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

fn csv_open_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(io) = e.into_kind() {
        Error::io(path, io)
    } else {
        Error::Data(format!("{}: invalid CSV", path.display()))
    }
}

/// Write records in the canonical CSV schema. `read_csv(write_csv(r)) == r`.
pub fn write_csv(records: &[DnsQueryRecord], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
    writer
        .write_record(CSV_HEADER)
        .map_err(|e| Error::Data(e.to_string()))?;
    for record in records {
        record.validate()?;
        writer
            .write_record(&[
                record.timestamp.to_string(),
                record.qname.clone(),
                record.qtype.clone(),
                record.family_label.clone().unwrap_or_default(),
                record
                    .behavior_label
                    .map(|b| b.as_str().to_string())
                    .unwrap_or_default(),
                record.source.clone(),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(qname: &str, source: &str) -> DnsQueryRecord {
        DnsQueryRecord {
            timestamp: 1000.0,
            qname: qname.to_string(),
            qtype: "A".to_string(),
            family_label: Some(LEGITIMATE.to_string()),
            behavior_label: None,
            source: source.to_string(),
        }
    }

    fn default_delims() -> BTreeSet<char> {
        ['.', '-', '_'].into_iter().collect()
    }

    #[test]
    fn strip_delimiters_filters_only_configured_set() {
        let delims = default_delims();
        assert_eq!(strip_delimiters("a.b.c", &delims), "abc");
        assert_eq!(strip_delimiters("chunk1-chunk2_x", &delims), "chunk1chunk2x");
        assert_eq!(strip_delimiters("SGVsbG8gV29ybGQ", &delims), "SGVsbG8gV29ybGQ");
        let dot_only: BTreeSet<char> = ['.'].into_iter().collect();
        assert_eq!(strip_delimiters("a-b.c_d", &dot_only), "a-bc_d");
        assert_eq!(strip_delimiters("", &delims), "");
    }

    #[test]
    fn extract_subdomain_contract() {
        let rules = SuffixRules::bundled();
        assert_eq!(
            extract_subdomain("SGVsbG8gV29ybGQ.example.com", rules).unwrap(),
            ("SGVsbG8gV29ybGQ", "example.com")
        );
        assert_eq!(
            extract_subdomain("example.com", rules).unwrap(),
            ("", "example.com")
        );
        assert_eq!(
            extract_subdomain("a.b.site.co.uk", rules).unwrap(),
            ("a.b", "site.co.uk")
        );
        let err = extract_subdomain("co.uk", rules).unwrap_err();
        assert!(err.to_string().contains("no-registered-domain"));
    }

    #[test]
    fn group_preserves_order_and_partitions() {
        let rules = SuffixRules::bundled();
        let records = vec![
            record("a1.example.com", "run1"),
            record("b1.other.net", "run1"),
            record("a2.example.com", "run1"),
            record("b2.other.net", "run1"),
        ];
        let (streams, report) = group_by_domain(records, rules, &default_delims());
        assert_eq!(streams.len(), 2);
        assert_eq!(streams[0].key.registered_domain, "example.com");
        assert_eq!(
            streams[0]
                .queries
                .iter()
                .map(|q| q.record.qname.as_str())
                .collect::<Vec<_>>(),
            vec!["a1.example.com", "a2.example.com"]
        );
        assert_eq!(
            streams[1]
                .queries
                .iter()
                .map(|q| q.record.qname.as_str())
                .collect::<Vec<_>>(),
            vec!["b1.other.net", "b2.other.net"]
        );
        assert_eq!(report.total, 4);
        assert_eq!(report.grouped, 4);
        assert_eq!(report.no_registered_domain, 0);
    }

    #[test]
    fn group_separates_sources_and_counts_exclusions() {
        let rules = SuffixRules::bundled();
        let records = vec![
            record("x.example.com", "run1"),
            record("x.example.com", "run2"),
            record("co.uk", "run1"), // no registered domain
        ];
        let (streams, report) = group_by_domain(records, rules, &default_delims());
        assert_eq!(streams.len(), 2, "same domain, two sources → two streams");
        assert_eq!(report.grouped, 2);
        assert_eq!(report.no_registered_domain, 1);
        assert_eq!(report.excluded_samples, vec!["co.uk"]);
        assert_eq!(report.grouped + report.no_registered_domain, report.total);
    }

    #[test]
    fn clean_query_has_no_delimiters() {
        let rules = SuffixRules::bundled();
        let records = vec![record("chunk-1.chunk_2.tunnel.example.com", "r")];
        let (streams, _) = group_by_domain(records, rules, &default_delims());
        assert_eq!(streams[0].queries[0].subdomain_clean, "chunk1chunk2tunnel");
        assert_eq!(streams[0].queries[0].registered_domain, "example.com");
    }

    #[test]
    fn record_validation() {
        let mut r = record("x.example.com", "run1");
        assert!(r.validate().is_ok());
        r.behavior_label = Some(Behavior::Idle);
        // legitimate + behavior violates the invariant
        assert!(r.validate().is_err());
        r.family_label = Some("iodine".to_string());
        assert!(r.validate().is_ok());
        r.family_label = None;
        assert!(r.validate().is_err());
        let mut bad_ts = record("x.example.com", "run1");
        bad_ts.timestamp = -1.0;
        assert!(bad_ts.validate().is_err());
        let mut empty_name = record("x.example.com", "run1");
        empty_name.qname.clear();
        assert!(empty_name.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("queries.csv");
        let records = vec![
            DnsQueryRecord {
                timestamp: 1716200000.125,
                qname: "SGVsbG8gV29ybGQ.example.com".into(),
                qtype: "TXT".into(),
                family_label: Some("dnscat2".into()),
                behavior_label: Some(Behavior::Download),
                source: "run1".into(),
            },
            DnsQueryRecord {
                timestamp: 1716200001.0,
                qname: "www.example.com".into(),
                qtype: "A".into(),
                family_label: Some(LEGITIMATE.into()),
                behavior_label: None,
                source: "isp-log".into(),
            },
            DnsQueryRecord {
                timestamp: 1716200002.5,
                qname: "keepalive0.c2.net".into(),
                qtype: "A".into(),
                family_label: Some("roguerobin-ps".into()),
                behavior_label: Some(Behavior::Idle),
                source: "run2".into(),
            },
        ];
        write_csv(&records, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn csv_header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "ts,qname,qtype,family,behavior,source\n").unwrap();
        assert_eq!(read_csv(&path).unwrap(), vec![]);
    }

    #[test]
    fn csv_missing_column_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "ts,qname,qtype,family,source\n").unwrap();
        let err = read_csv(&path).unwrap_err();
        assert!(
            err.to_string().contains("behavior"),
            "error should name the missing column: {err}"
        );
    }

    #[test]
    fn csv_bad_rows_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "ts,qname,qtype,family,behavior,source\n\
             1.0,x.example.com,A,legitimate,,r\n\
             not-a-number,y.example.com,A,legitimate,,r\n",
        )
        .unwrap();
        let err = read_csv(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3:"), "line number expected in `{msg}`");
        assert_eq!(err.exit_code(), 3);

        std::fs::write(
            &path,
            "ts,qname,qtype,family,behavior,source\n\
             1.0,x.example.com,A,legitimate,sneaky,r\n",
        )
        .unwrap();
        assert!(read_csv(&path).is_err(), "bad behavior value rejected");
    }

    #[test]
    fn behavior_parse_display() {
        for b in Behavior::ALL {
            assert_eq!(b.as_str().parse::<Behavior>().unwrap(), b);
        }
        assert!("HANDSHAKE".parse::<Behavior>().is_err());
        assert_eq!(Behavior::Download.display_name(), "Download");
    }
}
