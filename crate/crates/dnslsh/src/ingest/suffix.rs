//! Public-suffix matching: find the registered domain (eTLD+1) of a query
//! name so everything to its left can be treated as attacker-controlled
//! payload.
//!
//! A trimmed rule snapshot is bundled into the binary
//! (`data/public_suffix_list.dat`); callers can load a fuller list from disk
//! with [`SuffixRules::from_file`]. Matching implements the standard
//! publicsuffix.org algorithm: among all rules matching a name, an exception
//! rule (`!www.ck`) wins outright, otherwise the rule with the most labels;
//! a name matching no rule falls back to the implicit `*` rule (its last
//! label is the public suffix).

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Compiled public-suffix rule set.
#[derive(Debug, Clone, Default)]
pub struct SuffixRules {
    /// Plain rules, stored lowercase ("com", "co.uk").
    normal: BTreeSet<String>,
    /// Wildcard rules, stored as the part after `*.` ("ck" for `*.ck`).
    wildcard: BTreeSet<String>,
    /// Exception rules, stored without the `!` ("www.ck").
    exception: BTreeSet<String>,
}

static BUNDLED: OnceLock<SuffixRules> = OnceLock::new();
const BUNDLED_TEXT: &str = include_str!("../../data/public_suffix_list.dat");

impl SuffixRules {
    /// The rule set compiled into the binary.
    pub fn bundled() -> &'static SuffixRules {
        BUNDLED.get_or_init(|| {
            SuffixRules::parse(BUNDLED_TEXT).expect("bundled suffix snapshot must parse")
        })
    }

    /// Parse rules from public-suffix-list text (comments `//`, blank lines
    /// ignored, text after whitespace ignored).
    pub fn parse(text: &str) -> Result<SuffixRules> {
        let mut rules = SuffixRules::default();
        for raw in text.lines() {
            let line = raw.split_whitespace().next().unwrap_or("");
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let lower = line.to_lowercase();
            if let Some(rest) = lower.strip_prefix('!') {
                if rest.is_empty() || rest.contains('*') {
                    return Err(Error::Data(format!("invalid exception rule `{raw}`")));
                }
                rules.exception.insert(rest.to_string());
            } else if let Some(rest) = lower.strip_prefix("*.") {
                if rest.is_empty() || rest.contains('*') {
                    return Err(Error::Data(format!("invalid wildcard rule `{raw}`")));
                }
                rules.wildcard.insert(rest.to_string());
            } else {
                if lower.contains('*') {
                    return Err(Error::Data(format!(
                        "unsupported wildcard position in rule `{raw}`"
                    )));
                }
                rules.normal.insert(lower);
            }
        }
        Ok(rules)
    }

    /// Load rules from a file on disk.
    pub fn from_file(path: &Path) -> Result<SuffixRules> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rules = SuffixRules::parse(&text)?;
        if rules.len() == 0 {
            return Err(Error::Data(format!(
                "suffix rule file {} contains no rules",
                path.display()
            )));
        }
        Ok(rules)
    }

    /// Number of rules loaded.
    pub fn len(&self) -> usize {
        self.normal.len() + self.wildcard.len() + self.exception.len()
    }

    /// True when no rules are loaded (matching then uses only the implicit
    /// `*` fallback).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Split `qname` into `(subdomain, registered_domain)`.
    ///
    /// Returns `None` when the name has no registered domain: it is itself a
    /// public suffix (like `co.uk`), is empty, or is syntactically invalid
    /// (empty labels). A single trailing dot is accepted and stripped; the
    /// returned slices preserve the input's case.
    pub fn split<'a>(&self, qname: &'a str) -> Option<(&'a str, &'a str)> {
        let name = qname.strip_suffix('.').unwrap_or(qname);
        if name.is_empty() {
            return None;
        }
        // Byte offset of each label start, for slicing the original string.
        let mut label_starts = vec![0usize];
        for (i, b) in name.bytes().enumerate() {
            if b == b'.' {
                label_starts.push(i + 1);
            }
        }
        let lower = name.to_lowercase();
        let labels: Vec<&str> = lower.split('.').collect();
        if labels.iter().any(|l| l.is_empty()) {
            return None;
        }
        let count = labels.len();

        // Scan candidate suffixes longest-first; record the first match of
        // each kind (which is therefore the longest of its kind).
        let mut exception_len: Option<usize> = None; // label count of matched exception rule
        let mut plain_len: Option<usize> = None; // label count of matched public suffix
        for i in 0..count {
            let suffix = labels[i..].join(".");
            if exception_len.is_none() && self.exception.contains(&suffix) {
                exception_len = Some(count - i);
            }
            if plain_len.is_none() {
                let exact = self.normal.contains(&suffix);
                // `*.T` matches `labels[i..]` iff the part after the first
                // label equals T (the `*` consumes exactly labels[i]).
                let via_wildcard =
                    i + 1 < count && self.wildcard.contains(&labels[i + 1..].join("."));
                if exact || via_wildcard {
                    plain_len = Some(count - i);
                }
            }
            if exception_len.is_some() && plain_len.is_some() {
                break;
            }
        }

        // An exception rule declares that the name matching it is
        // registrable: the public suffix is the rule minus its first label.
        let suffix_len = match (exception_len, plain_len) {
            (Some(e), _) => e - 1,
            (None, Some(p)) => p,
            (None, None) => 1, // implicit `*` rule
        };

        if count <= suffix_len {
            return None; // the name is itself (part of) a public suffix
        }
        let reg_start = label_starts[count - suffix_len - 1];
        let registered = &name[reg_start..];
        let subdomain = if reg_start == 0 {
            ""
        } else {
            &name[..reg_start - 1]
        };
        Some((subdomain, registered))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(qname: &str) -> Option<(&str, &str)> {
        SuffixRules::bundled().split(qname)
    }

    #[test]
    fn plain_tld() {
        assert_eq!(split("example.com"), Some(("", "example.com")));
        assert_eq!(
            split("SGVsbG8gV29ybGQ.example.com"),
            Some(("SGVsbG8gV29ybGQ", "example.com"))
        );
        assert_eq!(split("a.b.example.com"), Some(("a.b", "example.com")));
    }

    #[test]
    fn multi_label_suffix() {
        assert_eq!(split("a.b.site.co.uk"), Some(("a.b", "site.co.uk")));
        assert_eq!(split("site.co.uk"), Some(("", "site.co.uk")));
        // The suffix itself has no registered domain.
        assert_eq!(split("co.uk"), None);
        assert_eq!(split("uk"), None);
        assert_eq!(split("com"), None);
    }

    #[test]
    fn wildcard_and_exception() {
        // *.ck: any single label under ck is a public suffix.
        assert_eq!(split("foo.bar.ck"), Some(("", "foo.bar.ck")));
        assert_eq!(split("x.foo.bar.ck"), Some(("x", "foo.bar.ck")));
        assert_eq!(split("bar.ck"), None);
        // !www.ck: www.ck is registrable despite the wildcard.
        assert_eq!(split("www.ck"), Some(("", "www.ck")));
        assert_eq!(split("foo.www.ck"), Some(("foo", "www.ck")));
    }

    #[test]
    fn unknown_tld_uses_implicit_star_rule() {
        assert_eq!(split("x.example.zz"), Some(("x", "example.zz")));
        assert_eq!(split("example.zz"), Some(("", "example.zz")));
        assert_eq!(split("zz"), None);
    }

    #[test]
    fn private_section_rules_apply() {
        assert_eq!(
            split("payload.tenant.duckdns.org"),
            Some(("payload", "tenant.duckdns.org"))
        );
        assert_eq!(split("user.github.io"), Some(("", "user.github.io")));
    }

    #[test]
    fn case_insensitive_match_case_preserving_output() {
        assert_eq!(split("PayLoad.Example.COM"), Some(("PayLoad", "Example.COM")));
        assert_eq!(split("QQ.Site.CO.UK"), Some(("QQ", "Site.CO.UK")));
    }

    #[test]
    fn trailing_dot_and_invalids() {
        assert_eq!(split("x.example.com."), Some(("x", "example.com")));
        assert_eq!(split("."), None);
        assert_eq!(split(""), None);
        assert_eq!(split("a..b.com"), None);
        assert_eq!(split(".leading.example.com"), None);
    }

    #[test]
    fn bundled_snapshot_loads_and_is_nonempty() {
        let rules = SuffixRules::bundled();
        assert!(rules.len() > 100, "snapshot has {} rules", rules.len());
        assert!(!rules.is_empty());
    }

    #[test]
    fn parse_rejects_bad_rules() {
        assert!(SuffixRules::parse("foo.*.bar").is_err());
        assert!(SuffixRules::parse("!").is_err());
        assert!(SuffixRules::parse("*.").is_err());
        // Comments and inline trailing text are fine.
        let ok = SuffixRules::parse("// comment\ncom\nco.uk extra-ignored\n\n").unwrap();
        assert_eq!(ok.len(), 2);
    }
}
