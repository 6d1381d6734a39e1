//! Parser for `ads.txt` authorized-seller files.
//!
//! Parsing is total: every input line is classified as exactly one of
//! record, variable, comment/blank, or diagnostic, and malformed lines never
//! abort the parse.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain;

/// Declared relationship between a publisher and an exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relationship {
    Direct,
    Reseller,
}

impl Relationship {
    /// Case-insensitive token match; anything outside the closed set is `None`.
    pub fn from_token(token: &str) -> Option<Self> {
        if token.eq_ignore_ascii_case("DIRECT") {
            Some(Relationship::Direct)
        } else if token.eq_ignore_ascii_case("RESELLER") {
            Some(Relationship::Reseller)
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Relationship::Direct => "DIRECT",
            Relationship::Reseller => "RESELLER",
        }
    }
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One authorized-seller line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdsTxtRecord {
    /// Exchange domain, lowercased with trailing dot stripped. Registrable
    /// reduction is deferred to cross-file comparison time.
    pub exchange_domain: String,
    /// Opaque account token, whitespace-trimmed, case preserved.
    pub publisher_id: String,
    pub relationship: Relationship,
    pub cert_authority_id: Option<String>,
    pub line_no: u32,
}

impl AdsTxtRecord {
    /// Render the record back into `exchange, id, relationship[, cert]` form.
    pub fn serialize_line(&self) -> String {
        match &self.cert_authority_id {
            Some(cert) => format!(
                "{}, {}, {}, {}",
                self.exchange_domain, self.publisher_id, self.relationship, cert
            ),
            None => format!(
                "{}, {}, {}",
                self.exchange_domain, self.publisher_id, self.relationship
            ),
        }
    }

    /// Field-wise equality ignoring the source line number.
    pub fn same_fields(&self, other: &AdsTxtRecord) -> bool {
        self.exchange_domain == other.exchange_domain
            && self.publisher_id == other.publisher_id
            && self.relationship == other.relationship
            && self.cert_authority_id == other.cert_authority_id
    }
}

/// A `(line, message)` note about a line that could not become a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDiagnostic {
    pub line_no: u32,
    pub message: String,
}

/// Per-line classification tallies. Every input line lands in exactly one
/// bucket, so the buckets sum to `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCounts {
    pub total: u32,
    pub records: u32,
    pub variables: u32,
    pub comments_or_blank: u32,
    pub diagnostics: u32,
}

/// Parsed `ads.txt` document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdsTxtFile {
    /// Domain the file was retrieved from (normalized).
    pub source_domain: String,
    /// Records in input order; duplicates are kept.
    pub records: Vec<AdsTxtRecord>,
    /// `NAME=VALUE` variables, names uppercased; repeated names accumulate.
    pub variables: BTreeMap<String, Vec<String>>,
    pub diagnostics: Vec<LineDiagnostic>,
    pub counts: LineCounts,
}

impl AdsTxtFile {
    /// Records grouped by `(exchange, publisher id)` in first-seen order.
    pub fn relationship_pairs(&self) -> BTreeMap<(String, String), Vec<&AdsTxtRecord>> {
        let mut map: BTreeMap<(String, String), Vec<&AdsTxtRecord>> = BTreeMap::new();
        for record in &self.records {
            map.entry((record.exchange_domain.clone(), record.publisher_id.clone()))
                .or_default()
                .push(record);
        }
        map
    }
}

/// Parse raw `ads.txt` text retrieved from `source_domain`.
///
/// Comma-separated data lines with at least three fields yield records,
/// `NAME=VALUE` lines yield variables, `#` starts a comment to end of line,
/// and anything else yields a diagnostic.
pub fn parse_ads_txt(source_domain: &str, text: &str) -> AdsTxtFile {
    let mut records = Vec::new();
    let mut variables: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let mut counts = LineCounts::default();

    for (idx, line) in text.lines().enumerate() {
        let line_no = (idx + 1) as u32;
        counts.total += 1;

        // Inline comments are stripped before field splitting.
        let data = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let data = data.trim();

        if data.is_empty() {
            counts.comments_or_blank += 1;
            continue;
        }

        if data.contains(',') {
            match parse_record_line(data, line_no) {
                Ok(record) => {
                    records.push(record);
                    counts.records += 1;
                }
                Err(message) => {
                    diagnostics.push(LineDiagnostic { line_no, message });
                    counts.diagnostics += 1;
                }
            }
        } else if let Some(eq) = data.find('=') {
            let name = data[..eq].trim().to_ascii_uppercase();
            let value = data[eq + 1..].trim().to_string();
            if name.is_empty() {
                diagnostics.push(LineDiagnostic {
                    line_no,
                    message: "variable line with empty name".to_string(),
                });
                counts.diagnostics += 1;
            } else {
                variables.entry(name).or_default().push(value);
                counts.variables += 1;
            }
        } else {
            diagnostics.push(LineDiagnostic {
                line_no,
                message: format!("unrecognized line: {data:?}"),
            });
            counts.diagnostics += 1;
        }
    }

    AdsTxtFile {
        source_domain: domain::normalize_host(source_domain),
        records,
        variables,
        diagnostics,
        counts,
    }
}

fn parse_record_line(data: &str, line_no: u32) -> Result<AdsTxtRecord, String> {
    let fields: Vec<&str> = data.split(',').map(str::trim).collect();
    if fields.len() < 3 {
        return Err(format!("expected at least 3 fields, found {}", fields.len()));
    }

    let exchange_domain = domain::normalize_host(fields[0]);
    if exchange_domain.is_empty() {
        return Err("empty exchange domain".to_string());
    }
    if !domain::is_valid_hostname(&exchange_domain) {
        return Err(format!("exchange field is not a hostname: {exchange_domain:?}"));
    }

    let publisher_id = fields[1].to_string();
    if publisher_id.is_empty() {
        return Err("empty publisher id".to_string());
    }

    let relationship = Relationship::from_token(fields[2])
        .ok_or_else(|| format!("unknown relationship token: {:?}", fields[2]))?;

    let cert_authority_id = fields
        .get(3)
        .map(|s| s.to_string())
        .filter(|s| !s.is_empty());

    Ok(AdsTxtRecord {
        exchange_domain,
        publisher_id,
        relationship,
        cert_authority_id,
        line_no,
    })
}
