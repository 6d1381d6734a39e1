//! Parser for `sellers.json` documents and the seller-ID index built from
//! them.
//!
//! Parsing never aborts: unparseable documents come back as a file with zero
//! entries and a diagnostic, which downstream modules read as "sellers.json
//! not public/usable".

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain;

/// Declared role of a seller entry. `Invalid` captures every token outside
/// the closed three-value set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SellerType {
    Publisher,
    Intermediary,
    Both,
    Invalid,
}

impl SellerType {
    pub fn from_token(token: &str) -> Self {
        let token = token.trim();
        if token.eq_ignore_ascii_case("PUBLISHER") {
            SellerType::Publisher
        } else if token.eq_ignore_ascii_case("INTERMEDIARY") {
            SellerType::Intermediary
        } else if token.eq_ignore_ascii_case("BOTH") {
            SellerType::Both
        } else {
            SellerType::Invalid
        }
    }

    /// True when this entry resells inventory (`INTERMEDIARY` or `BOTH`).
    pub fn resells(&self) -> bool {
        matches!(self, SellerType::Intermediary | SellerType::Both)
    }
}

/// One row of a `sellers.json` document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SellerEntry {
    /// Opaque account token, trimmed, case preserved. `None` when the row had
    /// no usable `seller_id` (the row is kept but unindexed).
    pub seller_id: Option<String>,
    pub name: Option<String>,
    /// Lowercased domain string as found; syntactic validity is judged at
    /// audit time, not here. `None` when absent or hidden as confidential.
    pub domain: Option<String>,
    /// The `seller_type` token exactly as found.
    pub seller_type_raw: String,
    pub seller_type: SellerType,
    pub is_confidential: bool,
}

/// A `(path, message)` note about a malformed piece of the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocDiagnostic {
    pub path: String,
    pub message: String,
}

/// Parsed `sellers.json` document with a seller-ID index over its entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SellersJsonFile {
    pub source_domain: String,
    pub entries: Vec<SellerEntry>,
    pub version: Option<String>,
    pub diagnostics: Vec<DocDiagnostic>,
    /// seller_id -> positions in `entries`; ids listed more than once keep
    /// every position (check 8 needs them).
    pub id_index: BTreeMap<String, Vec<usize>>,
    /// True when the document could not be interpreted at all.
    pub unparseable: bool,
}

impl SellersJsonFile {
    /// All entries whose seller_id equals `seller_id` after trimming.
    /// Comparison is exact and case-sensitive.
    pub fn lookup_seller(&self, seller_id: &str) -> Vec<&SellerEntry> {
        match self.id_index.get(seller_id.trim()) {
            Some(positions) => positions.iter().map(|&i| &self.entries[i]).collect(),
            None => Vec::new(),
        }
    }

    /// Distinct non-confidential entry domains, the universe for snapshot
    /// diffing.
    pub fn visible_domains(&self) -> std::collections::BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| !e.is_confidential)
            .filter_map(|e| e.domain.clone())
            .collect()
    }
}

/// Parse raw `sellers.json` text retrieved from `source_domain`.
pub fn parse_sellers_json(source_domain: &str, text: &str) -> SellersJsonFile {
    let source_domain = domain::normalize_host(source_domain);
    let mut file = SellersJsonFile {
        source_domain,
        entries: Vec::new(),
        version: None,
        diagnostics: Vec::new(),
        id_index: BTreeMap::new(),
        unparseable: false,
    };

    let doc: Value = match serde_json::from_str(text) {
        Ok(value) => value,
        Err(err) => {
            file.unparseable = true;
            file.diagnostics.push(DocDiagnostic {
                path: "$".to_string(),
                message: format!("document unparseable: {err}"),
            });
            return file;
        }
    };

    let Some(obj) = doc.as_object() else {
        file.unparseable = true;
        file.diagnostics.push(DocDiagnostic {
            path: "$".to_string(),
            message: "top-level value is not an object".to_string(),
        });
        return file;
    };

    file.version = obj.get("version").and_then(value_to_string);

    let Some(sellers) = obj.get("sellers") else {
        file.unparseable = true;
        file.diagnostics.push(DocDiagnostic {
            path: "$".to_string(),
            message: "missing sellers array".to_string(),
        });
        return file;
    };
    let Some(items) = sellers.as_array() else {
        file.unparseable = true;
        file.diagnostics.push(DocDiagnostic {
            path: "$.sellers".to_string(),
            message: "sellers is not an array".to_string(),
        });
        return file;
    };

    for (i, item) in items.iter().enumerate() {
        let path = format!("$.sellers[{i}]");
        let Some(entry_obj) = item.as_object() else {
            file.diagnostics.push(DocDiagnostic {
                path,
                message: "seller element is not an object".to_string(),
            });
            continue;
        };

        let seller_id = entry_obj
            .get("seller_id")
            .and_then(value_to_string)
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty());
        if seller_id.is_none() {
            file.diagnostics.push(DocDiagnostic {
                path: path.clone(),
                message: "entry lacks a seller_id; kept but unindexed".to_string(),
            });
        }

        let name = entry_obj.get("name").and_then(value_to_string);

        let raw_domain = entry_obj
            .get("domain")
            .and_then(value_to_string)
            .map(|d| domain::normalize_host(&d))
            .filter(|d| !d.is_empty());
        let domain_says_confidential = raw_domain.as_deref() == Some("confidential");

        let flag_confidential = entry_obj
            .get("is_confidential")
            .map(truthy_flag)
            .unwrap_or(false);
        let is_confidential = flag_confidential || domain_says_confidential;

        let domain = if domain_says_confidential { None } else { raw_domain };

        let seller_type_raw = entry_obj
            .get("seller_type")
            .and_then(value_to_string)
            .unwrap_or_default();
        let seller_type = SellerType::from_token(&seller_type_raw);

        let position = file.entries.len();
        if let Some(id) = &seller_id {
            file.id_index.entry(id.clone()).or_default().push(position);
        }
        file.entries.push(SellerEntry {
            seller_id,
            name,
            domain,
            seller_type_raw,
            seller_type,
            is_confidential,
        });
    }

    file
}

/// Strings pass through; numbers are stringified in canonical decimal form
/// (real files mix number and string encodings for the same ID).
fn value_to_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(i.to_string())
            } else if let Some(u) = n.as_u64() {
                Some(u.to_string())
            } else {
                n.as_f64().map(|f| format!("{f}"))
            }
        }
        _ => None,
    }
}

fn truthy_flag(value: &Value) -> bool {
    match value {
        Value::Bool(b) => *b,
        Value::Number(n) => n.as_f64().map(|f| f != 0.0).unwrap_or(false),
        Value::String(s) => s == "1" || s.eq_ignore_ascii_case("true"),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_entry() {
        let text = r#"{"version":"1.0","sellers":[
            {"seller_id":"1001","seller_type":"PUBLISHER","domain":"news.example","name":"News"}
        ]}"#;
        let file = parse_sellers_json("adx.example", text);
        assert_eq!(file.version.as_deref(), Some("1.0"));
        assert_eq!(file.entries.len(), 1);
        let e = &file.entries[0];
        assert_eq!(e.seller_id.as_deref(), Some("1001"));
        assert_eq!(e.seller_type, SellerType::Publisher);
        assert_eq!(e.domain.as_deref(), Some("news.example"));
        assert!(!e.is_confidential);
    }

    #[test]
    fn reseller_token_is_invalid_type() {
        let text = r#"{"sellers":[{"seller_id":"2","seller_type":"RESELLER"}]}"#;
        let file = parse_sellers_json("adx.example", text);
        assert_eq!(file.entries[0].seller_type, SellerType::Invalid);
        assert_eq!(file.entries[0].seller_type_raw, "RESELLER");
    }

    #[test]
    fn numeric_flag_and_absent_domain() {
        let text = r#"{"sellers":[{"seller_id":7,"is_confidential":1}]}"#;
        let file = parse_sellers_json("adx.example", text);
        let e = &file.entries[0];
        assert_eq!(e.seller_id.as_deref(), Some("7"));
        assert!(e.is_confidential);
        assert_eq!(e.domain, None);
    }

    #[test]
    fn confidential_domain_literal_hides_domain() {
        let text = r#"{"sellers":[{"seller_id":"8","domain":"Confidential"}]}"#;
        let file = parse_sellers_json("adx.example", text);
        assert!(file.entries[0].is_confidential);
        assert_eq!(file.entries[0].domain, None);
    }

    #[test]
    fn duplicate_ids_are_both_indexed() {
        let text = r#"{"sellers":[
            {"seller_id":"42","seller_type":"PUBLISHER","domain":"a.example"},
            {"seller_id":"42","seller_type":"PUBLISHER","domain":"b.example"}
        ]}"#;
        let file = parse_sellers_json("adx.example", text);
        assert_eq!(file.id_index["42"].len(), 2);
        assert_eq!(file.lookup_seller("42").len(), 2);
    }

    #[test]
    fn lookup_misses_return_empty() {
        let text = r#"{"sellers":[{"seller_id":"1001","seller_type":"PUBLISHER"}]}"#;
        let file = parse_sellers_json("adx.example", text);
        assert_eq!(file.lookup_seller("1001").len(), 1);
        assert!(file.lookup_seller("9999").is_empty());
    }

    #[test]
    fn unparseable_document_yields_empty_file_with_diagnostic() {
        let file = parse_sellers_json("adx.example", "<html>403 forbidden</html>");
        assert!(file.unparseable);
        assert!(file.entries.is_empty());
        assert_eq!(file.diagnostics.len(), 1);
    }

    #[test]
    fn missing_sellers_array_is_unparseable() {
        let file = parse_sellers_json("adx.example", r#"{"contact":"x"}"#);
        assert!(file.unparseable);
    }

    #[test]
    fn non_object_elements_become_diagnostics() {
        let text = r#"{"sellers":[42,{"seller_id":"1","seller_type":"BOTH"}]}"#;
        let file = parse_sellers_json("adx.example", text);
        assert_eq!(file.entries.len(), 1);
        assert_eq!(file.diagnostics.len(), 1);
        assert!(file.diagnostics[0].path.contains("[0]"));
    }

    #[test]
    fn entry_without_id_kept_but_unindexed() {
        let text = r#"{"sellers":[{"seller_type":"PUBLISHER","domain":"x.example"}]}"#;
        let file = parse_sellers_json("adx.example", text);
        assert_eq!(file.entries.len(), 1);
        assert!(file.id_index.is_empty());
        assert_eq!(file.diagnostics.len(), 1);
    }

    #[test]
    fn index_covers_exactly_the_identified_entries() {
        let text = r#"{"sellers":[
            {"seller_id":"a1","seller_type":"PUBLISHER"},
            {"seller_type":"PUBLISHER"},
            {"seller_id":"a1","seller_type":"BOTH"},
            {"seller_id":" b2 ","seller_type":"INTERMEDIARY"}
        ]}"#;
        let file = parse_sellers_json("adx.example", text);
        let indexed: usize = file.id_index.values().map(Vec::len).sum();
        let with_id = file.entries.iter().filter(|e| e.seller_id.is_some()).count();
        assert_eq!(indexed, with_id);
        assert_eq!(file.lookup_seller("b2").len(), 1);
    }
}
