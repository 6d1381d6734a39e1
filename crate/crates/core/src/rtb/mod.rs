//! Mining RTB evidence out of recorded browser traffic.
//!
//! HAR captures are filtered down to ad-related flows, scanned for
//! `key=value` pairs, and the values matched against the universe of
//! publisher/seller IDs known from the disclosure snapshot. Every hit is
//! then resolved to a (publisher, exchange, owner) evidence triple.

pub mod filters;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use percent_encoding::percent_decode_str;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain;
use crate::pools::{resolve_owner_of, OwnerStatus};
use crate::store::DisclosureSet;

pub use filters::{classify_ad_flow, FilterRuleSet};

/// Minimum ID length for matching: shorter values collide with ordinary
/// parameters far too often to count as evidence.
pub const MIN_ID_LEN: usize = 6;

/// One request/response exchange lifted out of a HAR entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub url: String,
    pub post_body: Option<String>,
    pub response_body: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarError {
    #[error("not a HAR archive: {0}")]
    BadJson(String),
}

// Minimal HAR 1.2 shape; everything else in the archive is ignored.
#[derive(Deserialize)]
struct Har {
    log: HarLog,
}

#[derive(Deserialize)]
struct HarLog {
    #[serde(default)]
    entries: Vec<HarEntry>,
}

#[derive(Deserialize)]
struct HarEntry {
    request: HarRequest,
    response: Option<HarResponse>,
}

#[derive(Deserialize)]
struct HarRequest {
    url: String,
    #[serde(rename = "postData")]
    post_data: Option<HarPostData>,
}

#[derive(Deserialize)]
struct HarPostData {
    text: Option<String>,
}

#[derive(Deserialize)]
struct HarResponse {
    content: Option<HarContent>,
}

#[derive(Deserialize)]
struct HarContent {
    text: Option<String>,
}

/// Parse a HAR 1.2 archive into flows. Entries missing optional pieces
/// (no post data, no response text) are kept with those fields empty.
pub fn parse_har(text: &str) -> Result<Vec<Flow>, HarError> {
    let har: Har = serde_json::from_str(text).map_err(|e| HarError::BadJson(e.to_string()))?;
    Ok(har
        .log
        .entries
        .into_iter()
        .map(|entry| Flow {
            url: entry.request.url,
            post_body: entry.request.post_data.and_then(|p| p.text),
            response_body: entry
                .response
                .and_then(|r| r.content)
                .and_then(|c| c.text),
        })
        .collect())
}

fn kv_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // key: a run of token characters; value: quoted, or a run ending at
    // `&`, whitespace, quote, or end of input.
    RE.get_or_init(|| Regex::new(r#"([A-Za-z0-9_.-]+)=(?:"([^"]*)"|([^&\s"]+))"#).unwrap())
}

fn scan_kv(text: &str, out: &mut Vec<(String, String)>, seen: &mut BTreeSet<(String, String)>) {
    for cap in kv_regex().captures_iter(text) {
        let key = cap[1].to_string();
        let value = cap
            .get(2)
            .or_else(|| cap.get(3))
            .map(|m| m.as_str().to_string())
            .unwrap_or_default();
        if value.is_empty() {
            continue;
        }
        if seen.insert((key.clone(), value.clone())) {
            out.push((key, value));
        }
    }
}

fn decode_once(text: &str) -> String {
    // `+` means space in form encoding; decode percent escapes exactly once.
    let plus_mapped = text.replace('+', " ");
    percent_decode_str(&plus_mapped)
        .decode_utf8()
        .map(|c| c.into_owned())
        .unwrap_or(plus_mapped)
}

/// Pull `key=value` and `key="value"` pairs out of a flow: the URL query
/// and the form body are percent-decoded once first; the response body is
/// scanned raw. Pairs are deduplicated in first-seen order.
pub fn extract_kv(flow: &Flow) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();

    if let Some(query_start) = flow.url.find('?') {
        let query = &flow.url[query_start + 1..];
        let query = query.split('#').next().unwrap_or("");
        scan_kv(&decode_once(query), &mut out, &mut seen);
    }
    if let Some(body) = &flow.post_body {
        scan_kv(&decode_once(body), &mut out, &mut seen);
    }
    if let Some(body) = &flow.response_body {
        scan_kv(body, &mut out, &mut seen);
    }
    out
}

/// Index of every publisher/seller ID known to the snapshot: value → the
/// exchanges that issued it. IDs shorter than [`MIN_ID_LEN`] are never
/// admissible evidence, so they are not indexed.
#[derive(Debug, Default)]
pub struct IdIndex {
    map: HashMap<String, BTreeSet<String>>,
}

impl IdIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, exchange: &str, id: &str) {
        if id.len() < MIN_ID_LEN {
            return;
        }
        self.map
            .entry(id.to_string())
            .or_default()
            .insert(domain::registrable(exchange));
    }

    /// Build from a snapshot: each sellers.json contributes its seller IDs
    /// under the publishing exchange; each ads.txt record contributes its
    /// publisher ID under the exchange it names.
    pub fn from_disclosures(set: &DisclosureSet) -> IdIndex {
        let mut index = IdIndex::new();
        for sellers in set.usable_sellers_files() {
            for entry in &sellers.entries {
                if let Some(id) = &entry.seller_id {
                    index.add(&sellers.source_domain, id);
                }
            }
        }
        for ads in set.ads_files() {
            for record in &ads.records {
                index.add(&record.exchange_domain, &record.publisher_id);
            }
        }
        index
    }

    pub fn issuers(&self, value: &str) -> Option<&BTreeSet<String>> {
        self.map.get(value)
    }

    /// Number of distinct indexed IDs.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// A parameter value that equals a known publisher/seller ID.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IdHit {
    /// Site the capture was recorded on.
    pub page_domain: String,
    pub flow_url: String,
    pub key: String,
    pub value: String,
    pub issuing_exchange: String,
    pub matched_id: String,
}

/// Match extracted pairs against the ID index. A value must be at least
/// [`MIN_ID_LEN`] characters and an exact string match; one value known to
/// several exchanges yields one hit per exchange.
pub fn match_ids(
    flow_url: &str,
    kvs: &[(String, String)],
    page_domain: &str,
    index: &IdIndex,
) -> Vec<IdHit> {
    let page = domain::registrable(page_domain);
    let mut hits = Vec::new();
    for (key, value) in kvs {
        if value.len() < MIN_ID_LEN {
            continue;
        }
        if let Some(issuers) = index.issuers(value) {
            for exchange in issuers {
                hits.push(IdHit {
                    page_domain: page.clone(),
                    flow_url: flow_url.to_string(),
                    key: key.clone(),
                    value: value.clone(),
                    issuing_exchange: exchange.clone(),
                    matched_id: value.clone(),
                });
            }
        }
    }
    hits
}

/// Run the whole per-capture pipeline: keep ad-classified flows, extract
/// pairs, match IDs.
pub fn mine_flows(
    page_domain: &str,
    flows: &[Flow],
    rules: &FilterRuleSet,
    index: &IdIndex,
) -> Vec<IdHit> {
    let mut hits = Vec::new();
    for flow in flows {
        if !classify_ad_flow(&flow.url, rules) {
            continue;
        }
        let kvs = extract_kv(flow);
        hits.extend(match_ids(&flow.url, &kvs, page_domain, index));
    }
    hits
}

/// (publisher, exchange, owner) evidence derived from traffic. The owner
/// slot carries either a domain or an `UNRESOLVED:` marker naming why
/// resolution failed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Triple {
    pub publisher_domain: String,
    pub exchange_domain: String,
    pub owner_domain: String,
}

fn owner_marker(status: OwnerStatus) -> &'static str {
    match status {
        OwnerStatus::Resolved => unreachable!("resolved owners carry a domain"),
        OwnerStatus::PubidUnlisted => "UNRESOLVED:pubid_unlisted",
        OwnerStatus::SellersJsonNotPublic => "UNRESOLVED:sellers_json_not_public",
        OwnerStatus::OwnerNotListed => "UNRESOLVED:owner_not_listed",
        OwnerStatus::OwnerConfidential => "UNRESOLVED:confidential",
    }
}

/// Resolve each hit's matched ID to its disclosed owner and emit the
/// deduplicated, sorted set of evidence triples.
pub fn derive_triples(hits: &[IdHit], disclosures: &DisclosureSet) -> Vec<Triple> {
    let mut triples = BTreeSet::new();
    for hit in hits {
        let owner = resolve_owner_of(&hit.issuing_exchange, &hit.matched_id, disclosures);
        let owner_domain = match owner.owner_domain {
            Some(domain) => domain,
            None => owner_marker(owner.status).to_string(),
        };
        triples.insert(Triple {
            publisher_domain: domain::registrable(&hit.page_domain),
            exchange_domain: domain::registrable(&hit.issuing_exchange),
            owner_domain,
        });
    }
    triples.into_iter().collect()
}

/// Hits as JSON lines.
pub fn hits_jsonl(hits: &[IdHit]) -> String {
    let mut out = String::new();
    for hit in hits {
        out.push_str(&serde_json::to_string(hit).expect("hit serializes"));
        out.push('\n');
    }
    out
}

/// Triples as JSON lines.
pub fn triples_jsonl(triples: &[Triple]) -> String {
    let mut out = String::new();
    for triple in triples {
        out.push_str(&serde_json::to_string(triple).expect("triple serializes"));
        out.push('\n');
    }
    out
}

/// Count triples per (exchange, owner) for reporting.
pub fn triples_by_exchange(triples: &[Triple]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for triple in triples {
        *counts.entry(triple.exchange_domain.clone()).or_insert(0) += 1;
    }
    counts
}
