//! SupplyChain object (schain) extraction and validation.
//!
//! A bid request may carry a supply chain declaration, either as a JSON
//! `schain` object or in the serialized `ver,complete!asi,sid,hp,...` form.
//! Validation cross-checks the declaration against the disclosure snapshot:
//! check A asks whether the terminal node's seller account really maps to
//! the site the request was observed on; check B asks whether the declared
//! path exists among the publisher's static disclosure paths.

use std::collections::BTreeSet;

use percent_encoding::percent_decode_str;
use serde::Serialize;

use crate::domain;
use crate::pools::{resolve_owner_of, OwnerStatus};
use crate::store::DisclosureSet;

/// One hop of a supply chain. Index 0 is the node closest to the
/// publisher; the last node is the system the request was observed at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScNode {
    /// Advertising system the inventory passed through.
    pub asi: String,
    /// Seller account ID within that system.
    pub sid: String,
    /// Payment-handler flag, when declared.
    pub hp: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupplyChainObject {
    pub complete: bool,
    pub version: Option<String>,
    pub nodes: Vec<ScNode>,
}

/// Outcome of looking for a schain in a payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScoParse {
    /// No schain structure anywhere in the payload.
    Absent,
    /// A schain structure exists but cannot be interpreted.
    Malformed(String),
    Parsed(SupplyChainObject),
}

fn decode_field(field: &str) -> String {
    percent_decode_str(field)
        .decode_utf8()
        .map(|c| c.into_owned())
        .unwrap_or_else(|_| field.to_string())
}

fn flag_from_json(value: &serde_json::Value) -> bool {
    match value {
        serde_json::Value::Bool(b) => *b,
        serde_json::Value::Number(n) => n.as_f64().is_some_and(|f| f != 0.0),
        serde_json::Value::String(s) => s == "1" || s.eq_ignore_ascii_case("true"),
        _ => false,
    }
}

fn string_from_json(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::String(s) => Some(s.trim().to_string()).filter(|s| !s.is_empty()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Depth-first search for the first object under a `schain` key.
fn find_schain(value: &serde_json::Value) -> Option<&serde_json::Value> {
    match value {
        serde_json::Value::Object(map) => {
            if let Some(found) = map.get("schain") {
                return Some(found);
            }
            map.values().find_map(find_schain)
        }
        serde_json::Value::Array(items) => items.iter().find_map(find_schain),
        _ => None,
    }
}

fn sco_from_json(value: &serde_json::Value) -> Result<SupplyChainObject, String> {
    let obj = value.as_object().ok_or("schain is not an object")?;
    let nodes_val = obj.get("nodes").ok_or("schain has no nodes array")?;
    let nodes_arr = nodes_val.as_array().ok_or("schain nodes is not an array")?;

    let mut nodes = Vec::with_capacity(nodes_arr.len());
    for (i, node_val) in nodes_arr.iter().enumerate() {
        let node = node_val
            .as_object()
            .ok_or_else(|| format!("node {i} is not an object"))?;
        let asi = node
            .get("asi")
            .and_then(string_from_json)
            .ok_or_else(|| format!("node {i} lacks asi"))?;
        let sid = node
            .get("sid")
            .and_then(string_from_json)
            .ok_or_else(|| format!("node {i} lacks sid"))?;
        let hp = node
            .get("hp")
            .and_then(serde_json::Value::as_u64)
            .map(|v| (v != 0) as u8);
        nodes.push(ScNode {
            asi: domain::normalize_host(&asi),
            sid,
            hp,
        });
    }

    Ok(SupplyChainObject {
        complete: obj.get("complete").map(flag_from_json).unwrap_or(false),
        version: obj.get("ver").and_then(string_from_json),
        nodes,
    })
}

/// Parse the serialized form: `ver,complete!asi,sid,hp[,rid,name,domain]!…`
/// with percent-encoded fields.
fn sco_from_serialized(text: &str) -> Result<SupplyChainObject, String> {
    let mut segments = text.split('!');
    let header = segments.next().unwrap_or("");
    let mut header_fields = header.split(',');
    let version = header_fields.next().map(str::trim).unwrap_or("");
    let complete = match header_fields.next().map(str::trim) {
        Some("1") => true,
        Some("0") => false,
        other => return Err(format!("bad completeness flag {other:?}")),
    };

    let mut nodes = Vec::new();
    for (i, segment) in segments.enumerate() {
        if segment.is_empty() {
            continue;
        }
        let fields: Vec<&str> = segment.split(',').collect();
        if fields.len() < 2 {
            return Err(format!("node {i} has {} field(s), need asi,sid", fields.len()));
        }
        let asi = decode_field(fields[0].trim());
        let sid = decode_field(fields[1].trim());
        if asi.is_empty() || sid.is_empty() {
            return Err(format!("node {i} has empty asi or sid"));
        }
        let hp = fields
            .get(2)
            .map(|f| f.trim())
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<u8>().map(|v| (v != 0) as u8))
            .transpose()
            .map_err(|e| format!("node {i} has bad hp flag: {e}"))?;
        nodes.push(ScNode {
            asi: domain::normalize_host(&asi),
            sid,
            hp,
        });
    }
    if nodes.is_empty() {
        return Err("serialized schain has no nodes".to_string());
    }

    Ok(SupplyChainObject {
        complete,
        version: Some(version.to_string()).filter(|v| !v.is_empty()),
        nodes,
    })
}

/// The serialized form wrapped in a URL/body parameter: `schain=…` up to
/// the next `&` or whitespace.
fn serialized_param(payload: &str) -> Option<&str> {
    let start = payload.find("schain=")?;
    // Reject hits like "xschain=" but accept "&schain=", "?schain=", start.
    if start > 0 {
        let before = payload.as_bytes()[start - 1];
        if before.is_ascii_alphanumeric() || before == b'_' {
            return None;
        }
    }
    let rest = &payload[start + "schain=".len()..];
    let end = rest.find(['&', ' ', '\t', '\n', '\r', '"']).unwrap_or(rest.len());
    Some(&rest[..end]).filter(|s| !s.is_empty())
}

fn looks_serialized(text: &str) -> bool {
    // `ver,complete!node…` — a comma before the first `!`.
    match text.find('!') {
        Some(bang) => text[..bang].contains(','),
        None => false,
    }
}

/// Find and parse a schain in a payload: a JSON body with a `schain`
/// object anywhere inside it, a `schain=` parameter carrying the
/// serialized form, or a bare serialized string.
pub fn parse_schain(payload: &str) -> ScoParse {
    let trimmed = payload.trim();
    if trimmed.is_empty() {
        return ScoParse::Absent;
    }

    if let Ok(value) = serde_json::from_str::<serde_json::Value>(trimmed) {
        if let Some(found) = find_schain(&value) {
            // Some implementations nest the object one level down under
            // a config wrapper; unwrap exactly one such level.
            let target = match found.get("config") {
                Some(inner) if inner.is_object() => inner,
                _ => found,
            };
            return match sco_from_json(target) {
                Ok(sco) => ScoParse::Parsed(sco),
                Err(e) => ScoParse::Malformed(e),
            };
        }
        // still fall through: a JSON string payload could embed the
        // serialized form, e.g. "\"schain=1.0,1!a,b,1\"".
    }

    if let Some(param) = serialized_param(payload) {
        let decoded = decode_field(param);
        return match sco_from_serialized(&decoded) {
            Ok(sco) => ScoParse::Parsed(sco),
            Err(e) => ScoParse::Malformed(e),
        };
    }

    if looks_serialized(trimmed) {
        return match sco_from_serialized(trimmed) {
            Ok(sco) => ScoParse::Parsed(sco),
            Err(e) => ScoParse::Malformed(e),
        };
    }

    ScoParse::Absent
}

/// Serialize to the `ver,complete!asi,sid,hp` form. Round-trips through
/// [`parse_schain`] on the supported fields.
pub fn serialize_schain(sco: &SupplyChainObject) -> String {
    let mut out = format!(
        "{},{}",
        sco.version.as_deref().unwrap_or(""),
        if sco.complete { 1 } else { 0 }
    );
    for node in &sco.nodes {
        out.push('!');
        out.push_str(&node.asi);
        out.push(',');
        out.push_str(&node.sid);
        if let Some(hp) = node.hp {
            out.push(',');
            out.push_str(&hp.to_string());
        }
    }
    out
}

/// Check A: does the terminal node's (asi, sid) resolve, via asi's
/// sellers.json, to the domain the request was observed on? `None` when
/// the data needed to decide is missing (no usable file, or the entry is
/// confidential / domainless). A sid the exchange does not list at all is
/// a definite `false`: the disclosure is present and contradicts the claim.
pub fn check_a(
    sco: &SupplyChainObject,
    observed_domain: &str,
    disclosures: &DisclosureSet,
) -> Option<bool> {
    let node = sco.nodes.last()?;
    let owner = resolve_owner_of(&node.asi, &node.sid, disclosures);
    match owner.status {
        OwnerStatus::Resolved => {
            let owner_domain = owner.owner_domain.expect("resolved carries domain");
            Some(domain::same_site(&owner_domain, observed_domain))
        }
        OwnerStatus::PubidUnlisted => Some(false),
        OwnerStatus::SellersJsonNotPublic
        | OwnerStatus::OwnerNotListed
        | OwnerStatus::OwnerConfidential => None,
    }
}

/// A (owner, exchange, publisher) disclosure path.
pub type StaticPath = (String, String, String);

/// All 3-hop static paths rooted at a publisher: its ads.txt names
/// (exchange, account); the exchange's sellers.json maps the account to an
/// owner. Only fully resolved chains yield paths.
pub fn static_paths(publisher: &str, disclosures: &DisclosureSet) -> BTreeSet<StaticPath> {
    let mut paths = BTreeSet::new();
    let Some(ads) = disclosures.ads(publisher) else {
        return paths;
    };
    let publisher = domain::registrable(publisher);
    for record in &ads.records {
        let owner = resolve_owner_of(&record.exchange_domain, &record.publisher_id, disclosures);
        if let Some(owner_domain) = owner.owner_domain {
            paths.insert((
                owner_domain,
                domain::registrable(&record.exchange_domain),
                publisher.clone(),
            ));
        }
    }
    paths
}

/// Validation outcome for one payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScoStatus {
    Absent,
    Correct,
    Misrepresented,
    Unverifiable,
}

impl ScoStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoStatus::Absent => "ABSENT",
            ScoStatus::Correct => "CORRECT",
            ScoStatus::Misrepresented => "MISREPRESENTED",
            ScoStatus::Unverifiable => "UNVERIFIABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoVerdict {
    pub status: ScoStatus,
    pub a: Option<bool>,
    pub b: Option<bool>,
    /// (upstream owner, asi, request site) as declared by the terminal node.
    pub dynamic_path: Option<StaticPath>,
    /// Parse or link-check problem, when one arose.
    pub diagnostic: Option<String>,
}

impl ScoVerdict {
    fn bare(status: ScoStatus) -> Self {
        ScoVerdict {
            status,
            a: None,
            b: None,
            dynamic_path: None,
            diagnostic: None,
        }
    }
}

/// Knobs for validation beyond the single-node procedure.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoOptions {
    /// Also require every adjacent (node_i, node_i+1) hand-off to be
    /// confirmed by node_i+1's sellers.json where that data exists. Goes
    /// beyond the single-node corpora the procedure was defined on, so it
    /// is off by default.
    pub check_internal_links: bool,
}

/// Full validation of one payload:
/// ABSENT when no schain is found (malformed counts as absent, with the
/// diagnostic preserved); otherwise A is checked on the terminal node, the
/// dynamic path (owner, asi, observed site) is looked up among the
/// publisher's static paths (check B), and the verdict is CORRECT exactly
/// when both hold. A missing verification basis yields UNVERIFIABLE.
pub fn validate_sco(
    payload: &str,
    observed_domain: &str,
    disclosures: &DisclosureSet,
) -> ScoVerdict {
    validate_sco_with(payload, observed_domain, disclosures, ScoOptions::default())
}

pub fn validate_sco_with(
    payload: &str,
    observed_domain: &str,
    disclosures: &DisclosureSet,
    options: ScoOptions,
) -> ScoVerdict {
    let sco = match parse_schain(payload) {
        ScoParse::Absent => return ScoVerdict::bare(ScoStatus::Absent),
        ScoParse::Malformed(e) => {
            let mut verdict = ScoVerdict::bare(ScoStatus::Absent);
            verdict.diagnostic = Some(format!("malformed schain: {e}"));
            return verdict;
        }
        ScoParse::Parsed(sco) => sco,
    };
    if sco.nodes.is_empty() {
        let mut verdict = ScoVerdict::bare(ScoStatus::Absent);
        verdict.diagnostic = Some("malformed schain: no nodes".to_string());
        return verdict;
    }

    let a = check_a(&sco, observed_domain, disclosures);
    let Some(a_val) = a else {
        return ScoVerdict {
            status: ScoStatus::Unverifiable,
            a: None,
            b: None,
            dynamic_path: None,
            diagnostic: None,
        };
    };

    let terminal = sco.nodes.last().expect("nodes checked non-empty");
    let owner = resolve_owner_of(&terminal.asi, &terminal.sid, disclosures);
    let dynamic_path = owner.owner_domain.map(|owner_domain| {
        (
            owner_domain,
            domain::registrable(&terminal.asi),
            domain::registrable(observed_domain),
        )
    });
    // A decided means either the owner resolved (path exists) or the sid
    // was unlisted (no declared path can exist).
    let b = dynamic_path
        .as_ref()
        .map(|path| static_paths(observed_domain, disclosures).contains(path))
        .unwrap_or(false);

    let mut diagnostic = None;
    let mut links_ok = true;
    if options.check_internal_links {
        for window in sco.nodes.windows(2) {
            let (upstream, downstream) = (&window[0], &window[1]);
            let owner = resolve_owner_of(&downstream.asi, &downstream.sid, disclosures);
            match owner.status {
                OwnerStatus::Resolved => {
                    let domain = owner.owner_domain.expect("resolved carries domain");
                    if !domain::same_site(&domain, &upstream.asi) {
                        links_ok = false;
                        diagnostic = Some(format!(
                            "hand-off {} -> {} not confirmed: {} maps sid {:?} to {}",
                            upstream.asi, downstream.asi, downstream.asi, downstream.sid, domain
                        ));
                    }
                }
                OwnerStatus::PubidUnlisted => {
                    links_ok = false;
                    diagnostic = Some(format!(
                        "hand-off {} -> {}: sid {:?} unknown to {}",
                        upstream.asi, downstream.asi, downstream.sid, downstream.asi
                    ));
                }
                // No data, no judgement.
                _ => {}
            }
        }
    }

    ScoVerdict {
        status: if a_val && b && links_ok {
            ScoStatus::Correct
        } else {
            ScoStatus::Misrepresented
        },
        a: Some(a_val),
        b: Some(b),
        dynamic_path,
        diagnostic,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScoError {
    #[error("no verdicts to summarize")]
    EmptyCorpus,
}

/// Adoption and correctness over a corpus of verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoStats {
    pub total: usize,
    /// Verdicts with any schain present (everything but ABSENT).
    pub present: usize,
    pub correct: usize,
    pub misrepresented: usize,
    pub unverifiable: usize,
    /// present / total.
    pub adoption_ratio: f64,
    /// correct / present; 0 when nothing was present.
    pub correctness_ratio: f64,
    /// True when `present == 0`, i.e. the correctness ratio is vacuous.
    pub correctness_undefined: bool,
}

pub fn sco_stats(verdicts: &[ScoVerdict]) -> Result<ScoStats, ScoError> {
    if verdicts.is_empty() {
        return Err(ScoError::EmptyCorpus);
    }
    let total = verdicts.len();
    let mut correct = 0;
    let mut misrepresented = 0;
    let mut unverifiable = 0;
    for verdict in verdicts {
        match verdict.status {
            ScoStatus::Correct => correct += 1,
            ScoStatus::Misrepresented => misrepresented += 1,
            ScoStatus::Unverifiable => unverifiable += 1,
            ScoStatus::Absent => {}
        }
    }
    let present = correct + misrepresented + unverifiable;
    Ok(ScoStats {
        total,
        present,
        correct,
        misrepresented,
        unverifiable,
        adoption_ratio: present as f64 / total as f64,
        correctness_ratio: if present == 0 {
            0.0
        } else {
            correct as f64 / present as f64
        },
        correctness_undefined: present == 0,
    })
}

/// Verdicts as JSON lines.
pub fn verdicts_jsonl(verdicts: &[ScoVerdict]) -> String {
    let mut out = String::new();
    for verdict in verdicts {
        out.push_str(&serde_json::to_string(verdict).expect("verdict serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adstxt::parse_ads_txt;
    use crate::sellersjson::parse_sellers_json;

    fn one_node(asi: &str, sid: &str) -> SupplyChainObject {
        SupplyChainObject {
            complete: true,
            version: Some("1.0".to_string()),
            nodes: vec![ScNode {
                asi: asi.to_string(),
                sid: sid.to_string(),
                hp: Some(1),
            }],
        }
    }

    /// pub.example lists S1 at ssp.example; ssp.example maps S1 back to
    /// pub.example — the fully consistent single-hop world.
    fn consistent_world() -> DisclosureSet {
        let mut set = DisclosureSet::new();
        set.insert_ads(parse_ads_txt("pub.example", "ssp.example, S1, DIRECT\n"));
        set.insert_sellers(parse_sellers_json(
            "ssp.example",
            r#"{"sellers":[{"seller_id":"S1","seller_type":"PUBLISHER","domain":"pub.example"}]}"#,
        ));
        set
    }

    #[test]
    fn parses_json_schain_wherever_it_nests() {
        let payload = r#"{"id":"req1","source":{"ext":{"schain":{
            "complete":1,"ver":"1.0",
            "nodes":[{"asi":"ssp.example","sid":"S1","hp":1}]
        }}}}"#;
        let ScoParse::Parsed(sco) = parse_schain(payload) else {
            panic!("expected parse");
        };
        assert_eq!(sco, one_node("ssp.example", "S1"));
    }

    #[test]
    fn parses_serialized_form_bare_and_as_parameter() {
        let expected = one_node("ssp.example", "S1");
        let ScoParse::Parsed(bare) = parse_schain("1.0,1!ssp.example,S1,1") else {
            panic!("expected parse");
        };
        assert_eq!(bare, expected);

        let ScoParse::Parsed(param) =
            parse_schain("https://x.example/ad?schain=1.0,1!ssp.example,S1,1&other=2")
        else {
            panic!("expected parse");
        };
        assert_eq!(param, expected);
    }

    #[test]
    fn absent_and_malformed_are_distinguished() {
        assert_eq!(parse_schain(r#"{"id":"req1"}"#), ScoParse::Absent);
        assert_eq!(parse_schain(""), ScoParse::Absent);
        assert_eq!(parse_schain("plain text, nothing here"), ScoParse::Absent);
        assert!(matches!(
            parse_schain(r#"{"schain":{"complete":1}}"#),
            ScoParse::Malformed(_)
        ));
        assert!(matches!(
            parse_schain(r#"{"schain":{"nodes":[{"sid":"S1"}]}}"#),
            ScoParse::Malformed(_)
        ));
        assert!(matches!(parse_schain("schain=1.0,1!,S1"), ScoParse::Malformed(_)));
    }

    #[test]
    fn serialized_round_trip_preserves_supported_fields() {
        let cases = [
            one_node("ssp.example", "S1"),
            SupplyChainObject {
                complete: false,
                version: None,
                nodes: vec![
                    ScNode {
                        asi: "a.example".into(),
                        sid: "x9".into(),
                        hp: None,
                    },
                    ScNode {
                        asi: "b.example".into(),
                        sid: "y8".into(),
                        hp: Some(0),
                    },
                ],
            },
        ];
        for sco in cases {
            let text = serialize_schain(&sco);
            let ScoParse::Parsed(back) = parse_schain(&text) else {
                panic!("round trip failed to parse {text:?}");
            };
            assert_eq!(back, sco);
        }
    }

    #[test]
    fn multi_node_json_preserves_order() {
        let payload = r#"{"schain":{"complete":1,"ver":"1.0","nodes":[
            {"asi":"first.example","sid":"1111111"},
            {"asi":"second.example","sid":"2222222"}
        ]}}"#;
        let ScoParse::Parsed(sco) = parse_schain(payload) else {
            panic!()
        };
        assert_eq!(sco.nodes[0].asi, "first.example");
        assert_eq!(sco.nodes[1].asi, "second.example");
    }

    #[test]
    fn check_a_compares_disclosed_owner_to_observed_site() {
        let set = consistent_world();
        let sco = one_node("ssp.example", "S1");
        assert_eq!(check_a(&sco, "pub.example", &set), Some(true));
        assert_eq!(check_a(&sco, "www.pub.example", &set), Some(true));
        assert_eq!(check_a(&sco, "other.example", &set), Some(false));
        // Unknown sid: the file exists and denies the claim.
        assert_eq!(check_a(&one_node("ssp.example", "ghost"), "pub.example", &set), Some(false));
        // Missing sellers.json: no basis to decide.
        assert_eq!(check_a(&one_node("nofile.example", "S1"), "pub.example", &set), None);
    }

    #[test]
    fn static_paths_walk_ads_then_sellers() {
        let mut set = consistent_world();
        assert_eq!(
            static_paths("pub.example", &set),
            BTreeSet::from([(
                "pub.example".to_string(),
                "ssp.example".to_string(),
                "pub.example".to_string()
            )])
        );

        // Second exchange resolving adds a second path.
        set.insert_ads(parse_ads_txt(
            "pub.example",
            "ssp.example, S1, DIRECT\nother.example, S9, RESELLER\n",
        ));
        set.insert_sellers(parse_sellers_json(
            "other.example",
            r#"{"sellers":[{"seller_id":"S9","seller_type":"INTERMEDIARY","domain":"mid.example"}]}"#,
        ));
        assert_eq!(static_paths("pub.example", &set).len(), 2);

        assert!(static_paths("nobody.example", &set).is_empty());
    }

    #[test]
    fn consistent_world_validates_correct() {
        let set = consistent_world();
        let verdict = validate_sco("1.0,1!ssp.example,S1,1", "pub.example", &set);
        assert_eq!(verdict.status, ScoStatus::Correct);
        assert_eq!((verdict.a, verdict.b), (Some(true), Some(true)));
        assert_eq!(
            verdict.dynamic_path,
            Some((
                "pub.example".to_string(),
                "ssp.example".to_string(),
                "pub.example".to_string()
            ))
        );
    }

    #[test]
    fn verdicts_depend_on_both_checks() {
        let set = consistent_world();

        // A true, B false: the exchange vouches for the site, but the
        // site's own ads.txt never named this exchange/account.
        let mut no_ads = DisclosureSet::new();
        no_ads.insert_sellers(parse_sellers_json(
            "ssp.example",
            r#"{"sellers":[{"seller_id":"S1","seller_type":"PUBLISHER","domain":"pub.example"}]}"#,
        ));
        let verdict = validate_sco("1.0,1!ssp.example,S1,1", "pub.example", &no_ads);
        assert_eq!(verdict.status, ScoStatus::Misrepresented);
        assert_eq!((verdict.a, verdict.b), (Some(true), Some(false)));

        // A false: schain claims an account that belongs to someone else.
        let mut foreign = consistent_world();
        foreign.insert_sellers(parse_sellers_json(
            "ssp.example",
            r#"{"sellers":[{"seller_id":"S1","seller_type":"PUBLISHER","domain":"someoneelse.example"}]}"#,
        ));
        let verdict = validate_sco("1.0,1!ssp.example,S1,1", "pub.example", &foreign);
        assert_eq!(verdict.status, ScoStatus::Misrepresented);
        assert_eq!(verdict.a, Some(false));

        // No schain at all.
        let verdict = validate_sco(r#"{"id":"x"}"#, "pub.example", &set);
        assert_eq!(verdict.status, ScoStatus::Absent);

        // Exchange data missing entirely.
        let verdict = validate_sco("1.0,1!gone.example,S1,1", "pub.example", &set);
        assert_eq!(verdict.status, ScoStatus::Unverifiable);
        assert_eq!(verdict.a, None);
    }

    #[test]
    fn correct_iff_a_and_b() {
        let set = consistent_world();
        for payload in [
            "1.0,1!ssp.example,S1,1",
            "1.0,1!ssp.example,ghost,1",
            "1.0,1!gone.example,S1,1",
            "no schain here",
        ] {
            let verdict = validate_sco(payload, "pub.example", &set);
            assert_eq!(
                verdict.status == ScoStatus::Correct,
                verdict.a == Some(true) && verdict.b == Some(true),
            );
        }
    }

    #[test]
    fn internal_link_check_is_opt_in() {
        // Chain pub -> mid.example (S1 at ssp? no: node0 mid, node1 ssp).
        // ssp.example maps M7 to mid.example (the hand-off holds), and
        // the terminal node's account maps to pub.example via... the
        // terminal here is ssp.example/S1 owned by pub.example.
        let mut set = consistent_world();
        set.insert_sellers(parse_sellers_json(
            "ssp.example",
            r#"{"sellers":[
                {"seller_id":"S1","seller_type":"PUBLISHER","domain":"pub.example"},
                {"seller_id":"M7","seller_type":"INTERMEDIARY","domain":"mid.example"}
            ]}"#,
        ));
        // Two-node chain: inventory went mid.example (sid X) then
        // ssp.example (sid S1). Terminal checks still pass; the hand-off
        // mid -> ssp must be confirmed by ssp's entry for its own sid.
        let payload = "1.0,1!mid.example,X123456,1!ssp.example,S1,1";

        // Off by default: hand-off ignored, terminal checks decide.
        let verdict = validate_sco(payload, "pub.example", &set);
        assert_eq!(verdict.status, ScoStatus::Correct);

        // On: ssp maps S1 to pub.example, not to mid.example -> broken link.
        let verdict = validate_sco_with(
            payload,
            "pub.example",
            &set,
            ScoOptions {
                check_internal_links: true,
            },
        );
        assert_eq!(verdict.status, ScoStatus::Misrepresented);
        assert!(verdict.diagnostic.unwrap().contains("hand-off"));

        // A chain whose hand-off is confirmed stays correct.
        let payload = "1.0,1!mid.example,X123456,1!ssp.example,M7,1";
        let mut set2 = DisclosureSet::new();
        set2.insert_ads(parse_ads_txt("mid-owned.example", "ssp.example, M7, DIRECT\n"));
        set2.insert_sellers(parse_sellers_json(
            "ssp.example",
            r#"{"sellers":[{"seller_id":"M7","seller_type":"INTERMEDIARY","domain":"mid-owned.example"}]}"#,
        ));
        let verdict = validate_sco_with(
            payload,
            "mid-owned.example",
            &set2,
            ScoOptions {
                check_internal_links: true,
            },
        );
        // Terminal A: ssp maps M7 -> mid-owned.example == observed: true.
        // B: static path (mid-owned, ssp, mid-owned) exists. Hand-off:
        // ssp maps M7 to mid-owned.example but upstream asi is
        // mid.example -> broken.
        assert_eq!(verdict.status, ScoStatus::Misrepresented);
    }

    #[test]
    fn stats_ratios_and_empty_corpus() {
        let set = consistent_world();
        let mut verdicts = Vec::new();
        for _ in 0..8 {
            verdicts.push(validate_sco("nothing", "pub.example", &set));
        }
        verdicts.push(validate_sco("1.0,1!ssp.example,S1,1", "pub.example", &set));
        verdicts.push(validate_sco("1.0,1!ssp.example,ghost,1", "pub.example", &set));

        let stats = sco_stats(&verdicts).unwrap();
        assert_eq!(stats.total, 10);
        assert_eq!(stats.present, 2);
        assert_eq!(stats.correct, 1);
        assert!((stats.adoption_ratio - 0.2).abs() < 1e-12);
        assert!((stats.correctness_ratio - 0.5).abs() < 1e-12);
        assert!(!stats.correctness_undefined);

        let all_absent = vec![ScoVerdict::bare(ScoStatus::Absent); 3];
        let stats = sco_stats(&all_absent).unwrap();
        assert_eq!(stats.adoption_ratio, 0.0);
        assert!(stats.correctness_undefined);

        assert!(matches!(sco_stats(&[]), Err(ScoError::EmptyCorpus)));
    }

    #[test]
    fn removing_the_ads_record_flips_correct_to_misrepresented() {
        let set = consistent_world();
        let payload = "1.0,1!ssp.example,S1,1";
        assert_eq!(validate_sco(payload, "pub.example", &set).status, ScoStatus::Correct);

        let mut without = DisclosureSet::new();
        without.insert_ads(parse_ads_txt("pub.example", "")); // record removed
        without.insert_sellers(parse_sellers_json(
            "ssp.example",
            r#"{"sellers":[{"seller_id":"S1","seller_type":"PUBLISHER","domain":"pub.example"}]}"#,
        ));
        assert_eq!(
            validate_sco(payload, "pub.example", &without).status,
            ScoStatus::Misrepresented
        );
    }
}
