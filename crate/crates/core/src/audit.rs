//! Cross-validation of ads.txt claims against sellers.json disclosures.
//!
//! Eight problematic-representation checks plus an explicit UNVERIFIABLE
//! marker for claims whose counterpart file is missing or unusable, so
//! gaps in the record never silently pass as clean.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::adstxt::{AdsTxtFile, Relationship};
use crate::domain;
use crate::sellersjson::{SellerType, SellersJsonFile};
use crate::store::DisclosureSet;

/// The problematic representations an audit can surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingKind {
    /// ads.txt claims DIRECT but the exchange types the account as an
    /// intermediary.
    MisrepresentedDirect,
    /// ads.txt names a publisher ID the exchange does not list at all.
    FabricatedId,
    /// One (exchange, publisher ID) pair claims both DIRECT and RESELLER
    /// while the exchange's entries support only one of them.
    ConflictingRelationships,
    /// seller_type outside PUBLISHER / INTERMEDIARY / BOTH.
    InvalidSellerType,
    /// A disclosed seller domain that is not a plausible hostname.
    InvalidDomain,
    /// Entry withheld under the confidential flag; nothing to verify
    /// against, flagged informationally.
    ConfidentialSeller,
    /// An intermediary whose own sellers.json is absent or unusable.
    IntermediaryWithoutSellersJson,
    /// One seller ID mapped to two or more distinct seller domains.
    NonUniqueId,
    /// The counterpart sellers.json is missing/unusable, so the ads.txt
    /// claim cannot be checked either way.
    Unverifiable,
}

impl FindingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FindingKind::MisrepresentedDirect => "MISREPRESENTED_DIRECT",
            FindingKind::FabricatedId => "FABRICATED_ID",
            FindingKind::ConflictingRelationships => "CONFLICTING_RELATIONSHIPS",
            FindingKind::InvalidSellerType => "INVALID_SELLER_TYPE",
            FindingKind::InvalidDomain => "INVALID_DOMAIN",
            FindingKind::ConfidentialSeller => "CONFIDENTIAL_SELLER",
            FindingKind::IntermediaryWithoutSellersJson => "INTERMEDIARY_WITHOUT_SELLERS_JSON",
            FindingKind::NonUniqueId => "NON_UNIQUE_ID",
            FindingKind::Unverifiable => "UNVERIFIABLE",
        }
    }

    /// Confidentiality is permitted by the format; surfacing it is
    /// bookkeeping, not an accusation.
    pub fn is_informational(&self) -> bool {
        matches!(self, FindingKind::ConfidentialSeller)
    }

    pub const ALL: [FindingKind; 9] = [
        FindingKind::MisrepresentedDirect,
        FindingKind::FabricatedId,
        FindingKind::ConflictingRelationships,
        FindingKind::InvalidSellerType,
        FindingKind::InvalidDomain,
        FindingKind::ConfidentialSeller,
        FindingKind::IntermediaryWithoutSellersJson,
        FindingKind::NonUniqueId,
        FindingKind::Unverifiable,
    ];
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pointer back into a source file so a finding can be re-located.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvidenceRef {
    /// `<domain>/<file>` the evidence lives in.
    pub file: String,
    /// 1-based line for ads.txt evidence.
    pub line: Option<u32>,
    /// 0-based seller index for sellers.json evidence.
    pub entry: Option<usize>,
}

impl EvidenceRef {
    pub fn ads_line(publisher: &str, line: u32) -> Self {
        EvidenceRef {
            file: format!("{publisher}/ads.txt"),
            line: Some(line),
            entry: None,
        }
    }

    pub fn seller_entry(exchange: &str, entry: usize) -> Self {
        EvidenceRef {
            file: format!("{exchange}/sellers.json"),
            line: None,
            entry: Some(entry),
        }
    }

    pub fn whole_file(domain: &str, file: &str) -> Self {
        EvidenceRef {
            file: format!("{domain}/{file}"),
            line: None,
            entry: None,
        }
    }
}

/// One problematic representation, with both sides of the contradiction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    /// Publisher or exchange the finding is about.
    pub subject_domain: String,
    pub exchange_domain: Option<String>,
    pub publisher_id: Option<String>,
    pub note: String,
    pub evidence: Vec<EvidenceRef>,
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("cohort {0:?} has zero subjects")]
    EmptyCohort(String),
}

/// Check one publisher's ads.txt records against the snapshot of exchange
/// sellers.json files. Every record gets exactly one of: a pass, an
/// UNVERIFIABLE marker, or a substantive finding; (exchange, id) pairs are
/// additionally checked for contradictory relationship claims.
pub fn audit_publisher(ads: &AdsTxtFile, disclosures: &DisclosureSet) -> Vec<Finding> {
    let mut findings = Vec::new();
    let publisher = domain::registrable(&ads.source_domain);

    for record in &ads.records {
        let Some(sellers) = disclosures.sellers_outcome(&record.exchange_domain).usable() else {
            findings.push(Finding {
                kind: FindingKind::Unverifiable,
                subject_domain: publisher.clone(),
                exchange_domain: Some(record.exchange_domain.clone()),
                publisher_id: Some(record.publisher_id.clone()),
                note: format!(
                    "cannot verify {} claim: no usable sellers.json for {}",
                    record.relationship, record.exchange_domain
                ),
                evidence: vec![EvidenceRef::ads_line(&publisher, record.line_no)],
            });
            continue;
        };

        let matches = sellers.lookup_seller(&record.publisher_id);
        if matches.is_empty() {
            findings.push(Finding {
                kind: FindingKind::FabricatedId,
                subject_domain: publisher.clone(),
                exchange_domain: Some(record.exchange_domain.clone()),
                publisher_id: Some(record.publisher_id.clone()),
                note: format!(
                    "id {:?} does not appear in {}'s sellers.json",
                    record.publisher_id, record.exchange_domain
                ),
                evidence: vec![
                    EvidenceRef::ads_line(&publisher, record.line_no),
                    EvidenceRef::whole_file(&record.exchange_domain, "sellers.json"),
                ],
            });
            continue;
        }

        if record.relationship == Relationship::Direct
            && matches
                .iter()
                .all(|e| e.seller_type == SellerType::Intermediary)
        {
            let mut evidence = vec![EvidenceRef::ads_line(&publisher, record.line_no)];
            evidence.extend(entry_refs(sellers, &record.publisher_id));
            findings.push(Finding {
                kind: FindingKind::MisrepresentedDirect,
                subject_domain: publisher.clone(),
                exchange_domain: Some(record.exchange_domain.clone()),
                publisher_id: Some(record.publisher_id.clone()),
                note: format!(
                    "DIRECT claim but {} types id {:?} as INTERMEDIARY",
                    record.exchange_domain, record.publisher_id
                ),
                evidence,
            });
        }
    }

    // Contradictory relationship claims, one finding per (exchange, id).
    for ((exchange, id), records) in ads.relationship_pairs() {
        let has_direct = records.iter().any(|r| r.relationship == Relationship::Direct);
        let has_reseller = records
            .iter()
            .any(|r| r.relationship == Relationship::Reseller);
        if !(has_direct && has_reseller) {
            continue;
        }
        let Some(sellers) = disclosures.sellers_outcome(&exchange).usable() else {
            continue; // already marked UNVERIFIABLE above
        };
        let matches = sellers.lookup_seller(&id);
        if matches.is_empty() {
            continue; // already FABRICATED_ID
        }
        let types: BTreeSet<SellerType> = matches.iter().map(|e| e.seller_type).collect();
        // A single BOTH-typed entry (or a mix of entries) can legitimately
        // back both claims; a lone one-sided type cannot.
        if types.len() == 1 && !types.contains(&SellerType::Both) {
            let mut evidence: Vec<EvidenceRef> = records
                .iter()
                .map(|r| EvidenceRef::ads_line(&publisher, r.line_no))
                .collect();
            evidence.extend(entry_refs(sellers, &id));
            findings.push(Finding {
                kind: FindingKind::ConflictingRelationships,
                subject_domain: publisher.clone(),
                exchange_domain: Some(exchange.clone()),
                publisher_id: Some(id.clone()),
                note: format!(
                    "both DIRECT and RESELLER claimed while {exchange} types id {id:?} only as {:?}",
                    types.iter().next().unwrap()
                ),
                evidence,
            });
        }
    }

    findings
}

fn entry_refs(sellers: &SellersJsonFile, seller_id: &str) -> Vec<EvidenceRef> {
    sellers
        .id_index
        .get(seller_id.trim())
        .into_iter()
        .flatten()
        .map(|&i| EvidenceRef::seller_entry(&sellers.source_domain, i))
        .collect()
}

/// Check one exchange's sellers.json for internally detectable problems
/// and for intermediaries that lack their own disclosure in the snapshot.
pub fn audit_exchange(sellers: &SellersJsonFile, disclosures: &DisclosureSet) -> Vec<Finding> {
    let mut findings = Vec::new();
    let exchange = domain::registrable(&sellers.source_domain);

    for (i, entry) in sellers.entries.iter().enumerate() {
        let base = |kind: FindingKind, note: String| Finding {
            kind,
            subject_domain: exchange.clone(),
            exchange_domain: Some(exchange.clone()),
            publisher_id: entry.seller_id.clone(),
            note,
            evidence: vec![EvidenceRef::seller_entry(&exchange, i)],
        };

        if entry.seller_type == SellerType::Invalid {
            findings.push(base(
                FindingKind::InvalidSellerType,
                format!("seller_type {:?} is not an acceptable type", entry.seller_type_raw),
            ));
        }

        if entry.is_confidential {
            findings.push(base(
                FindingKind::ConfidentialSeller,
                "entry is confidential; identity withheld".to_string(),
            ));
        }

        match &entry.domain {
            Some(d) if !domain::is_valid_hostname(d) => {
                findings.push(base(
                    FindingKind::InvalidDomain,
                    format!("{d:?} is not a valid domain name"),
                ));
            }
            Some(d)
                if entry.seller_type.resells()
                    && !disclosures.sellers_outcome(d).is_usable() =>
            {
                let mut finding = base(
                    FindingKind::IntermediaryWithoutSellersJson,
                    format!("intermediary {d} has no usable sellers.json"),
                );
                finding.evidence.push(EvidenceRef::whole_file(d, "sellers.json"));
                findings.push(finding);
            }
            _ => {}
        }
    }

    // One seller ID naming several different seller domains.
    for (id, indices) in &sellers.id_index {
        let mut domains: BTreeSet<String> = BTreeSet::new();
        for &i in indices {
            if let Some(d) = &sellers.entries[i].domain {
                domains.insert(domain::registrable(d));
            }
        }
        if domains.len() >= 2 {
            findings.push(Finding {
                kind: FindingKind::NonUniqueId,
                subject_domain: exchange.clone(),
                exchange_domain: Some(exchange.clone()),
                publisher_id: Some(id.clone()),
                note: format!(
                    "id {id:?} maps to {} distinct domains: {}",
                    domains.len(),
                    domains.iter().cloned().collect::<Vec<_>>().join(", ")
                ),
                evidence: indices
                    .iter()
                    .map(|&i| EvidenceRef::seller_entry(&exchange, i))
                    .collect(),
            });
        }
    }

    findings
}

/// Audit every publisher and every usable exchange file in a snapshot.
/// Output order is deterministic: publishers in key order, then exchanges.
pub fn audit_corpus(disclosures: &DisclosureSet) -> Vec<Finding> {
    let mut findings = Vec::new();
    for ads in disclosures.ads_files() {
        findings.extend(audit_publisher(ads, disclosures));
    }
    for sellers in disclosures.usable_sellers_files() {
        findings.extend(audit_exchange(sellers, disclosures));
    }
    findings
}

/// A labeled set of audit subjects, e.g. a control cohort of news sites.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub name: String,
    /// Registrable domains of the subjects (publishers or exchanges).
    pub subjects: BTreeSet<String>,
    /// Total records/entries across the cohort, for per-entry rates.
    pub total_entries: usize,
}

impl Cohort {
    pub fn new(name: &str, subjects: impl IntoIterator<Item = String>, total_entries: usize) -> Self {
        Cohort {
            name: name.to_string(),
            subjects: subjects.into_iter().map(|s| domain::registrable(&s)).collect(),
            total_entries,
        }
    }
}

/// One kind × cohort cell of the prevalence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceCell {
    pub kind: FindingKind,
    pub cohort: String,
    pub subjects_total: usize,
    /// Subjects with at least one finding of this kind.
    pub subjects_affected: usize,
    pub subject_fraction: f64,
    pub finding_count: usize,
    /// Findings per record/entry; 0 when the cohort declares no entries.
    pub entry_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceReport {
    pub cells: Vec<PrevalenceCell>,
}

/// Fraction of subjects (and of entries) affected, per finding kind and
/// cohort. Cells come out in kind-major, cohort-minor order, zero-filled.
pub fn prevalence_table(
    findings: &[Finding],
    cohorts: &[Cohort],
) -> Result<PrevalenceReport, AuditError> {
    for cohort in cohorts {
        if cohort.subjects.is_empty() {
            return Err(AuditError::EmptyCohort(cohort.name.clone()));
        }
    }

    // (kind, cohort index) -> affected subject set & finding count.
    let mut affected: BTreeMap<(FindingKind, usize), BTreeSet<&str>> = BTreeMap::new();
    let mut counts: BTreeMap<(FindingKind, usize), usize> = BTreeMap::new();
    for finding in findings {
        let subject = domain::registrable(&finding.subject_domain);
        for (ci, cohort) in cohorts.iter().enumerate() {
            if cohort.subjects.contains(&subject) {
                affected
                    .entry((finding.kind, ci))
                    .or_default()
                    .insert(cohort.subjects.get(&subject).unwrap().as_str());
                *counts.entry((finding.kind, ci)).or_insert(0) += 1;
            }
        }
    }

    let mut cells = Vec::with_capacity(FindingKind::ALL.len() * cohorts.len());
    for kind in FindingKind::ALL {
        for (ci, cohort) in cohorts.iter().enumerate() {
            let subjects_affected = affected.get(&(kind, ci)).map_or(0, BTreeSet::len);
            let finding_count = counts.get(&(kind, ci)).copied().unwrap_or(0);
            cells.push(PrevalenceCell {
                kind,
                cohort: cohort.name.clone(),
                subjects_total: cohort.subjects.len(),
                subjects_affected,
                subject_fraction: subjects_affected as f64 / cohort.subjects.len() as f64,
                finding_count,
                entry_fraction: if cohort.total_entries == 0 {
                    0.0
                } else {
                    finding_count as f64 / cohort.total_entries as f64
                },
            });
        }
    }
    Ok(PrevalenceReport { cells })
}

/// Findings as JSON lines, one object per finding.
pub fn findings_jsonl(findings: &[Finding]) -> String {
    let mut out = String::new();
    for finding in findings {
        out.push_str(&serde_json::to_string(finding).expect("finding serializes"));
        out.push('\n');
    }
    out
}

/// Findings as CSV (kind, subject, exchange, publisher_id, note, evidence).
pub fn findings_csv(findings: &[Finding]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["kind", "subject_domain", "exchange_domain", "publisher_id", "note", "evidence"])
        .expect("header");
    for f in findings {
        let evidence = f
            .evidence
            .iter()
            .map(|e| match (e.line, e.entry) {
                (Some(line), _) => format!("{}:{line}", e.file),
                (None, Some(entry)) => format!("{}#{entry}", e.file),
                (None, None) => e.file.clone(),
            })
            .collect::<Vec<_>>()
            .join(" ");
        writer
            .write_record([
                f.kind.as_str(),
                &f.subject_domain,
                f.exchange_domain.as_deref().unwrap_or(""),
                f.publisher_id.as_deref().unwrap_or(""),
                &f.note,
                &evidence,
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf8")
}

/// Prevalence report as CSV, mirroring the published table layout.
pub fn prevalence_csv(report: &PrevalenceReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "kind",
            "cohort",
            "subjects_total",
            "subjects_affected",
            "subject_fraction",
            "finding_count",
            "entry_fraction",
        ])
        .expect("header");
    for c in &report.cells {
        writer
            .write_record([
                c.kind.as_str(),
                &c.cohort,
                &c.subjects_total.to_string(),
                &c.subjects_affected.to_string(),
                &format!("{:.6}", c.subject_fraction),
                &c.finding_count.to_string(),
                &format!("{:.6}", c.entry_fraction),
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf8")
}
