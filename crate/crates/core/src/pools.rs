//! Publisher-ID pools: distinct sites listing the same (exchange, publisher
//! ID) account. Pools are classified by organizational homogeneity against
//! an entity map, their owning account is resolved from the issuing
//! exchange's sellers.json, and the results are tabulated.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::adstxt::{AdsTxtFile, Relationship};
use crate::domain;
use crate::store::DisclosureSet;

/// Organizational make-up of a pool's membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Homogeneity {
    /// Every member maps to one organization.
    Homogeneous,
    /// All mapped members agree, but some members are unmapped.
    PotentiallyHomogeneous,
    /// At least two mapped members belong to different organizations.
    Heterogeneous,
    /// No member maps to any organization.
    Unknown,
}

impl Homogeneity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Homogeneity::Homogeneous => "HOMOGENEOUS",
            Homogeneity::PotentiallyHomogeneous => "POTENTIALLY_HOMOGENEOUS",
            Homogeneity::Heterogeneous => "HETEROGENEOUS",
            Homogeneity::Unknown => "UNKNOWN",
        }
    }

    pub const ALL: [Homogeneity; 4] = [
        Homogeneity::Homogeneous,
        Homogeneity::PotentiallyHomogeneous,
        Homogeneity::Heterogeneous,
        Homogeneity::Unknown,
    ];
}

/// Domain → organization mapping used to attribute pool members.
#[derive(Debug, Clone, Default)]
pub struct EntityMap {
    map: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EntityMapError {
    #[error("entity map is not a JSON object of domain: organization pairs: {0}")]
    BadFormat(String),
}

impl EntityMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load from a JSON object `{ "domain": "Organization", ... }`.
    /// Keys are reduced to registrable domains; on collision the
    /// lexicographically first key's organization wins (deterministic).
    pub fn from_json(text: &str) -> Result<Self, EntityMapError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| EntityMapError::BadFormat(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| EntityMapError::BadFormat("top level is not an object".to_string()))?;
        let mut map = EntityMap::new();
        for (key, val) in obj {
            let org = val
                .as_str()
                .ok_or_else(|| EntityMapError::BadFormat(format!("value for {key:?} is not a string")))?;
            let reg = domain::registrable(key);
            map.map.entry(reg).or_insert_with(|| org.to_string());
        }
        Ok(map)
    }

    pub fn insert(&mut self, domain_name: &str, organization: &str) {
        self.map
            .insert(domain::registrable(domain_name), organization.to_string());
    }

    pub fn lookup(&self, domain_name: &str) -> Option<&str> {
        self.map
            .get(&domain::registrable(domain_name))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Outcome of asking "who does the issuing exchange say owns this ID?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OwnerStatus {
    Resolved,
    /// The exchange's sellers.json does not list the publisher ID.
    PubidUnlisted,
    /// The exchange publishes no usable sellers.json at all.
    SellersJsonNotPublic,
    /// The entry exists but discloses no domain.
    OwnerNotListed,
    /// The entry exists but is confidential.
    OwnerConfidential,
}

impl OwnerStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            OwnerStatus::Resolved => "RESOLVED",
            OwnerStatus::PubidUnlisted => "PUBID_UNLISTED",
            OwnerStatus::SellersJsonNotPublic => "SELLERS_JSON_NOT_PUBLIC",
            OwnerStatus::OwnerNotListed => "OWNER_NOT_LISTED",
            OwnerStatus::OwnerConfidential => "OWNER_CONFIDENTIAL",
        }
    }

    pub const ALL: [OwnerStatus; 5] = [
        OwnerStatus::Resolved,
        OwnerStatus::PubidUnlisted,
        OwnerStatus::SellersJsonNotPublic,
        OwnerStatus::OwnerNotListed,
        OwnerStatus::OwnerConfidential,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OwnerResolution {
    pub status: OwnerStatus,
    /// Present exactly when `status == Resolved`.
    pub owner_domain: Option<String>,
}

impl OwnerResolution {
    fn unresolved(status: OwnerStatus) -> Self {
        debug_assert_ne!(status, OwnerStatus::Resolved);
        OwnerResolution {
            status,
            owner_domain: None,
        }
    }
}

/// A shared publisher ID: one (exchange, ID) account listed by at least
/// two distinct sites.
#[derive(Debug, Clone, Serialize)]
pub struct Pool {
    pub exchange_domain: String,
    pub publisher_id: String,
    /// Registrable domains of the sites listing the account.
    pub members: BTreeSet<String>,
    pub homogeneity: Homogeneity,
    pub contains_watchlisted: bool,
    /// None until `resolve_owners` has run.
    pub owner: Option<OwnerResolution>,
}

impl Pool {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Which ads.txt relationships count toward pool membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelationshipScope {
    /// DIRECT and RESELLER records both participate.
    #[default]
    Any,
    /// Sensitivity-analysis mode: DIRECT records only.
    DirectOnly,
}

/// Group an ads.txt corpus by (exchange, publisher ID) and keep the groups
/// spanning ≥ 2 distinct registrable source domains. Exchanges are compared
/// at registrable granularity too, so `adx.com` and `www.adx.com` pool
/// together. Output is sorted by (exchange, id).
pub fn detect_pools(corpus: &[AdsTxtFile], scope: RelationshipScope) -> Vec<Pool> {
    let mut groups: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for file in corpus {
        let source = domain::registrable(&file.source_domain);
        for record in &file.records {
            if scope == RelationshipScope::DirectOnly
                && record.relationship != Relationship::Direct
            {
                continue;
            }
            groups
                .entry((
                    domain::registrable(&record.exchange_domain),
                    record.publisher_id.clone(),
                ))
                .or_default()
                .insert(source.clone());
        }
    }

    groups
        .into_iter()
        .filter(|(_, members)| members.len() >= 2)
        .map(|((exchange_domain, publisher_id), members)| Pool {
            exchange_domain,
            publisher_id,
            members,
            homogeneity: Homogeneity::Unknown,
            contains_watchlisted: false,
            owner: None,
        })
        .collect()
}

/// Four-way classification of a member set against the entity map.
pub fn classify_homogeneity(pool: &Pool, entities: &EntityMap) -> Homogeneity {
    let mut mapped = 0usize;
    let mut orgs: BTreeSet<&str> = BTreeSet::new();
    for member in &pool.members {
        if let Some(org) = entities.lookup(member) {
            mapped += 1;
            orgs.insert(org);
        }
    }
    if mapped == 0 {
        Homogeneity::Unknown
    } else if orgs.len() > 1 {
        Homogeneity::Heterogeneous
    } else if mapped == pool.members.len() {
        Homogeneity::Homogeneous
    } else {
        Homogeneity::PotentiallyHomogeneous
    }
}

/// Set every pool's homogeneity field from the map.
pub fn classify_pools(pools: &mut [Pool], entities: &EntityMap) {
    for pool in pools.iter_mut() {
        pool.homogeneity = classify_homogeneity(pool, entities);
    }
}

/// Who does `exchange`'s sellers.json say owns `seller_id`? Shared by pool
/// owner resolution and the RTB evidence pipeline. When one ID matches
/// several entries (itself a finding), the first entry in file order is
/// taken, for determinism.
pub fn resolve_owner_of(
    exchange: &str,
    seller_id: &str,
    disclosures: &DisclosureSet,
) -> OwnerResolution {
    let Some(sellers) = disclosures.sellers_outcome(exchange).usable() else {
        return OwnerResolution::unresolved(OwnerStatus::SellersJsonNotPublic);
    };
    let matches = sellers.lookup_seller(seller_id);
    let Some(entry) = matches.first() else {
        return OwnerResolution::unresolved(OwnerStatus::PubidUnlisted);
    };
    if entry.is_confidential {
        return OwnerResolution::unresolved(OwnerStatus::OwnerConfidential);
    }
    match &entry.domain {
        Some(d) => OwnerResolution {
            status: OwnerStatus::Resolved,
            owner_domain: Some(domain::registrable(d)),
        },
        None => OwnerResolution::unresolved(OwnerStatus::OwnerNotListed),
    }
}

pub fn resolve_owner(pool: &Pool, disclosures: &DisclosureSet) -> OwnerResolution {
    resolve_owner_of(&pool.exchange_domain, &pool.publisher_id, disclosures)
}

/// Set every pool's owner field from the snapshot.
pub fn resolve_owners(pools: &mut [Pool], disclosures: &DisclosureSet) {
    for pool in pools.iter_mut() {
        pool.owner = Some(resolve_owner(pool, disclosures));
    }
}

/// Set the watchlist flag: a pool is flagged when any member is on the list.
pub fn apply_watchlist(pools: &mut [Pool], watchlist: &BTreeSet<String>) {
    for pool in pools.iter_mut() {
        pool.contains_watchlisted = pool
            .members
            .iter()
            .any(|m| watchlist.contains(&domain::registrable(m)));
    }
}

/// One homogeneity × watchlist cell of the pool table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolCell {
    pub homogeneity: Homogeneity,
    pub watchlisted: bool,
    pub count: usize,
    /// Mean member count of the cell's pools; 0 for empty cells.
    pub mean_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolStats {
    /// All 4 × 2 cells in fixed (homogeneity, watchlisted) order.
    pub cells: Vec<PoolCell>,
    pub total_pools: usize,
    /// Resolved owner domains by descending pool count (ties by name).
    pub top_owners: Vec<(String, usize)>,
    /// Issuing exchanges by descending pool count (ties by name).
    pub top_exchanges: Vec<(String, usize)>,
    /// How owner resolution fared across all pools.
    pub owner_status_counts: BTreeMap<OwnerStatus, usize>,
}

/// Tabulate pools per homogeneity × watchlist cell, plus top-`k` owners and
/// issuing exchanges. The watch flag is recomputed from `watchlist` here so
/// the table never disagrees with the list it is captioned with.
pub fn pool_stats(pools: &[Pool], watchlist: &BTreeSet<String>, k: usize) -> PoolStats {
    let watchlist: BTreeSet<String> = watchlist.iter().map(|d| domain::registrable(d)).collect();
    let mut counts: BTreeMap<(Homogeneity, bool), (usize, usize)> = BTreeMap::new();
    let mut owners: BTreeMap<String, usize> = BTreeMap::new();
    let mut exchanges: BTreeMap<String, usize> = BTreeMap::new();
    let mut statuses: BTreeMap<OwnerStatus, usize> = BTreeMap::new();

    for pool in pools {
        let watched = pool
            .members
            .iter()
            .any(|m| watchlist.contains(&domain::registrable(m)));
        let cell = counts.entry((pool.homogeneity, watched)).or_insert((0, 0));
        cell.0 += 1;
        cell.1 += pool.size();

        *exchanges.entry(pool.exchange_domain.clone()).or_insert(0) += 1;
        if let Some(owner) = &pool.owner {
            *statuses.entry(owner.status).or_insert(0) += 1;
            if let Some(domain) = &owner.owner_domain {
                *owners.entry(domain.clone()).or_insert(0) += 1;
            }
        }
    }

    let mut cells = Vec::with_capacity(8);
    for homogeneity in Homogeneity::ALL {
        for watchlisted in [false, true] {
            let (count, member_sum) = counts
                .get(&(homogeneity, watchlisted))
                .copied()
                .unwrap_or((0, 0));
            cells.push(PoolCell {
                homogeneity,
                watchlisted,
                count,
                mean_size: if count == 0 {
                    0.0
                } else {
                    member_sum as f64 / count as f64
                },
            });
        }
    }

    fn top_k(map: BTreeMap<String, usize>, k: usize) -> Vec<(String, usize)> {
        let mut rows: Vec<(String, usize)> = map.into_iter().collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        rows.truncate(k);
        rows
    }

    PoolStats {
        cells,
        total_pools: pools.len(),
        top_owners: top_k(owners, k),
        top_exchanges: top_k(exchanges, k),
        owner_status_counts: statuses,
    }
}

/// Pools as JSON lines, one object per pool.
pub fn pools_jsonl(pools: &[Pool]) -> String {
    let mut out = String::new();
    for pool in pools {
        out.push_str(&serde_json::to_string(pool).expect("pool serializes"));
        out.push('\n');
    }
    out
}

/// The pool table as CSV: an ALL row plus one row per homogeneity class,
/// for each watchlist side.
pub fn pool_stats_csv(stats: &PoolStats) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["homogeneity", "watchlisted", "count", "mean_size"])
        .expect("header");
    for watchlisted in [true, false] {
        let side: Vec<&PoolCell> = stats
            .cells
            .iter()
            .filter(|c| c.watchlisted == watchlisted)
            .collect();
        let count: usize = side.iter().map(|c| c.count).sum();
        let member_sum: f64 = side.iter().map(|c| c.mean_size * c.count as f64).sum();
        let mean = if count == 0 { 0.0 } else { member_sum / count as f64 };
        writer
            .write_record([
                "ALL",
                if watchlisted { "true" } else { "false" },
                &count.to_string(),
                &format!("{mean:.6}"),
            ])
            .expect("csv row");
        for cell in side {
            writer
                .write_record([
                    cell.homogeneity.as_str(),
                    if watchlisted { "true" } else { "false" },
                    &cell.count.to_string(),
                    &format!("{:.6}", cell.mean_size),
                ])
                .expect("csv row");
        }
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf8")
}
