//! Auditing toolkit for the programmatic advertising supply chain.
//!
//! The crate ingests the two standard transparency disclosures — publisher
//! `ads.txt` files and exchange `sellers.json` files — plus recorded RTB
//! traffic, and cross-checks them from several angles:
//!
//! - [`adstxt`] / [`sellersjson`]: total parsers for the disclosure formats;
//! - [`fetch`] / [`store`]: polite crawling, closure resolution over the
//!   disclosure graph, and dated on-disk snapshots;
//! - [`audit`]: per-relationship misrepresentation checks;
//! - [`pools`]: shared publisher-ID pools, their organizational homogeneity,
//!   and owner resolution;
//! - [`rtb`]: HAR traffic mining for ID evidence;
//! - [`schain`]: SupplyChain object validation;
//! - [`longitudinal`]: snapshot-to-snapshot population drift;
//! - [`brands`]: brand-exposure statistics and rank regressions.

pub mod adstxt;
pub mod audit;
pub mod brands;
pub mod domain;
pub mod fetch;
pub mod longitudinal;
pub mod pools;
pub mod rtb;
pub mod schain;
pub mod sellersjson;
pub mod store;

pub use adstxt::{parse_ads_txt, AdsTxtFile, AdsTxtRecord, Relationship};
pub use audit::{
    audit_corpus, audit_exchange, audit_publisher, prevalence_table, Cohort, Finding, FindingKind,
};
pub use brands::{classify_reputable, exposure_table, ols_slope, BrandExposure, OlsLine, RankList};
pub use fetch::{
    fetch_disclosure, resolve_closure, ClosureReport, FetchConfig, MemoryTransport, Transport,
};
pub use longitudinal::{diff_snapshots, DiffReport};
pub use pools::{
    classify_homogeneity, detect_pools, pool_stats, resolve_owner, EntityMap, Homogeneity,
    OwnerResolution, OwnerStatus, Pool, PoolStats, RelationshipScope,
};
pub use rtb::{
    classify_ad_flow, derive_triples, extract_kv, match_ids, FilterRuleSet, Flow, IdHit, IdIndex,
    Triple,
};
pub use schain::{
    parse_schain, sco_stats, static_paths, validate_sco, ScoStats, ScoStatus, ScoVerdict,
    SupplyChainObject,
};
pub use sellersjson::{parse_sellers_json, SellerEntry, SellerType, SellersJsonFile};
pub use store::{DisclosureSet, FetchKind, FetchResult, FetchStatus, SnapshotStore};
