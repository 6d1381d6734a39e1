//! On-disk snapshot store for crawled disclosures and the parsed in-memory
//! view the analysis modules consume.
//!
//! Snapshot layout: `<root>/<yyyy-mm-dd>/<domain>/<ads.txt|sellers.json>`
//! plus a `manifest.jsonl` in the date directory (one JSON object per fetch).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::adstxt::{parse_ads_txt, AdsTxtFile};
use crate::domain;
use crate::sellersjson::{parse_sellers_json, SellersJsonFile};

/// Which disclosure file a fetch targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchKind {
    Ads,
    Sellers,
}

impl FetchKind {
    pub fn file_name(&self) -> &'static str {
        match self {
            FetchKind::Ads => "ads.txt",
            FetchKind::Sellers => "sellers.json",
        }
    }
}

impl fmt::Display for FetchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_name())
    }
}

/// Outcome classification of one fetch attempt series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    Ok,
    NotFound,
    NetworkError,
    Timeout,
    NonText,
}

impl FetchStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, FetchStatus::Ok)
    }
}

/// Result of fetching one disclosure file. The body is present iff the
/// status is `Ok`, and the hash is the sha256 of that body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResult {
    pub url: String,
    pub status: FetchStatus,
    pub body: Option<Vec<u8>>,
    pub fetched_at: DateTime<Utc>,
    pub content_hash: Option<String>,
}

impl FetchResult {
    pub fn new(url: String, status: FetchStatus, body: Option<Vec<u8>>) -> Self {
        use sha2::Digest;
        debug_assert_eq!(status.is_ok(), body.is_some());
        let content_hash = body
            .as_deref()
            .map(|b| hex::encode(sha2::Sha256::digest(b)));
        FetchResult {
            url,
            status,
            body,
            fetched_at: Utc::now(),
            content_hash,
        }
    }
}

/// One line of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub domain: String,
    pub kind: FetchKind,
    pub url: String,
    pub status: FetchStatus,
    /// RFC3339 UTC timestamp of the fetch.
    pub fetched_at: String,
    pub sha256: Option<String>,
    /// Path of the persisted body, relative to the date directory.
    pub path: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("snapshot io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("corrupt manifest line {line}: {message}")]
    CorruptManifest { line: usize, message: String },
}

fn io_err(path: &Path, source: io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Persistent store for one snapshot date.
#[derive(Debug)]
pub struct SnapshotStore {
    root: PathBuf,
    date: String,
    alternate_paths: BTreeMap<String, String>,
    rows: Vec<ManifestRow>,
    latest: HashMap<(String, FetchKind), usize>,
}

impl SnapshotStore {
    /// Open (creating directories as needed) the store for `date` under
    /// `root`, loading any existing manifest.
    pub fn open(root: impl Into<PathBuf>, date: &str) -> Result<Self, StoreError> {
        let root = root.into();
        let date_dir = root.join(date);
        fs::create_dir_all(&date_dir).map_err(|e| io_err(&date_dir, e))?;

        let mut store = SnapshotStore {
            root,
            date: date.to_string(),
            alternate_paths: BTreeMap::new(),
            rows: Vec::new(),
            latest: HashMap::new(),
        };

        let manifest = store.manifest_path();
        if manifest.exists() {
            let file = fs::File::open(&manifest).map_err(|e| io_err(&manifest, e))?;
            for (i, line) in io::BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| io_err(&manifest, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: ManifestRow =
                    serde_json::from_str(&line).map_err(|e| StoreError::CorruptManifest {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                store.index_row(&row);
                store.rows.push(row);
            }
        }
        Ok(store)
    }

    fn index_row(&mut self, row: &ManifestRow) {
        self.latest
            .insert((row.domain.clone(), row.kind), self.rows.len());
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn date(&self) -> &str {
        &self.date
    }

    pub fn date_dir(&self) -> PathBuf {
        self.root.join(&self.date)
    }

    fn manifest_path(&self) -> PathBuf {
        self.date_dir().join("manifest.jsonl")
    }

    pub fn manifest(&self) -> &[ManifestRow] {
        &self.rows
    }

    /// Register a URL override for a domain (non-standard disclosure
    /// locations, e.g. a major exchange's off-root sellers.json).
    pub fn register_alternate_path(&mut self, domain: &str, url: &str) {
        self.alternate_paths
            .insert(domain::normalize_host(domain), url.to_string());
    }

    pub fn alternate_path(&self, domain: &str) -> Option<&str> {
        self.alternate_paths
            .get(&domain::normalize_host(domain))
            .map(String::as_str)
    }

    pub fn has(&self, domain: &str, kind: FetchKind) -> bool {
        self.latest
            .contains_key(&(domain::normalize_host(domain), kind))
    }

    /// The most recent manifest row for `(domain, kind)`, if any.
    pub fn lookup(&self, domain: &str, kind: FetchKind) -> Option<&ManifestRow> {
        self.latest
            .get(&(domain::normalize_host(domain), kind))
            .map(|&i| &self.rows[i])
    }

    /// Persist a fetch outcome: write the body (when present) under
    /// `<date>/<domain>/<kind>` and append a manifest row.
    pub fn record(
        &mut self,
        domain: &str,
        kind: FetchKind,
        result: &FetchResult,
    ) -> Result<(), StoreError> {
        let domain = domain::normalize_host(domain);
        let rel_path = if let Some(body) = &result.body {
            let dir = self.date_dir().join(&domain);
            fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
            let file_path = dir.join(kind.file_name());
            fs::write(&file_path, body).map_err(|e| io_err(&file_path, e))?;
            Some(format!("{domain}/{}", kind.file_name()))
        } else {
            None
        };

        let row = ManifestRow {
            domain,
            kind,
            url: result.url.clone(),
            status: result.status,
            fetched_at: result.fetched_at.to_rfc3339(),
            sha256: result.content_hash.clone(),
            path: rel_path,
        };

        let manifest = self.manifest_path();
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&manifest)
            .map_err(|e| io_err(&manifest, e))?;
        let mut line = serde_json::to_string(&row).expect("manifest row serializes");
        line.push('\n');
        file.write_all(line.as_bytes())
            .map_err(|e| io_err(&manifest, e))?;

        self.index_row(&row);
        self.rows.push(row);
        Ok(())
    }

    /// Read a persisted body back from disk.
    pub fn read_body(&self, row: &ManifestRow) -> Result<Option<Vec<u8>>, StoreError> {
        match &row.path {
            Some(rel) => {
                let path = self.date_dir().join(rel);
                fs::read(&path).map(Some).map_err(|e| io_err(&path, e))
            }
            None => Ok(None),
        }
    }

    /// Domains with a manifest row of the given kind.
    pub fn domains_with(&self, kind: FetchKind) -> Vec<String> {
        let mut domains: Vec<String> = self
            .latest
            .keys()
            .filter(|(_, k)| *k == kind)
            .map(|(d, _)| d.clone())
            .collect();
        domains.sort();
        domains
    }

    /// Parse every stored disclosure into an in-memory view.
    pub fn load_disclosures(&self) -> Result<DisclosureSet, StoreError> {
        let mut set = DisclosureSet::new();
        for row in &self.rows {
            match row.kind {
                FetchKind::Ads => {
                    if row.status.is_ok() {
                        if let Some(body) = self.read_body(row)? {
                            let text = String::from_utf8_lossy(&body);
                            set.insert_ads(parse_ads_txt(&row.domain, &text));
                        }
                    }
                }
                FetchKind::Sellers => {
                    if row.status.is_ok() {
                        if let Some(body) = self.read_body(row)? {
                            let text = String::from_utf8_lossy(&body);
                            set.insert_sellers(parse_sellers_json(&row.domain, &text));
                        }
                    } else {
                        set.mark_sellers_failed(&row.domain, row.status);
                    }
                }
            }
        }
        Ok(set)
    }
}

/// Why an exchange's sellers.json cannot be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnusableReason {
    /// No snapshot was ever taken for this domain.
    NotFetched,
    /// The fetch failed with the given status.
    FetchFailed(FetchStatus),
    /// Fetched but the document could not be interpreted.
    Unparseable,
}

/// Lookup outcome for an exchange's sellers.json.
#[derive(Debug, Clone, Copy)]
pub enum SellersLookup<'a> {
    Usable(&'a SellersJsonFile),
    Unusable(UnusableReason),
}

impl<'a> SellersLookup<'a> {
    pub fn usable(&self) -> Option<&'a SellersJsonFile> {
        match self {
            SellersLookup::Usable(f) => Some(f),
            SellersLookup::Unusable(_) => None,
        }
    }

    pub fn is_usable(&self) -> bool {
        self.usable().is_some()
    }
}

enum SellersSlot {
    Parsed(SellersJsonFile),
    Failed(FetchStatus),
}

/// Parsed, immutable view over one snapshot date: ads.txt files keyed by
/// publisher and sellers.json outcomes keyed by exchange. Keys are reduced
/// to registrable domains so cross-file comparisons line up.
#[derive(Default)]
pub struct DisclosureSet {
    ads: BTreeMap<String, AdsTxtFile>,
    sellers: BTreeMap<String, SellersSlot>,
}

impl DisclosureSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_ads(&mut self, file: AdsTxtFile) {
        self.ads.insert(domain::registrable(&file.source_domain), file);
    }

    pub fn insert_sellers(&mut self, file: SellersJsonFile) {
        self.sellers.insert(
            domain::registrable(&file.source_domain),
            SellersSlot::Parsed(file),
        );
    }

    pub fn mark_sellers_failed(&mut self, exchange: &str, status: FetchStatus) {
        self.sellers
            .insert(domain::registrable(exchange), SellersSlot::Failed(status));
    }

    pub fn ads(&self, publisher: &str) -> Option<&AdsTxtFile> {
        self.ads.get(&domain::registrable(publisher))
    }

    pub fn ads_files(&self) -> impl Iterator<Item = &AdsTxtFile> {
        self.ads.values()
    }

    pub fn ads_domains(&self) -> impl Iterator<Item = &str> {
        self.ads.keys().map(String::as_str)
    }

    pub fn sellers_outcome(&self, exchange: &str) -> SellersLookup<'_> {
        match self.sellers.get(&domain::registrable(exchange)) {
            Some(SellersSlot::Parsed(file)) if file.unparseable => {
                SellersLookup::Unusable(UnusableReason::Unparseable)
            }
            Some(SellersSlot::Parsed(file)) => SellersLookup::Usable(file),
            Some(SellersSlot::Failed(status)) => {
                SellersLookup::Unusable(UnusableReason::FetchFailed(*status))
            }
            None => SellersLookup::Unusable(UnusableReason::NotFetched),
        }
    }

    /// Exchanges with a usable sellers.json, in key order.
    pub fn usable_sellers_files(&self) -> impl Iterator<Item = &SellersJsonFile> {
        self.sellers.values().filter_map(|slot| match slot {
            SellersSlot::Parsed(file) if !file.unparseable => Some(file),
            _ => None,
        })
    }

    pub fn sellers_domains(&self) -> impl Iterator<Item = &str> {
        self.sellers.keys().map(String::as_str)
    }
}
