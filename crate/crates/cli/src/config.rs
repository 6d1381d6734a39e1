//! Run configuration: a TOML file naming the inputs every command shares.
//!
//! Relative paths are resolved against the directory containing the config
//! file, so a checked-in config keeps working no matter where the binary
//! is invoked from.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use adchain_core::brands::RankList;
use adchain_core::fetch::FetchConfig;
use adchain_core::pools::{EntityMap, RelationshipScope};
use adchain_core::rtb::FilterRuleSet;
use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    /// File with one seed publisher domain per line.
    seeds: PathBuf,
    /// Optional file with one watched domain per line.
    watchlist: Option<PathBuf>,
    /// Optional JSON object mapping domain -> owning organization.
    entity_map: Option<PathBuf>,
    /// Optional headerless CSV of `rank,domain` rows.
    rank_list: Option<PathBuf>,
    /// Adblock-style filter lists used to classify ad traffic.
    #[serde(default)]
    filter_lists: Vec<PathBuf>,
    /// Directory holding dated snapshot subdirectories.
    snapshot_root: PathBuf,
    /// Which ads.txt relationships count toward pooling.
    #[serde(default)]
    relationship_mode: RelationshipMode,
    #[serde(default)]
    fetch: FetchSection,
    /// Non-standard sellers.json locations, keyed by exchange domain.
    #[serde(default, rename = "alternate_path")]
    alternate_paths: Vec<AlternatePath>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RelationshipMode {
    #[default]
    Both,
    DirectOnly,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FetchSection {
    parallelism: usize,
    delay_ms: u64,
    retries: u32,
    timeout_s: u64,
    user_agent: String,
}

impl Default for FetchSection {
    fn default() -> Self {
        let defaults = FetchConfig::default();
        FetchSection {
            parallelism: defaults.parallelism,
            delay_ms: defaults.per_host_delay.as_millis() as u64,
            retries: defaults.retries,
            timeout_s: defaults.timeout.as_secs(),
            user_agent: defaults.user_agent,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlternatePath {
    domain: String,
    url: String,
}

/// Validated configuration with every path resolved and checked.
#[derive(Debug)]
pub struct RunConfig {
    pub seeds_path: PathBuf,
    pub watchlist_path: Option<PathBuf>,
    pub entity_map_path: Option<PathBuf>,
    pub rank_list_path: Option<PathBuf>,
    pub filter_list_paths: Vec<PathBuf>,
    pub snapshot_root: PathBuf,
    pub scope: RelationshipScope,
    pub fetch: FetchConfig,
    pub alternate_paths: Vec<(String, String)>,
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let raw: RawConfig = toml::from_str(&text)
        .with_context(|| format!("cannot parse config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));

    let resolve = |p: &PathBuf| -> PathBuf {
        if p.is_absolute() {
            p.clone()
        } else {
            base.join(p)
        }
    };
    let must_exist = |p: PathBuf, what: &str| -> Result<PathBuf> {
        if !p.exists() {
            bail!("{what} {} does not exist", p.display());
        }
        Ok(p)
    };

    let seeds_path = must_exist(resolve(&raw.seeds), "seeds file")?;
    let watchlist_path = raw
        .watchlist
        .as_ref()
        .map(|p| must_exist(resolve(p), "watchlist file"))
        .transpose()?;
    let entity_map_path = raw
        .entity_map
        .as_ref()
        .map(|p| must_exist(resolve(p), "entity map"))
        .transpose()?;
    let rank_list_path = raw
        .rank_list
        .as_ref()
        .map(|p| must_exist(resolve(p), "rank list"))
        .transpose()?;
    let filter_list_paths = raw
        .filter_lists
        .iter()
        .map(|p| must_exist(resolve(p), "filter list"))
        .collect::<Result<Vec<_>>>()?;

    if raw.fetch.parallelism == 0 {
        bail!("fetch.parallelism must be at least 1");
    }
    if raw.fetch.timeout_s == 0 {
        bail!("fetch.timeout_s must be at least 1");
    }
    for alt in &raw.alternate_paths {
        if alt.domain.trim().is_empty() {
            bail!("alternate_path entry with empty domain");
        }
        if !alt.url.starts_with("http://") && !alt.url.starts_with("https://") {
            bail!("alternate_path url {:?} must be http(s)", alt.url);
        }
    }

    Ok(RunConfig {
        seeds_path,
        watchlist_path,
        entity_map_path,
        rank_list_path,
        filter_list_paths,
        snapshot_root: resolve(&raw.snapshot_root),
        scope: match raw.relationship_mode {
            RelationshipMode::Both => RelationshipScope::Any,
            RelationshipMode::DirectOnly => RelationshipScope::DirectOnly,
        },
        fetch: FetchConfig {
            retries: raw.fetch.retries,
            per_host_delay: Duration::from_millis(raw.fetch.delay_ms),
            parallelism: raw.fetch.parallelism,
            timeout: Duration::from_secs(raw.fetch.timeout_s),
            user_agent: raw.fetch.user_agent,
            ..FetchConfig::default()
        },
        alternate_paths: raw
            .alternate_paths
            .into_iter()
            .map(|a| (a.domain, a.url))
            .collect(),
    })
}

/// One trimmed, non-comment line per entry.
pub fn read_domain_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

impl RunConfig {
    pub fn watchlist(&self) -> Result<Option<BTreeSet<String>>> {
        match &self.watchlist_path {
            Some(path) => Ok(Some(read_domain_lines(path)?.into_iter().collect())),
            None => Ok(None),
        }
    }

    pub fn entity_map(&self) -> Result<EntityMap> {
        match &self.entity_map_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                EntityMap::from_json(&text)
                    .with_context(|| format!("cannot parse entity map {}", path.display()))
            }
            None => Ok(EntityMap::new()),
        }
    }

    pub fn rank_list(&self) -> Result<RankList> {
        match &self.rank_list_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                RankList::from_csv(&text)
                    .with_context(|| format!("cannot parse rank list {}", path.display()))
            }
            None => Ok(RankList::new()),
        }
    }

    /// All configured filter lists compiled into one rule set, or None when
    /// no list is configured (callers then treat every flow as a candidate).
    pub fn filter_rules(&self) -> Result<Option<FilterRuleSet>> {
        if self.filter_list_paths.is_empty() {
            return Ok(None);
        }
        let mut combined = String::new();
        for path in &self.filter_list_paths {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            combined.push_str(&text);
            combined.push('\n');
        }
        Ok(Some(FilterRuleSet::compile(&combined)))
    }
}
