//! Brand-exposure statistics: which brands advertise on which sites,
//! how reputable those brands are by traffic rank, and how brand rank
//! relates to a site's participation in shared-ID pools.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::domain;
use crate::pools::{Homogeneity, Pool};

/// Ranks at or above this cutoff count as reputable ("top-1K").
pub const REPUTABLE_RANK_CUTOFF: u32 = 1000;

#[derive(Debug, thiserror::Error)]
pub enum BrandsError {
    #[error("rank list row {row}: {message}")]
    BadRankRow { row: usize, message: String },
    #[error("regression needs ≥2 points with non-identical x")]
    DegenerateX,
}

/// Traffic-rank list: registrable domain → rank, 1 = most popular.
#[derive(Debug, Clone, Default)]
pub struct RankList {
    ranks: HashMap<String, u32>,
}

impl RankList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load a `rank,domain` CSV (no header). A domain listed twice keeps
    /// its best (lowest) rank.
    pub fn from_csv(text: &str) -> Result<Self, BrandsError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut list = RankList::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| BrandsError::BadRankRow {
                row: i + 1,
                message: e.to_string(),
            })?;
            if record.len() < 2 {
                return Err(BrandsError::BadRankRow {
                    row: i + 1,
                    message: "need rank,domain".to_string(),
                });
            }
            let rank: u32 = record[0].parse().map_err(|e| BrandsError::BadRankRow {
                row: i + 1,
                message: format!("bad rank {:?}: {e}", &record[0]),
            })?;
            list.insert(&record[1], rank);
        }
        Ok(list)
    }

    pub fn insert(&mut self, domain_name: &str, rank: u32) {
        let key = domain::registrable(domain_name);
        let slot = self.ranks.entry(key).or_insert(rank);
        *slot = (*slot).min(rank);
    }

    pub fn rank(&self, domain_name: &str) -> Option<u32> {
        self.ranks.get(&domain::registrable(domain_name)).copied()
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// True iff the brand is ranked and within the reputable cutoff.
pub fn classify_reputable(brand: &str, ranks: &RankList) -> bool {
    ranks
        .rank(brand)
        .is_some_and(|r| r <= REPUTABLE_RANK_CUTOFF)
}

/// Per-publisher brand exposure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrandExposure {
    pub publisher: String,
    pub distinct_brands: usize,
    pub reputable_brands: usize,
    /// Median of the ranked brands' ranks; absent when none are ranked.
    pub median_brand_rank: Option<f64>,
    /// Pools (of any class) containing this publisher.
    pub pool_count: usize,
    pub heterogeneous_pool_count: usize,
}

/// Median with the even-count mean-of-middle-two rule. Input order is
/// irrelevant; the slice is sorted internally.
fn median(mut values: Vec<u32>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    })
}

/// Aggregate observed (publisher, brand) pairs into per-publisher rows:
/// brands dedup at registrable granularity, reputable brands counted, the
/// median taken over ranked brands only, and pool participation counted
/// from the supplied pool list. Rows come out sorted by publisher.
pub fn exposure_table(
    pairs: &[(String, String)],
    ranks: &RankList,
    pools: &[Pool],
) -> Vec<BrandExposure> {
    let mut brands_by_pub: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (publisher, brand) in pairs {
        brands_by_pub
            .entry(domain::registrable(publisher))
            .or_default()
            .insert(domain::registrable(brand));
    }

    let mut pool_counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for pool in pools {
        for member in &pool.members {
            let counts = pool_counts.entry(member.as_str()).or_insert((0, 0));
            counts.0 += 1;
            if pool.homogeneity == Homogeneity::Heterogeneous {
                counts.1 += 1;
            }
        }
    }

    brands_by_pub
        .into_iter()
        .map(|(publisher, brands)| {
            let ranked: Vec<u32> = brands.iter().filter_map(|b| ranks.rank(b)).collect();
            let reputable = brands
                .iter()
                .filter(|b| classify_reputable(b, ranks))
                .count();
            let (pool_count, het_count) =
                pool_counts.get(publisher.as_str()).copied().unwrap_or((0, 0));
            BrandExposure {
                distinct_brands: brands.len(),
                reputable_brands: reputable,
                median_brand_rank: median(ranked),
                pool_count,
                heterogeneous_pool_count: het_count,
                publisher,
            }
        })
        .collect()
}

/// A fitted simple regression line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OlsLine {
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

/// Ordinary least squares for y on x, single pass over raw sums:
/// slope = (nΣxy − ΣxΣy) / (nΣx² − (Σx)²), intercept = ȳ − slope·x̄.
pub fn ols_slope(points: &[(f64, f64)]) -> Result<OlsLine, BrandsError> {
    let n = points.len();
    if n < 2 {
        return Err(BrandsError::DegenerateX);
    }
    let nf = n as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = nf * sxx - sx * sx;
    // All-equal x leaves no variance to regress on. The tolerance is
    // relative to the magnitude of the sums so huge coordinates do not
    // false-positive.
    if denom.abs() <= f64::EPSILON * nf * sxx.abs().max(1.0) {
        return Err(BrandsError::DegenerateX);
    }
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = sy / nf - slope * sx / nf;
    Ok(OlsLine {
        slope,
        intercept,
        n,
    })
}

/// The regression input for "median brand rank vs pool count": one point
/// per publisher that has both a median and (when `heterogeneous_only`)
/// the relevant pool count. Publishers without a median are skipped.
pub fn regression_points(
    exposures: &[BrandExposure],
    heterogeneous_only: bool,
) -> Vec<(f64, f64)> {
    exposures
        .iter()
        .filter_map(|e| {
            let y = e.median_brand_rank?;
            let x = if heterogeneous_only {
                e.heterogeneous_pool_count
            } else {
                e.pool_count
            };
            Some((x as f64, y))
        })
        .collect()
}

/// Exposure rows as CSV.
pub fn exposure_csv(exposures: &[BrandExposure]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "publisher",
            "distinct_brands",
            "reputable_brands",
            "median_brand_rank",
            "pool_count",
            "heterogeneous_pool_count",
        ])
        .expect("header");
    for e in exposures {
        writer
            .write_record([
                e.publisher.as_str(),
                &e.distinct_brands.to_string(),
                &e.reputable_brands.to_string(),
                &e.median_brand_rank
                    .map(|m| format!("{m:.1}"))
                    .unwrap_or_default(),
                &e.pool_count.to_string(),
                &e.heterogeneous_pool_count.to_string(),
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf8")
}
