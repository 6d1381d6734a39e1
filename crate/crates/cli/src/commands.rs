//! The eight subcommands. Every artifact these write is deterministic for
//! a given snapshot: collections are sorted before serialization and wall
//! clock time only ever lands in `run_meta.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use adchain_core::audit::{
    audit_corpus, findings_csv, findings_jsonl, prevalence_csv, prevalence_table, Cohort,
};
use adchain_core::brands::{exposure_csv, exposure_table, ols_slope, regression_points};
use adchain_core::domain::registrable;
use adchain_core::fetch::resolve_closure;
use adchain_core::longitudinal::{diff_csv, diff_jsonl, diff_snapshots};
use adchain_core::pools::{
    apply_watchlist, classify_pools, detect_pools, pool_stats, pool_stats_csv, pools_jsonl,
    resolve_owners, Pool,
};
use adchain_core::rtb::{
    derive_triples, extract_kv, hits_jsonl, match_ids, mine_flows, parse_har, triples_by_exchange,
    triples_jsonl, IdHit, IdIndex,
};
use adchain_core::schain::{sco_stats, validate_sco, verdicts_jsonl};
use adchain_core::store::{DisclosureSet, SnapshotStore};
use anyhow::{Context, Result};
use serde::Deserialize;
use serde_json::json;

use crate::config::{read_domain_lines, RunConfig};
use crate::transport::HttpTransport;

/// How a command ended short of an error: real work done, or nothing to do.
pub enum Outcome {
    Done,
    Empty(String),
}

fn write_artifact(out: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output dir {}", out.display()))?;
    let path = out.join(name);
    std::fs::write(&path, content).with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn to_pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn open_snapshot(config: &RunConfig, date: &str) -> Result<SnapshotStore> {
    let mut store = SnapshotStore::open(&config.snapshot_root, date)
        .with_context(|| format!("cannot open snapshot {date}"))?;
    for (domain, url) in &config.alternate_paths {
        store.register_alternate_path(domain, url);
    }
    Ok(store)
}

fn load_set(config: &RunConfig, date: &str) -> Result<(SnapshotStore, DisclosureSet)> {
    let store = open_snapshot(config, date)?;
    let set = store
        .load_disclosures()
        .with_context(|| format!("cannot load snapshot {date}"))?;
    Ok((store, set))
}

fn snapshot_is_empty(set: &DisclosureSet) -> bool {
    set.ads_files().next().is_none() && set.sellers_domains().next().is_none()
}

// ---------------------------------------------------------------------------

pub fn fetch(config: &RunConfig, date: &str, out: &Path) -> Result<Outcome> {
    let seeds = read_domain_lines(&config.seeds_path)?;
    if seeds.is_empty() {
        return Ok(Outcome::Empty(format!(
            "seeds file {} lists no domains",
            config.seeds_path.display()
        )));
    }

    let transport = HttpTransport::new(config.fetch.timeout, &config.fetch.user_agent)?;
    let mut store = open_snapshot(config, date)?;
    let report = resolve_closure(&seeds, &transport, &mut store, &config.fetch)?;

    // Task completion order depends on thread scheduling; sort before
    // writing so reruns over the same snapshot are byte-identical.
    let mut rows: Vec<(String, String, String)> = report
        .fetched
        .iter()
        .map(|(domain, kind, status)| {
            (
                domain.clone(),
                serde_json::to_value(kind).unwrap().as_str().unwrap().to_string(),
                serde_json::to_value(status).unwrap().as_str().unwrap().to_string(),
            )
        })
        .collect();
    rows.sort();
    let mut losses = report.frontier_losses.clone();
    losses.sort_by(|a, b| {
        (&a.via_exchange, &a.seller_id).cmp(&(&b.via_exchange, &b.seller_id))
    });
    let status_counts: BTreeMap<String, usize> = report
        .status_counts()
        .into_iter()
        .map(|(status, n)| {
            (
                serde_json::to_value(status).unwrap().as_str().unwrap().to_string(),
                n,
            )
        })
        .collect();

    let summary = json!({
        "snapshot_date": date,
        "seeds": seeds.len(),
        "documents": rows.iter()
            .map(|(domain, kind, status)| json!({"domain": domain, "kind": kind, "status": status}))
            .collect::<Vec<_>>(),
        "status_counts": status_counts,
        "reused": report.reused,
        "truncated": report.truncated,
        "depth_reached": report.depth_reached,
        "frontier_losses": losses,
    });
    write_artifact(out, "fetch_report.json", &to_pretty(&summary))?;
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------------

fn audit_cohorts(set: &DisclosureSet, watchlist: Option<&BTreeSet<String>>) -> Vec<Cohort> {
    let publishers: Vec<String> = set
        .ads_files()
        .map(|f| registrable(&f.source_domain))
        .collect();
    let record_total: usize = set.ads_files().map(|f| f.records.len()).sum();
    let exchanges: Vec<String> = set
        .usable_sellers_files()
        .map(|f| registrable(&f.source_domain))
        .collect();
    let entry_total: usize = set.usable_sellers_files().map(|f| f.entries.len()).sum();

    let mut cohorts = vec![
        Cohort::new("publishers", publishers.clone(), record_total),
        Cohort::new("exchanges", exchanges, entry_total),
    ];
    if let Some(watch) = watchlist {
        let watch: BTreeSet<String> = watch.iter().map(|d| registrable(d)).collect();
        let subjects: Vec<String> = publishers
            .iter()
            .filter(|p| watch.contains(p.as_str()))
            .cloned()
            .collect();
        let watch_records: usize = set
            .ads_files()
            .filter(|f| watch.contains(&registrable(&f.source_domain)))
            .map(|f| f.records.len())
            .sum();
        cohorts.push(Cohort::new("watchlisted-publishers", subjects, watch_records));
    }
    // The prevalence table rejects empty cohorts; a snapshot may have no
    // usable exchanges, or no watched publisher.
    cohorts.retain(|c| !c.subjects.is_empty());
    cohorts
}

pub fn audit(config: &RunConfig, date: &str, out: &Path) -> Result<Outcome> {
    let (_store, set) = load_set(config, date)?;
    if snapshot_is_empty(&set) {
        return Ok(Outcome::Empty(format!("snapshot {date} holds no disclosures")));
    }

    let findings = audit_corpus(&set);
    let cohorts = audit_cohorts(&set, config.watchlist()?.as_ref());
    let prevalence = prevalence_table(&findings, &cohorts)?;

    write_artifact(out, "findings.jsonl", &findings_jsonl(&findings))?;
    write_artifact(out, "findings.csv", &findings_csv(&findings))?;
    write_artifact(out, "prevalence.csv", &prevalence_csv(&prevalence))?;
    println!("{} findings across {} documents", findings.len(), {
        set.ads_files().count() + set.usable_sellers_files().count()
    });
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------------

/// Detect, classify, and annotate pools for the snapshot. Shared by the
/// `pools`, `brands`, and `report` commands.
fn build_pools(config: &RunConfig, set: &DisclosureSet) -> Result<(Vec<Pool>, BTreeSet<String>)> {
    let corpus: Vec<_> = set.ads_files().cloned().collect();
    let mut pools = detect_pools(&corpus, config.scope);
    classify_pools(&mut pools, &config.entity_map()?);
    resolve_owners(&mut pools, set);
    let watchlist = config.watchlist()?.unwrap_or_default();
    apply_watchlist(&mut pools, &watchlist);
    Ok((pools, watchlist))
}

pub fn pools(config: &RunConfig, date: &str, out: &Path) -> Result<Outcome> {
    let (_store, set) = load_set(config, date)?;
    if set.ads_files().next().is_none() {
        return Ok(Outcome::Empty(format!("snapshot {date} holds no ads.txt documents")));
    }

    let (pools, watchlist) = build_pools(config, &set)?;
    let stats = pool_stats(&pools, &watchlist, 10);

    write_artifact(out, "pools.jsonl", &pools_jsonl(&pools))?;
    write_artifact(out, "pool_stats.csv", &pool_stats_csv(&stats))?;
    println!("{} pools detected", stats.total_pools);
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------------

pub fn mine(config: &RunConfig, date: &str, har_dir: &Path, out: &Path) -> Result<Outcome> {
    let mut har_files: Vec<PathBuf> = std::fs::read_dir(har_dir)
        .with_context(|| format!("cannot read HAR dir {}", har_dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "har"))
        .collect();
    har_files.sort();
    if har_files.is_empty() {
        return Ok(Outcome::Empty(format!(
            "no .har captures under {}",
            har_dir.display()
        )));
    }

    let (_store, set) = load_set(config, date)?;
    let index = IdIndex::from_disclosures(&set);
    let rules = config.filter_rules()?;

    let mut hits: Vec<IdHit> = Vec::new();
    let mut skipped: Vec<serde_json::Value> = Vec::new();
    let mut flow_total = 0usize;
    for path in &har_files {
        let page = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let flows = match parse_har(&text) {
            Ok(flows) => flows,
            Err(err) => {
                skipped.push(json!({"file": path.display().to_string(), "error": err.to_string()}));
                continue;
            }
        };
        flow_total += flows.len();
        match &rules {
            // With filter lists configured, only ad-classified flows count.
            Some(rules) => hits.extend(mine_flows(&page, &flows, rules, &index)),
            // Without lists every flow is a candidate.
            None => {
                for flow in &flows {
                    let kvs = extract_kv(flow);
                    hits.extend(match_ids(&flow.url, &kvs, &page, &index));
                }
            }
        }
    }
    hits.sort();
    let triples = derive_triples(&hits, &set);

    write_artifact(out, "hits.jsonl", &hits_jsonl(&hits))?;
    write_artifact(out, "triples.jsonl", &triples_jsonl(&triples))?;
    let summary = json!({
        "snapshot_date": date,
        "har_files": har_files.len(),
        "flows": flow_total,
        "indexed_ids": index.len(),
        "hits": hits.len(),
        "triples": triples.len(),
        "triples_by_exchange": triples_by_exchange(&triples),
        "skipped": skipped,
    });
    write_artifact(out, "mine_summary.json", &to_pretty(&summary))?;
    println!("{} hits, {} evidence triples", hits.len(), triples.len());
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct PayloadRow {
    site: String,
    payload: String,
}

pub fn schain(config: &RunConfig, date: &str, payloads: &Path, out: &Path) -> Result<Outcome> {
    let text = std::fs::read_to_string(payloads)
        .with_context(|| format!("cannot read payloads {}", payloads.display()))?;

    let mut rows: Vec<PayloadRow> = Vec::new();
    let mut bad_lines: Vec<serde_json::Value> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PayloadRow>(line) {
            Ok(row) => rows.push(row),
            Err(err) => bad_lines.push(json!({"line": i + 1, "error": err.to_string()})),
        }
    }
    if rows.is_empty() {
        return Ok(Outcome::Empty(format!(
            "no usable payload rows in {}",
            payloads.display()
        )));
    }

    let (_store, set) = load_set(config, date)?;
    let verdicts: Vec<_> = rows
        .iter()
        .map(|row| validate_sco(&row.payload, &row.site, &set))
        .collect();
    let stats = sco_stats(&verdicts).expect("rows is non-empty");

    write_artifact(out, "verdicts.jsonl", &verdicts_jsonl(&verdicts))?;
    let mut report = serde_json::to_value(&stats)?;
    report["skipped_lines"] = json!(bad_lines);
    write_artifact(out, "sco_stats.json", &to_pretty(&report))?;
    println!(
        "adoption {:.4}, correctness {:.4} over {} payloads",
        stats.adoption_ratio, stats.correctness_ratio, stats.total
    );
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------------

pub fn diff(config: &RunConfig, old_date: &str, new_date: &str, out: &Path) -> Result<Outcome> {
    let (_old_store, old_set) = load_set(config, old_date)?;
    let (_new_store, new_set) = load_set(config, new_date)?;
    let watchlist = config.watchlist()?;

    let old_by_domain: BTreeMap<String, _> = old_set
        .usable_sellers_files()
        .map(|f| (registrable(&f.source_domain), f))
        .collect();
    let new_by_domain: BTreeMap<String, _> = new_set
        .usable_sellers_files()
        .map(|f| (registrable(&f.source_domain), f))
        .collect();

    let mut reports = Vec::new();
    for (domain, old_file) in &old_by_domain {
        if let Some(new_file) = new_by_domain.get(domain) {
            reports.push(diff_snapshots(old_file, new_file, watchlist.as_ref())?);
        }
    }
    if reports.is_empty() {
        return Ok(Outcome::Empty(format!(
            "no exchange appears in both {old_date} and {new_date}"
        )));
    }

    write_artifact(out, "diff.csv", &diff_csv(&reports))?;
    write_artifact(out, "diff.jsonl", &diff_jsonl(&reports))?;
    println!("{} exchanges compared", reports.len());
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------------

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot read pairs {}", path.display()))?;
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() >= 2 {
            let publisher = record[0].trim();
            let brand = record[1].trim();
            if !publisher.is_empty() && !brand.is_empty() {
                pairs.push((publisher.to_string(), brand.to_string()));
            }
        }
    }
    Ok(pairs)
}

fn fit_json(points: &[(f64, f64)]) -> serde_json::Value {
    match ols_slope(points) {
        Ok(line) => json!({
            "slope": line.slope,
            "intercept": line.intercept,
            "n": line.n,
        }),
        Err(err) => json!({"error": err.to_string(), "n": points.len()}),
    }
}

pub fn brands(config: &RunConfig, date: &str, pairs_path: &Path, out: &Path) -> Result<Outcome> {
    let pairs = read_pairs(pairs_path)?;
    if pairs.is_empty() {
        return Ok(Outcome::Empty(format!(
            "no (publisher, brand) pairs in {}",
            pairs_path.display()
        )));
    }

    let (_store, set) = load_set(config, date)?;
    let (pools, _watchlist) = build_pools(config, &set)?;
    let ranks = config.rank_list()?;
    let exposures = exposure_table(&pairs, &ranks, &pools);

    write_artifact(out, "exposure.csv", &exposure_csv(&exposures))?;
    let regression = json!({
        "median_rank_vs_pool_count": fit_json(&regression_points(&exposures, false)),
        "median_rank_vs_heterogeneous_pool_count": fit_json(&regression_points(&exposures, true)),
        "publishers": exposures.len(),
    });
    write_artifact(out, "regression.json", &to_pretty(&regression))?;
    println!("{} publishers profiled", exposures.len());
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------------

/// Parse a previously written JSON artifact back in, when present.
fn sibling(out: &Path, name: &str) -> serde_json::Value {
    match std::fs::read_to_string(out.join(name)) {
        Ok(text) => serde_json::from_str(&text).unwrap_or(serde_json::Value::Null),
        Err(_) => serde_json::Value::Null,
    }
}

/// Same for JSON-lines artifacts: rows become an array.
fn sibling_rows(out: &Path, name: &str) -> serde_json::Value {
    match std::fs::read_to_string(out.join(name)) {
        Ok(text) => {
            let rows: Vec<serde_json::Value> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .filter_map(|l| serde_json::from_str(l).ok())
                .collect();
            serde_json::Value::Array(rows)
        }
        Err(_) => serde_json::Value::Null,
    }
}

pub fn report(config: &RunConfig, date: &str, out: &Path) -> Result<Outcome> {
    let (store, set) = load_set(config, date)?;
    if snapshot_is_empty(&set) {
        return Ok(Outcome::Empty(format!("snapshot {date} holds no disclosures")));
    }

    let findings = audit_corpus(&set);
    let watchlist = config.watchlist()?;
    let cohorts = audit_cohorts(&set, watchlist.as_ref());
    let prevalence = prevalence_table(&findings, &cohorts)?;
    let (pools, watch_set) = build_pools(config, &set)?;
    let stats = pool_stats(&pools, &watch_set, 10);

    let mut kind_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for finding in &findings {
        *kind_counts.entry(finding.kind.as_str()).or_insert(0) += 1;
    }

    let mut document_counts: BTreeMap<String, usize> = BTreeMap::new();
    for row in store.manifest() {
        let kind = serde_json::to_value(row.kind).unwrap();
        let status = serde_json::to_value(row.status).unwrap();
        let key = format!("{} {}", kind.as_str().unwrap(), status.as_str().unwrap());
        *document_counts.entry(key).or_insert(0) += 1;
    }

    let summary = json!({
        "snapshot": {
            "date": date,
            "documents": document_counts,
            "publishers": set.ads_files().count(),
            "exchanges": set.usable_sellers_files().count(),
        },
        "audit": {
            "total_findings": findings.len(),
            "by_kind": kind_counts,
            "prevalence": prevalence,
        },
        "pools": stats,
        "sco": sibling(out, "sco_stats.json"),
        "mine": sibling(out, "mine_summary.json"),
        "brands": sibling(out, "regression.json"),
        "diff": sibling_rows(out, "diff.jsonl"),
    });
    write_artifact(out, "summary.json", &to_pretty(&summary))?;
    Ok(Outcome::Done)
}
