//! Longitudinal drift between two sellers.json snapshots of one exchange:
//! which publisher domains were added, which were dropped, optionally
//! restricted to a watchlist of sites under scrutiny.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::domain;
use crate::sellersjson::SellersJsonFile;

#[derive(Debug, thiserror::Error)]
pub enum LongitudinalError {
    #[error("snapshots are from different exchanges: {old} vs {new}")]
    ExchangeMismatch { old: String, new: String },
}

/// Membership change in one exchange's disclosed publisher population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub exchange_domain: String,
    /// Distinct (watch-restricted) publisher domains in the old snapshot.
    pub old_count: usize,
    pub new_count: usize,
    pub added: BTreeSet<String>,
    pub dropped: BTreeSet<String>,
}

impl DiffReport {
    /// The defining set identity; holds by construction, exposed so
    /// callers can assert it cheaply on loaded/serialized data.
    pub fn identity_holds(&self) -> bool {
        self.new_count as i64
            == self.old_count as i64 + self.added.len() as i64 - self.dropped.len() as i64
    }
}

/// Distinct registrable domains of non-confidential entries, optionally
/// intersected with the watchlist.
fn universe(file: &SellersJsonFile, watchlist: Option<&BTreeSet<String>>) -> BTreeSet<String> {
    let mut set: BTreeSet<String> = file
        .visible_domains()
        .iter()
        .map(|d| domain::registrable(d))
        .collect();
    if let Some(watch) = watchlist {
        set.retain(|d| watch.contains(d));
    }
    set
}

/// Diff two snapshots of the same exchange. Confidential entries never
/// participate (their domains are unknowable); a domain disclosed under
/// several seller IDs counts once. The watchlist, when given, restricts
/// the whole universe first, so every reported number is about watched
/// domains only.
pub fn diff_snapshots(
    old: &SellersJsonFile,
    new: &SellersJsonFile,
    watchlist: Option<&BTreeSet<String>>,
) -> Result<DiffReport, LongitudinalError> {
    let old_exchange = domain::registrable(&old.source_domain);
    let new_exchange = domain::registrable(&new.source_domain);
    if old_exchange != new_exchange {
        return Err(LongitudinalError::ExchangeMismatch {
            old: old_exchange,
            new: new_exchange,
        });
    }

    let watchlist_reg: Option<BTreeSet<String>> =
        watchlist.map(|w| w.iter().map(|d| domain::registrable(d)).collect());
    let old_universe = universe(old, watchlist_reg.as_ref());
    let new_universe = universe(new, watchlist_reg.as_ref());

    Ok(DiffReport {
        exchange_domain: old_exchange,
        old_count: old_universe.len(),
        new_count: new_universe.len(),
        added: new_universe.difference(&old_universe).cloned().collect(),
        dropped: old_universe.difference(&new_universe).cloned().collect(),
    })
}

/// Reports as CSV: exchange, old and new population sizes, add/drop counts.
pub fn diff_csv(reports: &[DiffReport]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["exchange", "old_count", "new_count", "added", "dropped"])
        .expect("header");
    for report in reports {
        writer
            .write_record([
                report.exchange_domain.as_str(),
                &report.old_count.to_string(),
                &report.new_count.to_string(),
                &report.added.len().to_string(),
                &report.dropped.len().to_string(),
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv utf8")
}

/// Reports as JSON lines, including the full added/dropped domain sets.
pub fn diff_jsonl(reports: &[DiffReport]) -> String {
    let mut out = String::new();
    for report in reports {
        out.push_str(&serde_json::to_string(report).expect("report serializes"));
        out.push('\n');
    }
    out
}
