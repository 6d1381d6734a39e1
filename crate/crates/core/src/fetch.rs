//! Fetching disclosures and resolving the supply-chain closure.
//!
//! The transport is injected so the whole crawl pipeline runs against canned
//! responses in tests; the HTTP implementation lives in the CLI crate.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::adstxt::parse_ads_txt;
use crate::domain;
use crate::sellersjson::parse_sellers_json;
use crate::store::{FetchKind, FetchResult, FetchStatus, SnapshotStore, StoreError};

/// A successful HTTP exchange (any status code).
#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status_code: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

/// Transport-level failures, before any HTTP status is available.
#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
}

/// Pluggable HTTP GET. Implementations must be safe to call from multiple
/// threads; the resolver fans fetches out across a worker pool.
pub trait Transport: Sync {
    fn get(&self, url: &str) -> Result<TransportResponse, TransportError>;
}

/// Crawl tuning knobs. Defaults mirror a polite, small-scale crawl.
#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// Extra attempts after the first on timeout / network error.
    pub retries: u32,
    /// Base backoff between retry attempts (doubled per retry).
    pub backoff: Duration,
    /// Minimum spacing between requests to the same host.
    pub per_host_delay: Duration,
    /// Worker threads for a closure wave.
    pub parallelism: usize,
    /// Per-request timeout (enforced by the transport implementation).
    pub timeout: Duration,
    pub user_agent: String,
    /// Maximum closure depth; seeds are depth 0.
    pub max_depth: u32,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            retries: 2,
            backoff: Duration::from_millis(250),
            per_host_delay: Duration::from_millis(500),
            parallelism: 8,
            timeout: Duration::from_secs(30),
            user_agent: "adchain-audit/0.1".to_string(),
            max_depth: 10,
        }
    }
}

impl FetchConfig {
    /// A config with all delays zeroed, for tests and local fixtures.
    pub fn immediate() -> Self {
        FetchConfig {
            backoff: Duration::ZERO,
            per_host_delay: Duration::ZERO,
            ..FetchConfig::default()
        }
    }
}

/// Serializes requests per host so the crawl never hammers one server,
/// no matter how the worker pool schedules tasks.
struct HostGate {
    delay: Duration,
    next_ok: Mutex<HashMap<String, Instant>>,
}

impl HostGate {
    fn new(delay: Duration) -> Self {
        HostGate {
            delay,
            next_ok: Mutex::new(HashMap::new()),
        }
    }

    fn acquire(&self, host: &str) {
        if self.delay.is_zero() {
            return;
        }
        loop {
            let wait = {
                let mut map = self.next_ok.lock().unwrap();
                let now = Instant::now();
                let slot = map.entry(host.to_string()).or_insert(now);
                if *slot <= now {
                    *slot = now + self.delay;
                    return;
                }
                *slot - now
            };
            std::thread::sleep(wait);
        }
    }
}

fn host_of(url: &str) -> String {
    let rest = url.split("://").nth(1).unwrap_or(url);
    let end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    rest[..end]
        .rsplit('@')
        .next()
        .unwrap_or("")
        .split(':')
        .next()
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// The URL a disclosure is fetched from: the well-known root path unless the
/// store carries an override for the domain.
pub fn disclosure_url(store: &SnapshotStore, domain: &str, kind: FetchKind) -> String {
    if kind == FetchKind::Sellers {
        if let Some(url) = store.alternate_path(domain) {
            return url.to_string();
        }
    }
    format!("https://{domain}/{}", kind.file_name())
}

fn looks_binary(content_type: Option<&str>, body: &[u8]) -> bool {
    if let Some(ct) = content_type {
        let ct = ct.to_ascii_lowercase();
        if ct.starts_with("image/")
            || ct.starts_with("audio/")
            || ct.starts_with("video/")
            || ct.starts_with("application/octet-stream")
            || ct.starts_with("application/pdf")
        {
            return true;
        }
    }
    // NUL bytes never appear in the text formats we accept.
    body.contains(&0)
}

fn classify(response: &TransportResponse) -> FetchStatus {
    match response.status_code {
        200..=299 => {
            if looks_binary(response.content_type.as_deref(), &response.body) {
                FetchStatus::NonText
            } else {
                FetchStatus::Ok
            }
        }
        404 | 410 => FetchStatus::NotFound,
        _ => FetchStatus::NetworkError,
    }
}

fn attempt_series(
    transport: &dyn Transport,
    gate: &HostGate,
    config: &FetchConfig,
    url: &str,
) -> FetchResult {
    let host = host_of(url);
    let mut backoff = config.backoff;
    let mut last_status = FetchStatus::NetworkError;
    for attempt in 0..=config.retries {
        if attempt > 0 && !backoff.is_zero() {
            std::thread::sleep(backoff);
            backoff *= 2;
        }
        gate.acquire(&host);
        match transport.get(url) {
            Ok(response) => {
                let status = classify(&response);
                match status {
                    FetchStatus::Ok => {
                        return FetchResult::new(url.to_string(), status, Some(response.body))
                    }
                    // Retry only transient transport-level failures; a
                    // definitive HTTP answer stands.
                    FetchStatus::NetworkError if response.status_code >= 500 => {
                        last_status = status;
                    }
                    _ => return FetchResult::new(url.to_string(), status, None),
                }
            }
            Err(TransportError::Timeout) => last_status = FetchStatus::Timeout,
            Err(TransportError::Network(_)) => last_status = FetchStatus::NetworkError,
        }
    }
    FetchResult::new(url.to_string(), last_status, None)
}

/// Fetch one disclosure (with retries and politeness) and persist the
/// outcome. The caller is expected to have checked `store.has` first when
/// idempotence is wanted.
pub fn fetch_disclosure(
    domain: &str,
    kind: FetchKind,
    transport: &dyn Transport,
    store: &mut SnapshotStore,
    config: &FetchConfig,
) -> Result<FetchResult, StoreError> {
    let gate = HostGate::new(config.per_host_delay);
    let url = disclosure_url(store, domain, kind);
    let result = attempt_series(transport, &gate, config, &url);
    store.record(domain, kind, &result)?;
    Ok(result)
}

/// Why a discovered supply-chain edge could not be followed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReason {
    /// The upstream seller entry is confidential: no domain disclosed.
    ConfidentialSeller,
    /// The entry discloses no domain field at all.
    MissingDomain,
    /// The disclosed domain is not a plausible hostname.
    InvalidDomain,
}

/// A supply-chain edge that terminates at an unfetchable node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FrontierLoss {
    /// Exchange whose sellers.json referenced the lost node.
    pub via_exchange: String,
    pub seller_id: Option<String>,
    pub reason: LossReason,
}

/// Summary of one closure resolution run.
#[derive(Debug, Default)]
pub struct ClosureReport {
    /// `(domain, kind, status)` for every fetch performed or reused, in the
    /// order tasks were scheduled.
    pub fetched: Vec<(String, FetchKind, FetchStatus)>,
    /// Fetches skipped because the store already held the outcome.
    pub reused: usize,
    /// Edges that could not be followed.
    pub frontier_losses: Vec<FrontierLoss>,
    /// True when the depth cap cut off a non-empty frontier.
    pub truncated: bool,
    /// Deepest wave actually processed.
    pub depth_reached: u32,
}

impl ClosureReport {
    pub fn status_counts(&self) -> HashMap<FetchStatus, usize> {
        let mut counts = HashMap::new();
        for (_, _, status) in &self.fetched {
            *counts.entry(*status).or_insert(0) += 1;
        }
        counts
    }
}

/// Outcome of one closure task, before edge expansion.
struct TaskOutcome {
    domain: String,
    kind: FetchKind,
    status: FetchStatus,
    body: Option<Vec<u8>>,
    reused: bool,
}

/// Resolve the full disclosure closure from a set of seed publishers:
/// fetch each seed's ads.txt, then the sellers.json of every exchange those
/// files reference, then the sellers.json of every further intermediary
/// disclosed upstream, breadth-first until no new domains appear or the
/// depth cap is hit. Already-stored outcomes are reused, so rerunning over
/// the same snapshot performs no new fetches.
pub fn resolve_closure(
    seed_publishers: &[String],
    transport: &dyn Transport,
    store: &mut SnapshotStore,
    config: &FetchConfig,
) -> Result<ClosureReport, StoreError> {
    let mut report = ClosureReport::default();
    let mut visited: HashSet<(String, FetchKind)> = HashSet::new();
    let mut loss_seen: HashSet<FrontierLoss> = HashSet::new();
    let gate = HostGate::new(config.per_host_delay);

    let mut wave: Vec<(String, FetchKind)> = Vec::new();
    for seed in seed_publishers {
        let host = domain::normalize_host(seed);
        if domain::is_valid_hostname(&host) {
            wave.push((host, FetchKind::Ads));
        }
    }

    let mut depth = 0u32;
    while !wave.is_empty() {
        if depth > config.max_depth {
            report.truncated = true;
            break;
        }
        report.depth_reached = depth;

        wave.retain(|task| visited.insert(task.clone()));
        wave.sort();
        wave.dedup();

        let outcomes = run_wave(&wave, transport, store, config, &gate)?;

        let mut next: Vec<(String, FetchKind)> = Vec::new();
        for outcome in outcomes {
            report
                .fetched
                .push((outcome.domain.clone(), outcome.kind, outcome.status));
            if outcome.reused {
                report.reused += 1;
            }
            let Some(body) = outcome.body else { continue };
            let text = String::from_utf8_lossy(&body);
            match outcome.kind {
                FetchKind::Ads => {
                    let file = parse_ads_txt(&outcome.domain, &text);
                    for record in &file.records {
                        next.push((record.exchange_domain.clone(), FetchKind::Sellers));
                    }
                }
                FetchKind::Sellers => {
                    let file = parse_sellers_json(&outcome.domain, &text);
                    for entry in &file.entries {
                        if !entry.seller_type.resells() {
                            continue;
                        }
                        let reason = if entry.is_confidential {
                            Some(LossReason::ConfidentialSeller)
                        } else {
                            match &entry.domain {
                                None => Some(LossReason::MissingDomain),
                                Some(d) if !domain::is_valid_hostname(d) => {
                                    Some(LossReason::InvalidDomain)
                                }
                                Some(d) => {
                                    next.push((d.clone(), FetchKind::Sellers));
                                    None
                                }
                            }
                        };
                        if let Some(reason) = reason {
                            let loss = FrontierLoss {
                                via_exchange: outcome.domain.clone(),
                                seller_id: entry.seller_id.clone(),
                                reason,
                            };
                            if loss_seen.insert(loss.clone()) {
                                report.frontier_losses.push(loss);
                            }
                        }
                    }
                }
            }
        }

        next.retain(|task| !visited.contains(task));
        wave = next;
        depth += 1;
    }

    Ok(report)
}

/// Fetch one wave of tasks across a bounded worker pool. Store access is
/// serialized; network time is not.
fn run_wave(
    tasks: &[(String, FetchKind)],
    transport: &dyn Transport,
    store: &mut SnapshotStore,
    config: &FetchConfig,
    gate: &HostGate,
) -> Result<Vec<TaskOutcome>, StoreError> {
    // Resolve store hits up front, single-threaded.
    let mut outcomes: Vec<Option<TaskOutcome>> = Vec::with_capacity(tasks.len());
    let mut pending: Vec<(usize, String, FetchKind, String)> = Vec::new();
    for (i, (domain, kind)) in tasks.iter().enumerate() {
        if let Some(row) = store.lookup(domain, *kind) {
            let body = store.read_body(row)?;
            outcomes.push(Some(TaskOutcome {
                domain: domain.clone(),
                kind: *kind,
                status: row.status,
                body,
                reused: true,
            }));
        } else {
            outcomes.push(None);
            pending.push((i, domain.clone(), *kind, disclosure_url(store, domain, *kind)));
        }
    }

    if !pending.is_empty() {
        let results: Mutex<Vec<(usize, FetchResult)>> = Mutex::new(Vec::new());
        let cursor = AtomicUsize::new(0);
        let workers = config.parallelism.max(1).min(pending.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some((slot, _, _, url)) = pending.get(i) else {
                        break;
                    };
                    let result = attempt_series(transport, gate, config, url);
                    results.lock().unwrap().push((*slot, result));
                });
            }
        });

        let mut results = results.into_inner().unwrap();
        results.sort_by_key(|(slot, _)| *slot);
        for ((slot, domain, kind, _), (result_slot, result)) in pending.iter().zip(results) {
            debug_assert_eq!(*slot, result_slot);
            store.record(domain, *kind, &result)?;
            outcomes[*slot] = Some(TaskOutcome {
                domain: domain.clone(),
                kind: *kind,
                status: result.status,
                body: result.body,
                reused: false,
            });
        }
    }

    Ok(outcomes.into_iter().map(|o| o.expect("all slots filled")).collect())
}

/// In-memory transport for tests and fixture-driven runs.
#[derive(Default)]
pub struct MemoryTransport {
    routes: HashMap<String, Result<TransportResponse, TransportError>>,
    log: Mutex<Vec<String>>,
}

impl MemoryTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn serve(&mut self, url: &str, body: &str) {
        self.routes.insert(
            url.to_string(),
            Ok(TransportResponse {
                status_code: 200,
                content_type: Some("text/plain".to_string()),
                body: body.as_bytes().to_vec(),
            }),
        );
    }

    pub fn serve_response(&mut self, url: &str, response: TransportResponse) {
        self.routes.insert(url.to_string(), Ok(response));
    }

    pub fn serve_error(&mut self, url: &str, error: TransportError) {
        self.routes.insert(url.to_string(), Err(error));
    }

    /// Convenience: serve `body` at the well-known path for `(domain, kind)`.
    pub fn serve_disclosure(&mut self, domain: &str, kind: FetchKind, body: &str) {
        let url = format!("https://{domain}/{}", kind.file_name());
        self.serve(&url, body);
    }

    /// URLs requested so far, in call order.
    pub fn requests(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }
}

impl Transport for MemoryTransport {
    fn get(&self, url: &str) -> Result<TransportResponse, TransportError> {
        self.log.lock().unwrap().push(url.to_string());
        match self.routes.get(url) {
            Some(entry) => entry.clone(),
            None => Ok(TransportResponse {
                status_code: 404,
                content_type: None,
                body: Vec::new(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn open_store(dir: &std::path::Path) -> SnapshotStore {
        SnapshotStore::open(dir, "2022-02-01").unwrap()
    }

    #[test]
    fn fetch_classifies_and_persists() {
        let dir = tempdir().unwrap();
        let mut store = open_store(dir.path());
        let mut transport = MemoryTransport::new();
        transport.serve_disclosure("pub.example", FetchKind::Ads, "adx.com,p1,DIRECT");

        let config = FetchConfig::immediate();
        let result =
            fetch_disclosure("pub.example", FetchKind::Ads, &transport, &mut store, &config)
                .unwrap();
        assert_eq!(result.status, FetchStatus::Ok);
        assert!(store.has("pub.example", FetchKind::Ads));

        let missing =
            fetch_disclosure("gone.example", FetchKind::Ads, &transport, &mut store, &config)
                .unwrap();
        assert_eq!(missing.status, FetchStatus::NotFound);
    }

    #[test]
    fn binary_payload_is_non_text() {
        let dir = tempdir().unwrap();
        let mut store = open_store(dir.path());
        let mut transport = MemoryTransport::new();
        transport.serve_response(
            "https://img.example/ads.txt",
            TransportResponse {
                status_code: 200,
                content_type: Some("image/png".to_string()),
                body: b"\x89PNG".to_vec(),
            },
        );
        let result = fetch_disclosure(
            "img.example",
            FetchKind::Ads,
            &transport,
            &mut store,
            &FetchConfig::immediate(),
        )
        .unwrap();
        assert_eq!(result.status, FetchStatus::NonText);
        assert!(result.body.is_none());
    }

    #[test]
    fn transient_failures_retry_then_give_up() {
        let dir = tempdir().unwrap();
        let mut store = open_store(dir.path());
        let mut transport = MemoryTransport::new();
        transport.serve_error(
            "https://flaky.example/ads.txt",
            TransportError::Network("connection reset".into()),
        );
        let config = FetchConfig::immediate();
        let result =
            fetch_disclosure("flaky.example", FetchKind::Ads, &transport, &mut store, &config)
                .unwrap();
        assert_eq!(result.status, FetchStatus::NetworkError);
        // First attempt + `retries` more.
        assert_eq!(transport.request_count() as u32, 1 + config.retries);
    }

    #[test]
    fn alternate_path_overrides_sellers_url() {
        let dir = tempdir().unwrap();
        let mut store = open_store(dir.path());
        store.register_alternate_path("bigadx.com", "https://cdn.example/bigadx/sellers.json");
        let mut transport = MemoryTransport::new();
        transport.serve("https://cdn.example/bigadx/sellers.json", "{\"sellers\":[]}");

        let result = fetch_disclosure(
            "bigadx.com",
            FetchKind::Sellers,
            &transport,
            &mut store,
            &FetchConfig::immediate(),
        )
        .unwrap();
        assert_eq!(result.status, FetchStatus::Ok);
        assert_eq!(transport.requests(), vec!["https://cdn.example/bigadx/sellers.json"]);
    }

    #[test]
    fn closure_walks_ads_then_sellers_chain() {
        let dir = tempdir().unwrap();
        let mut store = open_store(dir.path());
        let mut transport = MemoryTransport::new();
        transport.serve_disclosure("pub.example", FetchKind::Ads, "adx.com,p1,DIRECT\n");
        transport.serve_disclosure(
            "adx.com",
            FetchKind::Sellers,
            r#"{"sellers":[
                {"seller_id":"1","seller_type":"PUBLISHER","domain":"pub.example"},
                {"seller_id":"2","seller_type":"INTERMEDIARY","domain":"mid.example"},
                {"seller_id":"3","seller_type":"INTERMEDIARY","is_confidential":1}
            ]}"#,
        );
        transport.serve_disclosure("mid.example", FetchKind::Sellers, r#"{"sellers":[]}"#);

        let report = resolve_closure(
            &["pub.example".to_string()],
            &transport,
            &mut store,
            &FetchConfig::immediate(),
        )
        .unwrap();

        assert_eq!(report.fetched.len(), 3);
        assert_eq!(report.depth_reached, 2);
        assert!(!report.truncated);
        assert_eq!(report.frontier_losses.len(), 1);
        assert_eq!(report.frontier_losses[0].reason, LossReason::ConfidentialSeller);
        assert!(store.has("mid.example", FetchKind::Sellers));
        // PUBLISHER entries do not extend the frontier.
        assert!(!store.has("pub.example", FetchKind::Sellers));
    }

    #[test]
    fn closure_rerun_reuses_store() {
        let dir = tempdir().unwrap();
        let mut store = open_store(dir.path());
        let mut transport = MemoryTransport::new();
        transport.serve_disclosure("pub.example", FetchKind::Ads, "adx.com,p1,DIRECT\n");
        transport.serve_disclosure("adx.com", FetchKind::Sellers, r#"{"sellers":[]}"#);

        let seeds = vec!["pub.example".to_string()];
        let config = FetchConfig::immediate();
        resolve_closure(&seeds, &transport, &mut store, &config).unwrap();
        let first_requests = transport.request_count();

        let report = resolve_closure(&seeds, &transport, &mut store, &config).unwrap();
        assert_eq!(transport.request_count(), first_requests);
        assert_eq!(report.reused, report.fetched.len());
    }

    #[test]
    fn closure_terminates_on_cycles_and_caps_depth() {
        let dir = tempdir().unwrap();
        let mut store = open_store(dir.path());
        let mut transport = MemoryTransport::new();
        transport.serve_disclosure("pub.example", FetchKind::Ads, "a.example,p1,DIRECT\n");
        // a -> b -> a cycle.
        transport.serve_disclosure(
            "a.example",
            FetchKind::Sellers,
            r#"{"sellers":[{"seller_id":"1","seller_type":"INTERMEDIARY","domain":"b.example"}]}"#,
        );
        transport.serve_disclosure(
            "b.example",
            FetchKind::Sellers,
            r#"{"sellers":[{"seller_id":"1","seller_type":"INTERMEDIARY","domain":"a.example"}]}"#,
        );

        let report = resolve_closure(
            &["pub.example".to_string()],
            &transport,
            &mut store,
            &FetchConfig::immediate(),
        )
        .unwrap();
        assert_eq!(report.fetched.len(), 3);
        assert!(!report.truncated);
    }

    #[test]
    fn closure_depth_cap_truncates_long_chains() {
        let dir = tempdir().unwrap();
        let mut store = open_store(dir.path());
        let mut transport = MemoryTransport::new();
        transport.serve_disclosure("pub.example", FetchKind::Ads, "d1.example,p1,DIRECT\n");
        for i in 1..=20 {
            let body = format!(
                r#"{{"sellers":[{{"seller_id":"1","seller_type":"INTERMEDIARY","domain":"d{}.example"}}]}}"#,
                i + 1
            );
            transport.serve_disclosure(&format!("d{i}.example"), FetchKind::Sellers, &body);
        }

        let config = FetchConfig {
            max_depth: 5,
            ..FetchConfig::immediate()
        };
        let report = resolve_closure(
            &["pub.example".to_string()],
            &transport,
            &mut store,
            &config,
        )
        .unwrap();
        assert!(report.truncated);
        assert_eq!(report.depth_reached, 5);
        // Depth 0 is the seed's ads.txt; depths 1..=5 are sellers waves.
        assert_eq!(report.fetched.len(), 6);
    }

    #[test]
    fn host_gate_spaces_same_host_requests() {
        let gate = HostGate::new(Duration::from_millis(30));
        let start = Instant::now();
        gate.acquire("x.example");
        gate.acquire("x.example");
        gate.acquire("y.example"); // different host, no extra wait
        assert!(start.elapsed() >= Duration::from_millis(30));
        assert!(start.elapsed() < Duration::from_millis(90));
    }

    #[test]
    fn host_of_strips_scheme_port_and_path() {
        assert_eq!(host_of("https://adx.example:8443/sellers.json?x=1"), "adx.example");
        assert_eq!(host_of("http://Adx.Example/ads.txt"), "adx.example");
        assert_eq!(host_of("adx.example/ads.txt"), "adx.example");
    }
}
