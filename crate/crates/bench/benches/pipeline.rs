//! Benchmarks over the pipeline's hot paths: disclosure parsing, pool
//! detection, filter-list matching, and bid-flow ID matching. Inputs are
//! synthetic but shaped like crawl data (shared account IDs, mixed record
//! and comment lines, mostly-miss URL classification).

use std::fmt::Write;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use adchain_core::adstxt::{parse_ads_txt, AdsTxtFile};
use adchain_core::pools::{detect_pools, RelationshipScope};
use adchain_core::rtb::{classify_ad_flow, extract_kv, match_ids, FilterRuleSet, Flow, IdIndex};
use adchain_core::sellersjson::parse_sellers_json;

fn sellers_body(entries: usize) -> String {
    let mut body = String::with_capacity(entries * 110 + 64);
    body.push_str("{\"version\":\"1.0\",\"contact_email\":\"ops@adx.example\",\"sellers\":[");
    for i in 0..entries {
        if i > 0 {
            body.push(',');
        }
        let seller_type = match i % 3 {
            0 => "PUBLISHER",
            1 => "INTERMEDIARY",
            _ => "BOTH",
        };
        write!(
            body,
            "{{\"seller_id\":\"s{i}\",\"name\":\"Seller {i}\",\"domain\":\"d{i}.example\",\"seller_type\":\"{seller_type}\"}}"
        )
        .unwrap();
    }
    body.push_str("]}");
    body
}

/// Mostly records, with the comment and variable lines real files carry.
/// IDs come from a small shared space so corpora built from this pool.
fn ads_body(lines: usize, rng: &mut ChaCha8Rng) -> String {
    let mut body = String::new();
    for i in 0..lines {
        match i % 10 {
            8 => writeln!(body, "# refreshed block {i}").unwrap(),
            9 => writeln!(body, "ownerdomain=media{i}.example").unwrap(),
            _ => {
                let relationship = if rng.gen_bool(0.7) { "DIRECT" } else { "RESELLER" };
                let exchange = rng.gen_range(0..40);
                let id = rng.gen_range(0..3_000);
                writeln!(body, "adx{exchange}.example, acct{id:05}, {relationship}").unwrap();
            }
        }
    }
    body
}

fn ads_corpus(files: usize, rng: &mut ChaCha8Rng) -> Vec<AdsTxtFile> {
    (0..files)
        .map(|i| parse_ads_txt(&format!("pub{i:05}.example"), &ads_body(10, rng)))
        .collect()
}

fn filter_list(rules: usize) -> String {
    let mut list = String::from("! synthetic block list\n");
    for i in 0..rules {
        match i % 4 {
            0 => writeln!(list, "||ads{i}.example^").unwrap(),
            1 => writeln!(list, "/track/{i}/*").unwrap(),
            2 => writeln!(list, "banner-{i}").unwrap(),
            _ => writeln!(list, "|https://cdn{i}.example/pixel|").unwrap(),
        }
    }
    list
}

fn urls(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                format!("https://sub.ads{}.example/serve?slot={i}", i % 300)
            } else {
                format!("https://content{i}.example/article/{i}")
            }
        })
        .collect()
}

fn id_index(ids: usize) -> IdIndex {
    let mut index = IdIndex::new();
    for i in 0..ids {
        index.add(&format!("adx{}.example", i % 25), &format!("token{i:06}"));
    }
    index
}

fn flows(n: usize, rng: &mut ChaCha8Rng) -> Vec<Flow> {
    (0..n)
        .map(|i| {
            let url = if rng.gen_bool(0.3) {
                format!(
                    "https://bid{i}.example/rtb?pid=token{:06}&cb={i}",
                    rng.gen_range(0..20_000)
                )
            } else {
                format!("https://bid{i}.example/rtb?cb={i}")
            };
            Flow {
                url,
                post_body: (i % 3 == 0).then(|| {
                    format!(
                        "{{\"siteid\":\"token{:06}\",\"w\":300,\"h\":250}}",
                        rng.gen_range(0..20_000)
                    )
                }),
                response_body: None,
            }
        })
        .collect()
}

fn bench_parsing(c: &mut Criterion) {
    let mut group = c.benchmark_group("parse");
    for entries in [1_000usize, 50_000] {
        let body = sellers_body(entries);
        group.throughput(Throughput::Elements(entries as u64));
        group.bench_function(format!("sellers_json_{entries}_entries"), |b| {
            b.iter(|| parse_sellers_json("adx.example", black_box(&body)))
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ads = ads_body(5_000, &mut rng);
    group.throughput(Throughput::Elements(5_000));
    group.bench_function("ads_txt_5000_lines", |b| {
        b.iter(|| parse_ads_txt("pub.example", black_box(&ads)))
    });
    group.finish();
}

fn bench_pools(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let corpus = ads_corpus(2_000, &mut rng);
    let mut group = c.benchmark_group("pools");
    group.sample_size(30);
    group.throughput(Throughput::Elements(corpus.len() as u64));
    group.bench_function("detect_2000_files", |b| {
        b.iter(|| detect_pools(black_box(&corpus), RelationshipScope::Any))
    });
    group.finish();
}

fn bench_filters(c: &mut Criterion) {
    let list = filter_list(300);
    let rules = FilterRuleSet::compile(&list);
    let urls = urls(2_000);

    let mut group = c.benchmark_group("filters");
    group.bench_function("compile_300_rules", |b| {
        b.iter(|| FilterRuleSet::compile(black_box(&list)))
    });
    group.throughput(Throughput::Elements(urls.len() as u64));
    group.bench_function("classify_2000_urls", |b| {
        b.iter(|| {
            urls.iter()
                .filter(|url| classify_ad_flow(black_box(url), &rules))
                .count()
        })
    });
    group.finish();
}

fn bench_mining(c: &mut Criterion) {
    let index = id_index(20_000);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let flows = flows(1_000, &mut rng);

    let mut group = c.benchmark_group("rtb");
    group.throughput(Throughput::Elements(flows.len() as u64));
    group.bench_function("extract_and_match_1000_flows", |b| {
        b.iter(|| {
            let mut hits = 0usize;
            for flow in &flows {
                let kvs = extract_kv(black_box(flow));
                hits += match_ids(&flow.url, &kvs, "page.example", &index).len();
            }
            hits
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_parsing,
    bench_pools,
    bench_filters,
    bench_mining
);
criterion_main!(benches);
