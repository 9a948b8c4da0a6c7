//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the verdicts are always printed.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{DateTime, Datelike, Utc};
use http_body_util::BodyExt;
use newswatch_cli::server::{router, AppState};
use newswatch_core::alerting::{alert_board, alert_inputs, board_from_inputs, score_cells, AlertCell};
use newswatch_core::api::{canonical_json, Snapshot};
use newswatch_core::channels::evaluate;
use newswatch_core::clustering::{cluster_window, select_medoid, vectorize, ClusterKind, DocVector, DEFAULT_THRESHOLD};
use newswatch_core::export::{validate_geojson, validate_kml, MapFilter, MIN_MAP_MEMBERS};
use newswatch_core::graphs::{associated_entities, related_entities, CooccurrenceIndex};
use newswatch_core::linguistic::{LinguisticResources, Resolution};
use newswatch_core::pipeline::run_pipeline;
use newswatch_core::synthetic::{burst_corpus, long_body_articles, random_channel_expr, random_store, rng, two_topic_docs, BurstCorpus, BurstSpec};
use newswatch_core::{AlertConfig, ArticleId, PipelineConfig, Store};
use rand::seq::SliceRandom;
use serde_json::Value;
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Burst {
    store: Store,
    corpus: BurstCorpus,
    elapsed: Duration,
}

fn burst() -> &'static Burst {
    static BURST: OnceLock<Burst> = OnceLock::new();
    BURST.get_or_init(|| {
        let corpus = burst_corpus(&BurstSpec::default());
        let mut store = Store::in_memory();
        let started = Instant::now();
        run_pipeline(corpus.articles.clone(), &corpus.sources, &PipelineConfig::default(), &LinguisticResources::bundled(), &mut store)
            .expect("pipeline runs");
        let elapsed = started.elapsed();
        Burst { store, corpus, elapsed }
    })
}

fn burst_detection() -> Outcome {
    let b = burst();
    let cfg = AlertConfig::default();
    let board = alert_board(&b.store, b.corpus.clock, &cfg).map_err(|e| e.to_string())?;
    let rank = board.iter().position(|c| (c.country, c.category_id.clone()) == b.corpus.burst).map(|i| i + 1);
    // weekday factor from generated daily totals over the 14 history days
    let daily = b.corpus.global_daily();
    let history = &daily[..daily.len() - 1];
    let final_day = *b.corpus.days.last().unwrap();
    let same: Vec<f64> = history
        .iter()
        .zip(&b.corpus.days)
        .filter(|(_, d)| d.weekday() == final_day.weekday())
        .map(|(n, _)| *n as f64)
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let all: Vec<f64> = history.iter().map(|n| *n as f64).collect();
    let dow = mean(&same) / mean(&all);
    let oracle = 10.0 / (2.0 * dow);
    let score = board.first().map_or(0.0, |c| c.score);
    let err = (score - oracle).abs() / oracle;
    check(
        rank == Some(1) && err <= 0.10 && b.elapsed < Duration::from_secs(10),
        format!("rank {rank:?}, score {score:.4}, oracle {oracle:.4} (rel. err {err:.4}), pipeline {:.2?}", b.elapsed),
    )
}

fn keys(cells: &[AlertCell]) -> Vec<(String, String)> {
    cells.iter().map(|c| (c.country.to_string(), c.category_id.clone())).collect()
}

fn scale_invariance() -> Outcome {
    let b = burst();
    let cfg = AlertConfig::default();
    let base = alert_inputs(&b.store, b.corpus.clock, &cfg).map_err(|e| e.to_string())?;
    let s1 = score_cells(&base, &cfg).unwrap();
    let b1 = board_from_inputs(&base, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    let mut ranks_equal = true;
    for k in [2, 10] {
        let scaled = base.scaled(k);
        let sk = score_cells(&scaled, &cfg).unwrap();
        let bk = board_from_inputs(&scaled, &cfg).unwrap();
        ranks_equal &= keys(&s1) == keys(&sk) && keys(&b1) == keys(&bk[..b1.len().min(bk.len())]);
        for (x, y) in s1.iter().zip(&sk) {
            worst = worst.max((x.score - y.score).abs());
        }
    }
    check(
        worst <= 1e-9 && ranks_equal,
        format!("{} cells, max |score change| {worst:.2e}, ranks unchanged: {ranks_equal}", s1.len()),
    )
}

fn medoid_oracle() -> Outcome {
    let mut r = rng(2024);
    let mut agree = 0;
    for _ in 0..100 {
        let m = support::random_members(&mut r);
        let refs: Vec<(&DocVector, DateTime<Utc>)> = m.iter().map(|(v, t)| (v, *t)).collect();
        agree += usize::from(select_medoid(&refs) == Some(support::medoid_oracle(&m)));
    }
    check(agree == 100, format!("{agree}/100 clusters agree with brute force"))
}

fn clustering_determinism() -> Outcome {
    let (docs, labels) = two_topic_docs(7, 20);
    let mut dup_pairs = Vec::new();
    for (i, a) in docs.iter().enumerate() {
        for b in &docs[i + 1..] {
            if a.term_counts == b.term_counts {
                dup_pairs.push((a.article_id, b.article_id));
            }
        }
    }
    let want: BTreeSet<BTreeSet<ArticleId>> =
        (0..2).map(|t| labels.iter().filter(|(_, l)| **l == t).map(|(id, _)| *id).collect()).collect();
    let mut r = rng(8);
    let mut good = 0;
    for _ in 0..100 {
        let mut shuffled = docs.clone();
        shuffled.shuffle(&mut r);
        let groups = cluster_window(&vectorize(&shuffled).vectors, DEFAULT_THRESHOLD);
        let of: BTreeMap<ArticleId, usize> = groups.iter().enumerate().flat_map(|(g, ids)| ids.iter().map(move |id| (*id, g))).collect();
        let got: BTreeSet<BTreeSet<ArticleId>> = groups.iter().map(|g| g.iter().copied().collect()).collect();
        let dups_ok = dup_pairs.iter().all(|(a, b)| of[a] == of[b]);
        good += usize::from(groups.len() == 2 && got == want && dups_ok);
    }
    check(good == 100, format!("{good}/100 permutations give the 2 topics, {} duplicate pairs co-clustered", dup_pairs.len()))
}

fn channel_algebra() -> Outcome {
    let store = random_store(31, 1000);
    let mut r = rng(32);
    let clock: DateTime<Utc> = "2024-01-20T00:00:00Z".parse().unwrap();
    let mut agree = 0;
    let mut max_depth = 0;
    for i in 0..500 {
        let expr = random_channel_expr(&mut r, 4);
        max_depth = max_depth.max(expr.depth());
        let c = (i % 2 == 0).then_some(clock);
        agree += usize::from(evaluate(&expr, &store, c).map_err(|e| e.to_string())? == support::scan(&expr, &store, c));
    }
    check(agree == 500 && max_depth <= 4, format!("{agree}/500 expressions (max depth {max_depth}) equal the linear scan"))
}

fn geotag_rules() -> Outcome {
    let res = LinguisticResources::bundled();
    let hilton = res.enrich(1, "Paris Hilton arrived at the premiere in a red dress.", "en", "ZZ".parse().unwrap());
    let hilton_ok = hilton.places.is_empty();
    let texas = res.enrich(2, "A tornado touched down near Paris, Texas on Tuesday.", "en", "FR".parse().unwrap());
    let texas_ok = texas.places.iter().find(|p| p.surface == "Paris").is_some_and(|p| {
        let t = res.toponyms.get(p.toponym_id).unwrap();
        t.country.as_str() == "US" && t.admin1.as_deref() == Some("Texas") && p.resolution == Resolution::Disambiguator
    });
    let cases = support::homograph_fixtures().2.len();
    let failures = support::homograph_failures();
    check(
        hilton_ok && texas_ok && cases == 50 && failures.is_empty(),
        format!(
            "Paris Hilton not a place: {hilton_ok}, Paris Texas in US/Texas: {texas_ok}, homographs {}/{cases}{}",
            cases - failures.len(),
            failures.first().map(|f| format!(" (first failure {f})")).unwrap_or_default()
        ),
    )
}

fn vip_suppression() -> Outcome {
    let (p, e1, e2) = (1, 2, 3);
    let idx = CooccurrenceIndex::from_counts(BTreeMap::from([(p, 10), (e1, 5), (e2, 100)]), [((p, e1), 5), ((p, e2), 5)]);
    let assoc = associated_entities(p, &idx, 10).map_err(|e| e.to_string())?;
    let related = related_entities(p, &idx, 10).map_err(|e| e.to_string())?;
    let order: Vec<u64> = assoc.iter().map(|a| a.entity_id).collect();
    let tie = related.len() == 2 && related[0].count == related[1].count;
    check(
        order == [e1, e2] && assoc[0].score > assoc[1].score && tie,
        format!(
            "associated e1 {:.3} > e2 {:.4}; related counts {:?}",
            assoc[0].score,
            assoc.get(1).map_or(0.0, |a| a.score),
            related.iter().map(|r| r.count).collect::<Vec<_>>()
        ),
    )
}

fn files(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files(&path, out);
        } else {
            out.push(path);
        }
    }
}

/// Positions of `b<article>w<position>` body tokens in `bytes`.
fn body_positions(bytes: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    let digits = |from: usize| bytes[from..].iter().take_while(|b| b.is_ascii_digit()).count();
    let mut i = 0;
    while i < bytes.len() {
        let starts_token = bytes[i] == b'b' && (i == 0 || !bytes[i - 1].is_ascii_alphanumeric());
        if starts_token {
            let a = digits(i + 1);
            if a > 0 && bytes.get(i + 1 + a) == Some(&b'w') {
                let p = digits(i + 2 + a);
                if p > 0 {
                    let s = std::str::from_utf8(&bytes[i + 2 + a..i + 2 + a + p]).unwrap();
                    out.push(s.parse().unwrap());
                    i += 2 + a + p;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

fn copyright_audit() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (articles, sources) = long_body_articles(5, 200, 500);
    let mut store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    let report = run_pipeline(articles, &sources, &PipelineConfig::default(), &LinguisticResources::bundled(), &mut store)
        .map_err(|e| e.to_string())?;
    drop(store);
    let mut paths = Vec::new();
    files(dir.path(), &mut paths);
    let mut seen = 0;
    let mut beyond = Vec::new();
    for path in &paths {
        let positions = body_positions(&std::fs::read(path).unwrap());
        seen += positions.len();
        if let Some(p) = positions.iter().find(|p| **p >= 40) {
            beyond.push(format!("{} (w{p})", path.display()));
        }
    }
    check(
        report.committed == 200 && seen > 0 && beyond.is_empty(),
        format!(
            "{} articles, {} files, {seen} snippet tokens, {} files with body text beyond word 40{}",
            report.committed,
            paths.len(),
            beyond.len(),
            beyond.first().map(|b| format!(": {b}")).unwrap_or_default()
        ),
    )
}

fn map_rule() -> Outcome {
    let b = burst();
    let res = LinguisticResources::bundled();
    let cfg = PipelineConfig::default();
    let snap = Snapshot::new(&b.store, &res, &cfg.alerts);
    let filter = MapFilter::default();
    let geojson = snap.map_geojson(&filter).to_string();
    let kml = snap.map_kml(&filter);
    let n_geo = validate_geojson(&geojson).map_err(|e| e.to_string())?;
    let n_kml = validate_kml(&kml).map_err(|e| e.to_string())?;
    let eligible = |min: usize| -> BTreeSet<u64> {
        b.store
            .clusters()
            .filter(|c| c.kind == ClusterKind::Window && c.merged_into.is_none() && c.size() >= min && !c.toponyms.is_empty())
            .map(|c| c.id)
            .collect()
    };
    let want = eligible(MIN_MAP_MEMBERS);
    let singletons = eligible(1).len() - want.len();
    let doc: Value = serde_json::from_str(&geojson).unwrap();
    let geo_ids: BTreeSet<u64> = doc["features"].as_array().unwrap().iter().map(|f| f["properties"]["cluster_id"].as_u64().unwrap()).collect();
    let min_size = doc["features"].as_array().unwrap().iter().filter_map(|f| f["properties"]["size"].as_u64()).min();
    let kml_ids: BTreeSet<u64> = kml
        .split("<Placemark id=\"cluster-")
        .skip(1)
        .map(|s| s[..s.find('"').unwrap()].parse().unwrap())
        .collect();
    check(
        !want.is_empty() && singletons > 0 && geo_ids == want && kml_ids == want && n_geo == want.len() && n_kml == want.len(),
        format!(
            "{} clusters with >= {MIN_MAP_MEMBERS} members exported (smallest {min_size:?}), {singletons} placeable singletons left out, both documents valid",
            want.len()
        ),
    )
}

fn search_oracle() -> Outcome {
    let store = random_store(11, 1000);
    let mut r = rng(12);
    let mut agree = 0;
    let mut nonempty = 0;
    for _ in 0..200 {
        let q = support::random_query(&mut r);
        let got: Vec<ArticleId> = store.search(&q).iter().map(|r| r.id).collect();
        let want = support::scan_search(&store, &q);
        nonempty += usize::from(!want.is_empty());
        agree += usize::from(got == want);
    }
    check(agree == 200 && nonempty > 50, format!("{agree}/200 queries equal the linear scan ({nonempty} non-empty)"))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_newswatch")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("newswatch {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

async fn http_get(state: Arc<AppState>, path: &str) -> Result<Vec<u8>, String> {
    let resp = router(state).oneshot(Request::get(path).body(Body::empty()).unwrap()).await.map_err(|e| e.to_string())?;
    if resp.status() != StatusCode::OK {
        return Err(format!("GET {path}: {}", resp.status()));
    }
    Ok(resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes().to_vec())
}

fn canonical(bytes: &[u8]) -> Result<String, String> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    canonical_json(&v).map_err(|e| e.to_string())
}

fn cross_interface() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let store_dir = dir.path().join("store");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    run_cli(&["generate", "--out", &s(&gen)])?;
    run_cli(&["--store", &s(&store_dir), "ingest", &s(&gen.join("corpus.jsonl")), "--sources", &s(&gen.join("sources.json"))])?;
    let cli_json = run_cli(&["--store", &s(&store_dir), "alerts"])?;
    let cli_csv = run_cli(&["--store", &s(&store_dir), "--format", "csv", "alerts"])?;
    let state = Arc::new(AppState {
        store: Store::open(&store_dir).map_err(|e| e.to_string())?,
        resources: LinguisticResources::bundled(),
        alerts: PipelineConfig::default().alerts,
        clock: None,
        profiles: None,
    });
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (http_json, http_csv) = rt.block_on(async {
        Ok::<_, String>((http_get(state.clone(), "/v1/alerts").await?, http_get(state, "/v1/alerts?format=csv").await?))
    })?;
    let (a, b) = (canonical(&cli_json)?, canonical(&http_json)?);
    let cells = serde_json::from_str::<Value>(&a).unwrap()["page"]["items"].as_array().map_or(0, Vec::len);
    check(
        a == b && cli_csv == http_csv && cells > 0,
        format!("{} canonical bytes, {cells} cells, JSON identical: {}, CSV identical: {}", a.len(), a == b, cli_csv == http_csv),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("burst detection", burst_detection),
        ("scale invariance", scale_invariance),
        ("medoid oracle", medoid_oracle),
        ("clustering determinism", clustering_determinism),
        ("channel algebra oracle", channel_algebra),
        ("geotag rules", geotag_rules),
        ("VIP suppression", vip_suppression),
        ("copyright audit", copyright_audit),
        ("map rule", map_rule),
        ("search oracle", search_oracle),
        ("cross-interface equivalence", cross_interface),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
