//! End-to-end batch run: language → dedup → enrich → cluster → store.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::clustering::{daily_clusters, term_counts, Cluster, ClusterKind, StoryTracker, WindowClusterer, WindowDoc};
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::ingest::{ingest_batch, read_corpus_file, AcceptedArticle, DedupIndex, IngestionReport, RawArticle, SourceRegistry};
use crate::linguistic::{Enrichment, LinguisticResources};
use crate::resources;
use crate::store::{ArticleRecord, Store, StoredQuote};
use crate::types::{bucket_of, ArticleId, ClusterId, IdSource, BUCKET_SECS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub ingestion: IngestionReport,
    /// Records skipped because the store already holds their source and
    /// external id.
    pub already_stored: usize,
    pub enriched: usize,
    pub committed: usize,
    /// Articles that ended up in a window cluster.
    pub clustered: usize,
    pub window_clusters: usize,
    pub daily_clusters: usize,
    pub stories: usize,
    pub quotes: usize,
    pub timings: Vec<StageTiming>,
}

struct Timer {
    at: Instant,
    out: Vec<StageTiming>,
}

impl Timer {
    fn new() -> Self {
        Self { at: Instant::now(), out: Vec::new() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.out.push(StageTiming { stage: stage.to_string(), millis: (now - self.at).as_secs_f64() * 1e3 });
        self.at = now;
    }
}

struct Analysed {
    record: ArticleRecord,
    doc: WindowDoc,
    enrichment: Enrichment,
}

fn analyse(id: ArticleId, a: &AcceptedArticle, res: &LinguisticResources) -> Analysed {
    let text = a.raw.full_text();
    let enrichment = res.enrich(id, &text, &a.language, a.source.country);
    let record = ArticleRecord::from_parts(id, &a.raw, &a.language, &a.source, &enrichment);
    let doc = WindowDoc {
        article_id: id,
        published_at: a.raw.published_at,
        title: record.title.clone(),
        term_counts: term_counts(&text, resources::stopwords().get(&a.language)),
        categories: enrichment.categories.clone(),
        entity_ids: enrichment.entity_ids.clone(),
        toponym_ids: enrichment.toponym_ids.clone(),
    };
    Analysed { record, doc, enrichment }
}

/// Enriches in parallel; output order follows input order.
fn analyse_all(accepted: &[AcceptedArticle], first_id: u64, res: &LinguisticResources) -> Vec<Analysed> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = accepted.len().div_ceil(threads).max(64);
    std::thread::scope(|s| {
        let handles: Vec<_> = accepted
            .chunks(chunk)
            .enumerate()
            .map(|(ci, part)| {
                s.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(i, a)| analyse(first_id + (ci * chunk + i) as u64, a, res))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("analysis thread panicked")).collect()
    })
}

/// Window document rebuilt from a stored record, used to resume live
/// clusters. Only title and snippet survive storage.
fn stored_doc(r: &ArticleRecord) -> WindowDoc {
    WindowDoc {
        article_id: r.id,
        published_at: r.published_at,
        title: r.title.clone(),
        term_counts: term_counts(&format!("{}\n{}", r.title, r.snippet), resources::stopwords().get(&r.language)),
        categories: r.categories.clone(),
        entity_ids: r.entity_ids.clone(),
        toponym_ids: r.toponym_refs.clone(),
    }
}

/// Runs one language's sliding window over its arrivals, ticking at the end
/// of every ten-minute bucket that received articles. Returns every
/// cluster touched, live or retired.
fn window_pass(language: &str, docs: Vec<WindowDoc>, store: &Store, cfg: &PipelineConfig, ids: &IdSource) -> Result<Vec<Cluster>> {
    let mut w = WindowClusterer::new(language, cfg.window_for(language), cfg.clustering_threshold);
    for c in store.clusters().filter(|c| c.live && c.kind == ClusterKind::Window && c.language == language) {
        let members = c.member_ids.iter().filter_map(|m| store.get(*m)).map(stored_doc).collect();
        w.restore(c.clone(), members);
    }
    let mut buckets: BTreeMap<DateTime<Utc>, Vec<WindowDoc>> = BTreeMap::new();
    for d in docs {
        buckets.entry(bucket_of(d.published_at)).or_default().push(d);
    }
    let mut out = Vec::new();
    for (bucket, arrivals) in buckets {
        w.tick(bucket + Duration::seconds(BUCKET_SECS), arrivals, ids)?;
        out.extend(w.take_retired());
    }
    out.extend(w.live().cloned());
    Ok(out)
}

/// Processes a batch into the store and flushes it.
pub fn run_pipeline(
    records: Vec<RawArticle>,
    registry: &SourceRegistry,
    cfg: &PipelineConfig,
    res: &LinguisticResources,
    store: &mut Store,
) -> Result<RunReport> {
    let mut timer = Timer::new();
    let mut report = RunReport::default();
    store.merge_sources(registry);
    let registry = store.sources().clone();

    let mut records = records;
    records.sort_by(|a, b| {
        (a.published_at, &a.source_id, &a.external_id).cmp(&(b.published_at, &b.source_id, &b.external_id))
    });
    let before = records.len();
    records.retain(|r| !store.contains_external(&r.source_id, &r.external_id));
    report.already_stored = before - records.len();
    let dedup = DedupIndex::new(Duration::hours(cfg.dedup_window_hours));
    let (ingestion, accepted) = ingest_batch(records, &registry, &dedup, resources::language_profiles());
    report.ingestion = ingestion;
    report.ingestion.received += report.already_stored;
    timer.lap("ingest");

    let article_ids = IdSource::starting_at(store.next_article_id());
    let first_id = article_ids.peek();
    for _ in 0..accepted.len() {
        article_ids.next_id();
    }
    let analysed = analyse_all(&accepted, first_id, res);
    report.enriched = analysed.len();
    timer.lap("enrich");

    let cluster_ids = IdSource::starting_at(store.next_cluster_id());
    let mut by_language: BTreeMap<&str, Vec<WindowDoc>> = BTreeMap::new();
    for a in &analysed {
        by_language.entry(a.record.language.as_str()).or_default().push(a.doc.clone());
    }
    let mut window = Vec::new();
    for (lang, docs) in by_language {
        window.extend(window_pass(lang, docs, store, cfg, &cluster_ids)?);
    }
    let owner: BTreeMap<ArticleId, ClusterId> = window
        .iter()
        .filter(|c| c.merged_into.is_none())
        .flat_map(|c| c.member_ids.iter().map(move |m| (*m, c.id)))
        .collect();
    report.window_clusters = window.iter().filter(|c| c.merged_into.is_none()).count();
    timer.lap("cluster");

    let mut per_day: BTreeMap<(NaiveDate, &str), Vec<WindowDoc>> = BTreeMap::new();
    for a in &analysed {
        per_day.entry((a.record.published_at.date_naive(), a.record.language.as_str())).or_default().push(a.doc.clone());
    }
    let mut tracker = StoryTracker::with_stories(cfg.story_lookback_days, store.stories().cloned());
    let story_ids = IdSource::starting_at(store.next_story_id());
    let mut daily = Vec::new();
    let days: BTreeSet<NaiveDate> = per_day.keys().map(|(d, _)| *d).collect();
    for day in days {
        let mut todays: Vec<Cluster> = per_day
            .range((day, "")..)
            .take_while(|((d, _), _)| *d == day)
            .flat_map(|((_, lang), docs)| daily_clusters(lang, day, docs, cfg.clustering_threshold, &cluster_ids))
            .collect();
        tracker.add_day(&mut todays, &story_ids);
        daily.extend(todays);
    }
    report.daily_clusters = daily.len();
    timer.lap("stories");

    let touched: BTreeSet<_> = daily.iter().filter_map(|c| c.story_id).collect();
    for a in analysed {
        let mut record = a.record;
        record.cluster_id = owner.get(&record.id).copied();
        report.clustered += usize::from(record.cluster_id.is_some());
        for q in &a.enrichment.quotes {
            store.add_quote(StoredQuote::from_quote(q, &record));
            report.quotes += 1;
        }
        store.commit(record)?;
        report.committed += 1;
    }
    for c in window.into_iter().chain(daily) {
        store.put_cluster(c);
    }
    for s in tracker.stories().filter(|s| touched.contains(&s.id)) {
        store.put_story(s.clone());
    }
    report.stories = touched.len();
    store.set_next_ids(article_ids.peek(), cluster_ids.peek(), story_ids.peek());
    store.flush()?;
    timer.lap("store");
    report.timings = timer.out;
    Ok(report)
}

/// Reads a JSON Lines corpus and runs it.
pub fn run_corpus_file(path: &Path, registry: &SourceRegistry, cfg: &PipelineConfig, res: &LinguisticResources, store: &mut Store) -> Result<RunReport> {
    let records = read_corpus_file(path)?;
    run_pipeline(records, registry, cfg, res, store)
}
