//! Article, cluster, story and quote persistence plus the read-side
//! indexes built over it.
//!
//! On-disk layout under the store directory:
//!
//! ```text
//! manifest.json              next ids, segment list
//! sources.json               source registry
//! segments/articles-N.jsonl  append-only article records
//! clusters.jsonl             rewritten on flush
//! stories.jsonl              rewritten on flush
//! quotes.jsonl               rewritten on flush
//! ```
//!
//! The inverted index, facet postings and count cube live in memory and are
//! rebuilt when a store is opened.

mod cube;
mod record;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

pub use cube::{CountCube, CountRow, CubeFilter, CubeKey, Dim};
pub use record::{ArticleRecord, NO_CATEGORY, SNIPPET_WORDS};

use crate::clustering::{Cluster, Story};
use crate::ingest::SourceRegistry;
use crate::linguistic::Quote;
use crate::text;
use crate::types::{ArticleId, ClusterId, CountryCode, EntityId, StoryId};

pub const DEFAULT_RETENTION_DAYS: i64 = 400;
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("article {0} already stored")]
    DuplicateId(ArticleId),
    #[error("article {id}: snippet has {words} words, limit is {SNIPPET_WORDS}")]
    SnippetTooLong { id: ArticleId, words: usize },
    #[error("{file}:{line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
    #[error("unsupported store version {0}")]
    Version(u32),
    #[error("store is read-only (opened in memory)")]
    NoDirectory,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A quote as persisted. The quoted text is kept only when it already
/// appears in the stored title or snippet; otherwise only the attribution
/// survives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredQuote {
    pub article_id: ArticleId,
    pub speaker_entity: Option<EntityId>,
    pub text: Option<String>,
    pub mentioned_entities: BTreeSet<EntityId>,
}

impl StoredQuote {
    pub fn from_quote(q: &Quote, record: &ArticleRecord) -> Self {
        let phrase = text::words(&q.text);
        let visible = text::contains_phrase(&text::words(&record.title), &phrase)
            || text::contains_phrase(&text::words(&record.snippet), &phrase);
        Self {
            article_id: q.article_id,
            speaker_entity: q.speaker_entity,
            text: visible.then(|| q.text.clone()),
            mentioned_entities: q.mentioned_entities.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    next_article_id: u64,
    next_cluster_id: u64,
    next_story_id: u64,
    segments: Vec<String>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self { version: MANIFEST_VERSION, next_article_id: 1, next_cluster_id: 1, next_story_id: 1, segments: Vec::new() }
    }
}

/// Search predicate: every term must occur in title or snippet, and every
/// set filter must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchQuery {
    #[serde(default)]
    pub terms: Vec<String>,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub country_source: Option<CountryCode>,
    #[serde(default)]
    pub country_about: Option<CountryCode>,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub entity: Option<EntityId>,
    #[serde(default)]
    pub from: Option<DateTime<Utc>>,
    #[serde(default)]
    pub to: Option<DateTime<Utc>>,
}

impl SearchQuery {
    pub fn terms(terms: &str) -> Self {
        Self { terms: vec![terms.to_string()], ..Self::default() }
    }

    /// Normalised query terms: every word of every term, lowercased.
    pub fn words(&self) -> BTreeSet<String> {
        self.terms.iter().flat_map(|t| text::words(t)).collect()
    }

    /// Whether `r` satisfies the query, evaluated directly on the record.
    pub fn matches(&self, r: &ArticleRecord) -> bool {
        let words = r.search_terms();
        self.words().iter().all(|w| words.contains(w))
            && self.language.as_ref().is_none_or(|l| r.language == *l)
            && self.country_source.is_none_or(|c| r.country_of_source == c)
            && self.country_about.is_none_or(|c| r.countries_about.contains(&c))
            && self.category.as_ref().is_none_or(|c| r.categories.contains(c))
            && self.entity.is_none_or(|e| r.entity_ids.contains(&e))
            && self.from.is_none_or(|t| r.published_at >= t)
            && self.to.is_none_or(|t| r.published_at < t)
    }
}

/// Postings are positions into `Store::records`, kept sorted.
type Postings = Vec<u32>;

#[derive(Debug, Default)]
struct Indexes {
    by_id: HashMap<ArticleId, u32>,
    external: HashSet<(String, String)>,
    terms: HashMap<String, Postings>,
    categories: HashMap<String, Postings>,
    languages: HashMap<String, Postings>,
    country_source: HashMap<CountryCode, Postings>,
    country_about: HashMap<CountryCode, Postings>,
    entities: HashMap<EntityId, Postings>,
    clusters: HashMap<ClusterId, Postings>,
    cube: CountCube,
}

impl Indexes {
    fn add(&mut self, pos: u32, r: &ArticleRecord) {
        self.by_id.insert(r.id, pos);
        self.external.insert((r.source_id.clone(), r.external_id.clone()));
        for t in r.search_terms() {
            self.terms.entry(t).or_default().push(pos);
        }
        for c in &r.categories {
            self.categories.entry(c.clone()).or_default().push(pos);
        }
        self.languages.entry(r.language.clone()).or_default().push(pos);
        self.country_source.entry(r.country_of_source).or_default().push(pos);
        for c in &r.countries_about {
            self.country_about.entry(*c).or_default().push(pos);
        }
        for e in &r.entity_ids {
            self.entities.entry(*e).or_default().push(pos);
        }
        if let Some(c) = r.cluster_id {
            self.clusters.entry(c).or_default().push(pos);
        }
        self.cube.add(r);
    }
}

/// A facet of the article table that channel expressions select on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Facet<'a> {
    Category(&'a str),
    Language(&'a str),
    CountrySource(CountryCode),
    CountryAbout(CountryCode),
    Entity(EntityId),
    Cluster(ClusterId),
}

#[derive(Debug)]
pub struct Store {
    dir: Option<PathBuf>,
    manifest: Manifest,
    sources: SourceRegistry,
    records: Vec<ArticleRecord>,
    idx: Indexes,
    clusters: BTreeMap<ClusterId, Cluster>,
    stories: BTreeMap<StoryId, Story>,
    quotes: Vec<StoredQuote>,
    writer: Option<BufWriter<File>>,
    dirty: bool,
}

impl Default for Store {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            manifest: Manifest::default(),
            sources: SourceRegistry::new(),
            records: Vec::new(),
            idx: Indexes::default(),
            clusters: BTreeMap::new(),
            stories: BTreeMap::new(),
            quotes: Vec::new(),
            writer: None,
            dirty: false,
        }
    }

    /// Opens the store at `dir`, creating an empty one if it does not exist.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join("segments"))?;
        let mut store = Self { dir: Some(dir.clone()), ..Self::in_memory() };
        let manifest_path = dir.join("manifest.json");
        if manifest_path.exists() {
            let raw = fs::read_to_string(&manifest_path)?;
            store.manifest = serde_json::from_str(&raw).map_err(|e| corrupt(&manifest_path, e.line(), e))?;
            if store.manifest.version != MANIFEST_VERSION {
                return Err(StoreError::Version(store.manifest.version));
            }
        }
        let sources_path = dir.join("sources.json");
        if sources_path.exists() {
            let raw = fs::read_to_string(&sources_path)?;
            store.sources = SourceRegistry::from_json(&raw).map_err(|e| corrupt(&sources_path, 0, e))?;
        }
        for seg in store.manifest.segments.clone() {
            for r in read_jsonl::<ArticleRecord>(&dir.join("segments").join(&seg))? {
                store.insert_indexed(r)?;
            }
        }
        store.clusters = read_jsonl::<Cluster>(&dir.join("clusters.jsonl"))?.into_iter().map(|c| (c.id, c)).collect();
        store.stories = read_jsonl::<Story>(&dir.join("stories.jsonl"))?.into_iter().map(|s| (s.id, s)).collect();
        store.quotes = read_jsonl(&dir.join("quotes.jsonl"))?;
        Ok(store)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn sources(&self) -> &SourceRegistry {
        &self.sources
    }

    pub fn set_sources(&mut self, sources: SourceRegistry) {
        self.sources = sources;
        self.dirty = true;
    }

    pub fn merge_sources(&mut self, sources: &SourceRegistry) {
        self.sources.merge(sources);
        self.dirty = true;
    }

    pub fn next_article_id(&self) -> u64 {
        self.manifest.next_article_id
    }

    pub fn next_cluster_id(&self) -> u64 {
        self.manifest.next_cluster_id
    }

    pub fn next_story_id(&self) -> u64 {
        self.manifest.next_story_id
    }

    /// Records the id counters to resume from on the next run.
    pub fn set_next_ids(&mut self, article: u64, cluster: u64, story: u64) {
        let m = &mut self.manifest;
        m.next_article_id = m.next_article_id.max(article);
        m.next_cluster_id = m.next_cluster_id.max(cluster);
        m.next_story_id = m.next_story_id.max(story);
        self.dirty = true;
    }

    fn insert_indexed(&mut self, r: ArticleRecord) -> Result<(), StoreError> {
        if self.idx.by_id.contains_key(&r.id) {
            return Err(StoreError::DuplicateId(r.id));
        }
        let words = r.snippet_word_count();
        if words > SNIPPET_WORDS {
            return Err(StoreError::SnippetTooLong { id: r.id, words });
        }
        let pos = self.records.len() as u32;
        self.idx.add(pos, &r);
        self.manifest.next_article_id = self.manifest.next_article_id.max(r.id + 1);
        self.records.push(r);
        Ok(())
    }

    /// Appends a record. It becomes visible to queries immediately and is
    /// durable after [`Store::flush`].
    pub fn commit(&mut self, record: ArticleRecord) -> Result<(), StoreError> {
        let line = serde_json::to_string(&record).expect("record serialises");
        self.insert_indexed(record)?;
        if self.dir.is_some() {
            self.segment_writer()?.write_all(format!("{line}\n").as_bytes())?;
        }
        self.dirty = true;
        Ok(())
    }

    fn segment_writer(&mut self) -> Result<&mut BufWriter<File>, StoreError> {
        if self.writer.is_none() {
            let dir = self.dir.as_ref().ok_or(StoreError::NoDirectory)?;
            let name = fresh_segment_name(dir, self.manifest.segments.len() + 1);
            let file = OpenOptions::new().create_new(true).append(true).open(dir.join("segments").join(&name))?;
            self.manifest.segments.push(name);
            self.writer = Some(BufWriter::new(file));
        }
        Ok(self.writer.as_mut().expect("writer just set"))
    }

    pub fn put_cluster(&mut self, cluster: Cluster) {
        self.clusters.insert(cluster.id, cluster);
        self.dirty = true;
    }

    pub fn put_story(&mut self, story: Story) {
        self.stories.insert(story.id, story);
        self.dirty = true;
    }

    pub fn add_quote(&mut self, quote: StoredQuote) {
        self.quotes.push(quote);
        self.dirty = true;
    }

    /// Writes pending segment data, clusters, stories, quotes, sources and
    /// the manifest. A no-op for in-memory stores.
    pub fn flush(&mut self) -> Result<(), StoreError> {
        let Some(dir) = self.dir.clone() else { return Ok(()) };
        if let Some(mut w) = self.writer.take() {
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        if !self.dirty {
            return Ok(());
        }
        write_jsonl(&dir.join("clusters.jsonl"), self.clusters.values())?;
        write_jsonl(&dir.join("stories.jsonl"), self.stories.values())?;
        write_jsonl(&dir.join("quotes.jsonl"), self.quotes.iter())?;
        write_atomic(&dir.join("sources.json"), self.sources.to_json().as_bytes())?;
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
        write_atomic(&dir.join("manifest.json"), manifest.as_bytes())?;
        self.dirty = false;
        Ok(())
    }

    /// Rebuilds every in-memory index from the records.
    pub fn reindex(&mut self) {
        let records = std::mem::take(&mut self.records);
        self.idx = Indexes::default();
        for (pos, r) in records.iter().enumerate() {
            self.idx.add(pos as u32, r);
        }
        self.records = records;
    }

    /// Drops articles published before `cutoff`, along with their quotes and
    /// any cluster or story that no longer has stored members. Segments are
    /// compacted into one. Returns the number of articles removed.
    pub fn purge_before(&mut self, cutoff: DateTime<Utc>) -> Result<usize, StoreError> {
        let before = self.records.len();
        self.records.retain(|r| r.published_at >= cutoff);
        let removed = before - self.records.len();
        if removed == 0 {
            return Ok(0);
        }
        self.reindex();
        let live: BTreeSet<ArticleId> = self.records.iter().map(|r| r.id).collect();
        self.quotes.retain(|q| live.contains(&q.article_id));
        self.clusters.retain(|_, c| c.member_ids.iter().any(|m| live.contains(m)));
        let clusters = &self.clusters;
        self.stories.retain(|_, s| s.daily_cluster_ids.values().any(|c| clusters.contains_key(c)));
        if let Some(dir) = self.dir.clone() {
            self.writer = None;
            let old = std::mem::take(&mut self.manifest.segments);
            let name = fresh_segment_name(&dir, old.len() + 1);
            write_jsonl(&dir.join("segments").join(&name), self.records.iter())?;
            self.manifest.segments.push(name.clone());
            for seg in old.into_iter().filter(|s| *s != name) {
                let _ = fs::remove_file(dir.join("segments").join(seg));
            }
        }
        self.dirty = true;
        self.flush()?;
        Ok(removed)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ArticleRecord] {
        &self.records
    }

    /// Whether an article with this source and external id is stored.
    pub fn contains_external(&self, source_id: &str, external_id: &str) -> bool {
        self.idx.external.contains(&(source_id.to_string(), external_id.to_string()))
    }

    pub fn get(&self, id: ArticleId) -> Option<&ArticleRecord> {
        self.idx.by_id.get(&id).map(|&p| &self.records[p as usize])
    }

    /// Latest publication time in the store, the default analysis clock.
    pub fn latest_published(&self) -> Option<DateTime<Utc>> {
        self.records.iter().map(|r| r.published_at).max()
    }

    pub fn cube(&self) -> &CountCube {
        &self.idx.cube
    }

    pub fn counts(&self, filter: &CubeFilter, dims: &[Dim]) -> Vec<CountRow> {
        self.idx.cube.query(filter, dims)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.values()
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.get(&id)
    }

    /// Follows `merged_into` links to the surviving cluster.
    pub fn resolve_cluster(&self, mut id: ClusterId) -> Option<&Cluster> {
        for _ in 0..=self.clusters.len() {
            let c = self.clusters.get(&id)?;
            match c.merged_into {
                Some(next) if next != id => id = next,
                _ => return Some(c),
            }
        }
        None
    }

    pub fn stories(&self) -> impl Iterator<Item = &Story> {
        self.stories.values()
    }

    pub fn story(&self, id: StoryId) -> Option<&Story> {
        self.stories.get(&id)
    }

    pub fn quotes(&self) -> &[StoredQuote] {
        &self.quotes
    }

    /// Ids of all articles carrying `facet`, ascending by id.
    pub fn facet_ids(&self, facet: Facet<'_>) -> BTreeSet<ArticleId> {
        let postings = match facet {
            Facet::Category(c) => self.idx.categories.get(c),
            Facet::Language(l) => self.idx.languages.get(l),
            Facet::CountrySource(c) => self.idx.country_source.get(&c),
            Facet::CountryAbout(c) => self.idx.country_about.get(&c),
            Facet::Entity(e) => self.idx.entities.get(&e),
            Facet::Cluster(c) => self.idx.clusters.get(&c),
        };
        self.ids_of(postings.map(Vec::as_slice).unwrap_or(&[]))
    }

    pub fn all_ids(&self) -> BTreeSet<ArticleId> {
        self.records.iter().map(|r| r.id).collect()
    }

    fn ids_of(&self, postings: &[u32]) -> BTreeSet<ArticleId> {
        postings.iter().map(|&p| self.records[p as usize].id).collect()
    }

    /// Ids of articles matching `query`, ascending. Term postings are
    /// intersected shortest first; filters are then checked per record.
    pub fn search_ids(&self, query: &SearchQuery) -> BTreeSet<ArticleId> {
        let words = query.words();
        let mut lists: Vec<&[u32]> = Vec::with_capacity(words.len());
        for w in &words {
            match self.idx.terms.get(w) {
                Some(p) => lists.push(p),
                None => return BTreeSet::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let candidates: Vec<u32> = match lists.split_first() {
            None => (0..self.records.len() as u32).collect(),
            Some((first, rest)) => first.iter().copied().filter(|p| rest.iter().all(|l| l.binary_search(p).is_ok())).collect(),
        };
        candidates
            .into_iter()
            .map(|p| &self.records[p as usize])
            .filter(|r| query.matches(r))
            .map(|r| r.id)
            .collect()
    }

    /// Matching records in recency order.
    pub fn search(&self, query: &SearchQuery) -> Vec<&ArticleRecord> {
        self.in_recency_order(&self.search_ids(query))
    }

    /// Records for `ids`, newest first, ties by ascending id.
    pub fn in_recency_order(&self, ids: &BTreeSet<ArticleId>) -> Vec<&ArticleRecord> {
        let mut out: Vec<&ArticleRecord> = ids.iter().filter_map(|&id| self.get(id)).collect();
        out.sort_by(|a, b| b.published_at.cmp(&a.published_at).then(a.id.cmp(&b.id)));
        out
    }

    /// Per-day article counts (not cell incidences) matching `query`.
    pub fn daily_article_counts(&self, query: &SearchQuery) -> BTreeMap<NaiveDate, u64> {
        let mut out = BTreeMap::new();
        for id in self.search_ids(query) {
            let r = self.get(id).expect("search returns stored ids");
            *out.entry(r.published_at.date_naive()).or_insert(0) += 1;
        }
        out
    }
}

/// First unused segment name at or after `n`. Segments left behind by an
/// unflushed session are never reused.
fn fresh_segment_name(dir: &Path, mut n: usize) -> String {
    loop {
        let name = format!("articles-{n:06}.jsonl");
        if !dir.join("segments").join(&name).exists() {
            return name;
        }
        n += 1;
    }
}

fn corrupt(path: &Path, line: usize, e: impl std::fmt::Display) -> StoreError {
    StoreError::Corrupt { file: path.display().to_string(), line, message: e.to_string() }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| corrupt(path, i + 1, e))?);
    }
    Ok(out)
}

fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl Iterator<Item = &'a T>) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("item serialises");
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
