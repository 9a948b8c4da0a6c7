//! Article intake: source registry, corpus and feed readers, language
//! identification and near-duplicate removal.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::io::BufRead;
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

use crate::types::{CountryCode, UNDETERMINED};

/// Minimum trimmed length (in chars) accepted by [`identify_language`].
pub const MIN_LANGID_CHARS: usize = 20;
/// Best cosine below this yields `und`.
pub const LANGID_THRESHOLD: f64 = 0.25;
/// Word shingle length for duplicate detection.
pub const SHINGLE_LEN: usize = 4;
pub const DUPLICATE_JACCARD: f64 = 0.85;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("text too short for language identification ({0} chars)")]
    TextTooShort(usize),
    #[error("unknown source {0:?}")]
    UnknownSource(String),
    #[error("duplicate source id {0:?}")]
    DuplicateSource(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("corpus line {line}: {message}")]
    CorpusParse { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    News,
    Agency,
    Social,
    Government,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::News => "news",
            SourceKind::Agency => "agency",
            SourceKind::Social => "social",
            SourceKind::Government => "government",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub id: String,
    pub name: String,
    pub country: CountryCode,
    pub default_language: String,
    pub kind: SourceKind,
    pub url: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceRegistry {
    sources: BTreeMap<String, Source>,
}

impl SourceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: Source) -> Result<(), IngestError> {
        if self.sources.contains_key(&source.id) {
            return Err(IngestError::DuplicateSource(source.id));
        }
        self.sources.insert(source.id.clone(), source);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Source> {
        self.sources.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Source> {
        self.sources.values()
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Parses the JSON array registry format.
    pub fn from_json(json: &str) -> Result<Self, IngestError> {
        let list: Vec<Source> =
            serde_json::from_str(json).map_err(|e| IngestError::InvalidRecord(e.to_string()))?;
        let mut reg = Self::new();
        for s in list {
            reg.insert(s)?;
        }
        Ok(reg)
    }

    pub fn to_json(&self) -> String {
        let list: Vec<&Source> = self.sources.values().collect();
        serde_json::to_string_pretty(&list).expect("sources serialize")
    }

    /// Adds every source of `other` that is not yet registered.
    pub fn merge(&mut self, other: &SourceRegistry) {
        for s in other.iter() {
            self.sources.entry(s.id.clone()).or_insert_with(|| s.clone());
        }
    }
}

/// One article as read from a corpus or feed. `body` is transient and must
/// not outlive analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawArticle {
    pub external_id: String,
    pub source_id: String,
    pub url: String,
    pub title: String,
    pub body: String,
    pub published_at: DateTime<Utc>,
    pub fetched_at: DateTime<Utc>,
}

impl RawArticle {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.title.trim().is_empty() {
            return Err(IngestError::InvalidRecord("empty title".into()));
        }
        if self.published_at > self.fetched_at {
            return Err(IngestError::InvalidRecord("published_at after fetched_at".into()));
        }
        Ok(())
    }

    pub fn full_text(&self) -> String {
        format!("{}\n{}", self.title, self.body)
    }
}

/// Reads a JSON Lines corpus. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn read_corpus(reader: impl BufRead) -> Result<Vec<RawArticle>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IngestError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawArticle = serde_json::from_str(&line)
            .map_err(|e| IngestError::CorpusParse { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<RawArticle>, IngestError> {
    let f = std::fs::File::open(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
    read_corpus(std::io::BufReader::new(f))
}

// ---------------------------------------------------------------------------
// language identification

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub language: String,
    /// Relative n-gram frequencies, summing to 1.
    pub ngram_weights: HashMap<String, f64>,
    #[serde(skip)]
    norm: f64,
}

/// Character 1..=4-grams of the alphabetic words in `text`, each word padded
/// with one space on both sides.
pub fn ngram_counts(text: &str) -> HashMap<String, f64> {
    let mut counts = HashMap::new();
    for word in text.unicode_words() {
        if !word.chars().any(char::is_alphabetic) {
            continue;
        }
        let padded: Vec<char> = format!(" {} ", word.to_lowercase()).chars().collect();
        for n in 1..=4 {
            for gram in padded.windows(n) {
                if gram.iter().all(|c| *c == ' ') {
                    continue;
                }
                *counts.entry(gram.iter().collect::<String>()).or_insert(0.0) += 1.0;
            }
        }
    }
    counts
}

impl LanguageProfile {
    pub fn train(language: &str, text: &str) -> Self {
        Self::from_weights(language, ngram_counts(text))
    }

    /// Normalises arbitrary non-negative weights to sum 1.
    pub fn from_weights(language: &str, mut weights: HashMap<String, f64>) -> Self {
        let total: f64 = weights.values().sum();
        if total > 0.0 {
            weights.values_mut().for_each(|w| *w /= total);
        }
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        Self { language: language.to_string(), ngram_weights: weights, norm }
    }

    pub fn cosine(&self, counts: &HashMap<String, f64>) -> f64 {
        let norm = if self.norm > 0.0 {
            self.norm
        } else {
            self.ngram_weights.values().map(|w| w * w).sum::<f64>().sqrt()
        };
        let text_norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 || text_norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = counts
            .iter()
            .filter_map(|(g, c)| self.ngram_weights.get(g).map(|w| w * c))
            .sum();
        dot / (norm * text_norm)
    }
}

/// Returns the best matching profile's language, or `und` when the best
/// cosine is below [`LANGID_THRESHOLD`]. Ties go to the smaller code.
pub fn identify_language(text: &str, profiles: &[LanguageProfile]) -> Result<String, IngestError> {
    let len = text.trim().chars().count();
    if len < MIN_LANGID_CHARS {
        return Err(IngestError::TextTooShort(len));
    }
    let counts = ngram_counts(text);
    let mut best: Option<(f64, &str)> = None;
    for p in profiles {
        let sim = p.cosine(&counts);
        let better = match best {
            None => true,
            Some((s, l)) => sim > s || (sim == s && p.language.as_str() < l),
        };
        if better {
            best = Some((sim, &p.language));
        }
    }
    Ok(match best {
        Some((s, l)) if s >= LANGID_THRESHOLD => l.to_string(),
        _ => UNDETERMINED.to_string(),
    })
}

// ---------------------------------------------------------------------------
// duplicates

/// Hashed word shingles of a text. Texts shorter than the shingle length
/// yield a single shingle of all their words.
pub fn shingles(text: &str) -> HashSet<u64> {
    let words = crate::text::words(text);
    let hash = |ws: &[String]| {
        let mut h = DefaultHasher::new();
        ws.hash(&mut h);
        h.finish()
    };
    if words.is_empty() {
        return HashSet::new();
    }
    if words.len() < SHINGLE_LEN {
        return HashSet::from([hash(&words)]);
    }
    words.windows(SHINGLE_LEN).map(hash).collect()
}

pub fn jaccard(a: &HashSet<u64>, b: &HashSet<u64>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

pub fn near_duplicate(a: &RawArticle, b: &RawArticle) -> bool {
    let sa = shingles(&a.full_text());
    let sb = shingles(&b.full_text());
    !sa.is_empty() && jaccard(&sa, &sb) >= DUPLICATE_JACCARD
}

#[derive(Default)]
struct Partition {
    entries: HashMap<u64, (DateTime<Utc>, HashSet<u64>)>,
    postings: HashMap<u64, Vec<u64>>,
    next: u64,
    newest: Option<DateTime<Utc>>,
}

impl Partition {
    fn evict(&mut self, window: Duration) {
        let Some(newest) = self.newest else { return };
        let horizon = newest - window - window;
        let stale: Vec<u64> = self
            .entries
            .iter()
            .filter(|(_, (t, _))| *t < horizon)
            .map(|(k, _)| *k)
            .collect();
        if stale.is_empty() {
            return;
        }
        let stale_set: HashSet<u64> = stale.iter().copied().collect();
        for k in &stale {
            self.entries.remove(k);
        }
        self.postings.retain(|_, ids| {
            ids.retain(|id| !stale_set.contains(id));
            !ids.is_empty()
        });
    }

    fn is_duplicate(&self, at: DateTime<Utc>, sh: &HashSet<u64>, window: Duration) -> bool {
        let mut overlap: HashMap<u64, usize> = HashMap::new();
        for s in sh {
            if let Some(ids) = self.postings.get(s) {
                for id in ids {
                    *overlap.entry(*id).or_insert(0) += 1;
                }
            }
        }
        overlap.into_iter().any(|(id, inter)| {
            let (t, other) = &self.entries[&id];
            let within = (*t - at).abs() <= window;
            within && inter as f64 / (sh.len() + other.len() - inter) as f64 >= DUPLICATE_JACCARD
        })
    }

    fn insert(&mut self, at: DateTime<Utc>, sh: HashSet<u64>) {
        let id = self.next;
        self.next += 1;
        for s in &sh {
            self.postings.entry(*s).or_default().push(id);
        }
        self.entries.insert(id, (at, sh));
        self.newest = Some(self.newest.map_or(at, |n| n.max(at)));
    }
}

/// Per-language index of accepted articles' shingles. Each language
/// partition is locked independently.
pub struct DedupIndex {
    default_window: Duration,
    windows: HashMap<String, Duration>,
    partitions: Mutex<HashMap<String, Arc<Mutex<Partition>>>>,
}

impl Default for DedupIndex {
    fn default() -> Self {
        Self::new(Duration::hours(24))
    }
}

impl DedupIndex {
    pub fn new(default_window: Duration) -> Self {
        Self { default_window, windows: HashMap::new(), partitions: Mutex::new(HashMap::new()) }
    }

    pub fn with_window(mut self, language: &str, window: Duration) -> Self {
        self.windows.insert(language.to_string(), window);
        self
    }

    fn window(&self, language: &str) -> Duration {
        self.windows.get(language).copied().unwrap_or(self.default_window)
    }

    fn partition(&self, language: &str) -> Arc<Mutex<Partition>> {
        let mut parts = self.partitions.lock().expect("dedup partitions poisoned");
        parts.entry(language.to_string()).or_default().clone()
    }

    /// Records the text unless it nearly duplicates an accepted one within
    /// the language's window. Returns `true` when it was a duplicate.
    pub fn check_and_insert(&self, language: &str, at: DateTime<Utc>, text: &str) -> bool {
        let sh = shingles(text);
        let window = self.window(language);
        let part = self.partition(language);
        let mut part = part.lock().expect("dedup partition poisoned");
        if !sh.is_empty() && part.is_duplicate(at, &sh, window) {
            return true;
        }
        part.insert(at, sh);
        part.evict(window);
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub index: usize,
    pub external_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub received: usize,
    pub accepted: usize,
    pub duplicates: usize,
    pub rejected: Vec<RejectedRecord>,
    pub languages: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct AcceptedArticle {
    pub raw: RawArticle,
    pub language: String,
    pub source: Source,
}

/// Validates, language-tags and deduplicates a batch. Records whose source
/// is unknown are skipped and listed in the report.
pub fn ingest_batch(
    records: Vec<RawArticle>,
    registry: &SourceRegistry,
    dedup: &DedupIndex,
    profiles: &[LanguageProfile],
) -> (IngestionReport, Vec<AcceptedArticle>) {
    let mut report = IngestionReport { received: records.len(), ..Default::default() };
    let mut accepted = Vec::new();
    for (index, raw) in records.into_iter().enumerate() {
        let Some(source) = registry.get(&raw.source_id) else {
            report.rejected.push(RejectedRecord {
                index,
                external_id: raw.external_id.clone(),
                reason: IngestError::UnknownSource(raw.source_id.clone()).to_string(),
            });
            continue;
        };
        if let Err(e) = raw.validate() {
            report.rejected.push(RejectedRecord {
                index,
                external_id: raw.external_id.clone(),
                reason: e.to_string(),
            });
            continue;
        }
        let text = raw.full_text();
        let language = match identify_language(&text, profiles) {
            Ok(l) if l != UNDETERMINED => l,
            _ => source.default_language.clone(),
        };
        if dedup.check_and_insert(&language, raw.published_at, &text) {
            report.duplicates += 1;
            continue;
        }
        report.accepted += 1;
        *report.languages.entry(language.clone()).or_insert(0) += 1;
        accepted.push(AcceptedArticle { raw, language, source: source.clone() });
    }
    (report, accepted)
}

// ---------------------------------------------------------------------------
// feeds

/// Polling cadence for live feeds; defaults to the ten-minute update cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedPoller {
    pub interval: Duration,
}

impl Default for FeedPoller {
    fn default() -> Self {
        Self { interval: Duration::seconds(600) }
    }
}

impl FeedPoller {
    pub fn is_due(&self, last_poll: Option<DateTime<Utc>>, now: DateTime<Utc>) -> bool {
        last_poll.is_none_or(|t| now - t >= self.interval)
    }
}

fn tag_content<'a>(item: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}");
    let start = item.find(&open)?;
    let after = start + item[start..].find('>')? + 1;
    if item[start..after].ends_with("/>") {
        return None;
    }
    let end = after + item[after..].find(&format!("</{tag}>"))?;
    Some(&item[after..end])
}

fn unescape_xml(s: &str) -> String {
    let s = s.trim();
    let s = s
        .strip_prefix("<![CDATA[")
        .and_then(|r| r.strip_suffix("]]>"))
        .map(str::to_string)
        .unwrap_or_else(|| {
            s.replace("&lt;", "<")
                .replace("&gt;", ">")
                .replace("&quot;", "\"")
                .replace("&apos;", "'")
                .replace("&amp;", "&")
        });
    s.trim().to_string()
}

/// Minimal RSS 2.0 reader: title, link, guid, pubDate and description of
/// each `<item>`. Items without a title are dropped.
pub fn parse_rss(xml: &str, source_id: &str, fetched_at: DateTime<Utc>) -> Vec<RawArticle> {
    let mut out = Vec::new();
    let mut rest = xml;
    while let Some(start) = rest.find("<item") {
        let Some(end) = rest[start..].find("</item>") else { break };
        let item = &rest[start..start + end];
        rest = &rest[start + end + "</item>".len()..];
        let Some(title) = tag_content(item, "title").map(unescape_xml).filter(|t| !t.is_empty()) else {
            continue;
        };
        let link = tag_content(item, "link").map(unescape_xml).unwrap_or_default();
        let guid = tag_content(item, "guid").map(unescape_xml).unwrap_or_else(|| link.clone());
        let published_at = tag_content(item, "pubDate")
            .and_then(|d| DateTime::parse_from_rfc2822(d.trim()).ok())
            .map(|d| d.with_timezone(&Utc))
            .filter(|d| *d <= fetched_at)
            .unwrap_or(fetched_at);
        let body = tag_content(item, "description").map(unescape_xml).unwrap_or_default();
        out.push(RawArticle {
            external_id: guid,
            source_id: source_id.to_string(),
            url: link,
            title,
            body,
            published_at,
            fetched_at,
        });
    }
    out
}
