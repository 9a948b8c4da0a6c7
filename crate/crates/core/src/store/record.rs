use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::{RawArticle, Source, SourceKind};
use crate::linguistic::Enrichment;
use crate::text;
use crate::types::{ArticleId, ClusterId, CountryCode, EntityId, ToponymId};

/// Body words retained in a record.
pub const SNIPPET_WORDS: usize = 40;
/// Category placeholder used in count cells for uncategorised articles.
pub const NO_CATEGORY: &str = "_none";

/// Everything retained about an article after analysis. The full body is
/// never stored; only its first [`SNIPPET_WORDS`] words survive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub id: ArticleId,
    pub external_id: String,
    pub source_id: String,
    pub url: String,
    pub title: String,
    pub snippet: String,
    pub language: String,
    pub country_of_source: CountryCode,
    pub source_kind: SourceKind,
    pub published_at: DateTime<Utc>,
    pub categories: BTreeSet<String>,
    pub entity_ids: BTreeSet<EntityId>,
    pub toponym_refs: BTreeSet<ToponymId>,
    /// Countries of the resolved toponyms.
    pub countries_about: BTreeSet<CountryCode>,
    pub tonality: f64,
    #[serde(default)]
    pub cluster_id: Option<ClusterId>,
}

impl ArticleRecord {
    pub fn from_parts(id: ArticleId, raw: &RawArticle, language: &str, source: &Source, enrichment: &Enrichment) -> Self {
        Self {
            id,
            external_id: raw.external_id.clone(),
            source_id: raw.source_id.clone(),
            url: raw.url.clone(),
            title: raw.title.trim().to_string(),
            snippet: text::first_words(&raw.body, SNIPPET_WORDS),
            language: language.to_string(),
            country_of_source: source.country,
            source_kind: source.kind,
            published_at: raw.published_at,
            categories: enrichment.categories.clone(),
            entity_ids: enrichment.entity_ids.clone(),
            toponym_refs: enrichment.toponym_ids.clone(),
            countries_about: enrichment.countries_about.clone(),
            tonality: enrichment.tonality,
            cluster_id: None,
        }
    }

    pub fn snippet_word_count(&self) -> usize {
        self.snippet.split_whitespace().count()
    }

    /// Countries an article counts for in country × category statistics:
    /// the countries it is about, else its source's country.
    pub fn alert_countries(&self) -> BTreeSet<CountryCode> {
        if self.countries_about.is_empty() {
            BTreeSet::from([self.country_of_source])
        } else {
            self.countries_about.clone()
        }
    }

    pub fn alert_categories(&self) -> BTreeSet<String> {
        if self.categories.is_empty() {
            BTreeSet::from([NO_CATEGORY.to_string()])
        } else {
            self.categories.clone()
        }
    }

    /// Every `(country, category)` cell the article contributes one count to.
    pub fn cells(&self) -> Vec<(CountryCode, String)> {
        let cats = self.alert_categories();
        self.alert_countries()
            .into_iter()
            .flat_map(|c| cats.iter().map(move |k| (c, k.clone())))
            .collect()
    }

    /// Lowercased words of title and snippet, the searchable text.
    pub fn search_terms(&self) -> BTreeSet<String> {
        text::words(&self.title).into_iter().chain(text::words(&self.snippet)).collect()
    }
}
