//! Article enrichment: categories, entities, places, quotations and
//! tonality, all driven by dictionary resources.

mod categories;
mod entities;
mod geotag;
mod phrase;
mod quotes;
mod tonality;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::{Arc, RwLock};

pub use categories::{categorize, parse_rules, CategoryRule, RuleError};
pub use entities::{recognize_entities, Entity, EntityKind, Gazetteer, GazetteerError, Mention, NameVariant};
pub use geotag::{geotag, FeatureClass, GeoRef, Resolution, Toponym, ToponymGazetteer, DISAMBIGUATION_WINDOW};
pub use phrase::{PhraseMatch, PhraseMatcher};
pub use quotes::{extract_quotes, Quote, QuoteExtraction};
pub use tonality::{tonality, TonalityLexicon, NEGATION_WINDOW};

use crate::resources;
use crate::types::{ArticleId, CountryCode, EntityId, ToponymId};

/// Immutable set of dictionaries used for enrichment.
#[derive(Debug, Clone, Default)]
pub struct LinguisticResources {
    pub rules: Vec<CategoryRule>,
    pub gazetteer: Gazetteer,
    pub toponyms: ToponymGazetteer,
    pub lexicons: HashMap<String, TonalityLexicon>,
    pub negators: HashMap<String, HashSet<String>>,
    pub reporting_verbs: HashMap<String, HashSet<String>>,
}

impl LinguisticResources {
    /// The bundled seed rules, gazetteers and word lists.
    pub fn bundled() -> Self {
        Self {
            rules: parse_rules(resources::DEFAULT_RULES).expect("bundled rules are valid"),
            gazetteer: Gazetteer::from_jsonl(resources::DEFAULT_ENTITIES).expect("bundled entities are valid"),
            toponyms: ToponymGazetteer::from_jsonl(resources::DEFAULT_TOPONYMS).expect("bundled toponyms are valid"),
            lexicons: resources::lexicons(),
            negators: resources::negators(),
            reporting_verbs: resources::reporting_verbs(),
        }
    }

    pub fn enrich(&self, article_id: ArticleId, text: &str, language: &str, source_country: CountryCode) -> Enrichment {
        let empty = HashSet::new();
        let categories = categorize(text, language, &self.rules);
        let mentions = recognize_entities(text, &self.gazetteer);
        let places = geotag(text, &mentions, &self.toponyms, source_country);
        let verbs = self.reporting_verbs.get(language).unwrap_or(&empty);
        let quotes = extract_quotes(article_id, text, &mentions, verbs);
        let tonality = match self.lexicons.get(language) {
            Some(lex) => tonality(text, lex, self.negators.get(language).unwrap_or(&empty)),
            None => 0.0,
        };
        let countries_about = places
            .iter()
            .filter_map(|p| self.toponyms.get(p.toponym_id))
            .map(|t| t.country)
            .collect();
        Enrichment {
            categories,
            entity_ids: mentions.iter().map(|m| m.entity_id).collect(),
            toponym_ids: places.iter().map(|p| p.toponym_id).collect(),
            countries_about,
            mentions,
            places,
            quotes: quotes.quotes,
            unbalanced_quotes: quotes.unbalanced,
            tonality,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enrichment {
    pub categories: BTreeSet<String>,
    pub mentions: Vec<Mention>,
    pub entity_ids: BTreeSet<EntityId>,
    pub places: Vec<GeoRef>,
    pub toponym_ids: BTreeSet<ToponymId>,
    pub countries_about: BTreeSet<CountryCode>,
    pub quotes: Vec<Quote>,
    pub unbalanced_quotes: usize,
    pub tonality: f64,
}

/// Shared handle whose resource snapshot can be swapped atomically while
/// readers keep using the one they obtained.
#[derive(Debug, Default)]
pub struct ResourceHandle {
    current: RwLock<Arc<LinguisticResources>>,
}

impl ResourceHandle {
    pub fn new(resources: LinguisticResources) -> Self {
        Self { current: RwLock::new(Arc::new(resources)) }
    }

    pub fn snapshot(&self) -> Arc<LinguisticResources> {
        self.current.read().expect("resource lock poisoned").clone()
    }

    pub fn swap(&self, resources: LinguisticResources) -> Arc<LinguisticResources> {
        let mut guard = self.current.write().expect("resource lock poisoned");
        std::mem::replace(&mut *guard, Arc::new(resources))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_resources_enrich() {
        let res = LinguisticResources::bundled();
        let text = "Merkel said: \"The tuberculosis outbreak in Warsaw is a crisis.\"";
        let e = res.enrich(1, text, "en", CountryCode::UNKNOWN);
        assert!(e.categories.contains("tuberculosis"));
        assert!(!e.entity_ids.is_empty());
        assert!(e.countries_about.contains(&"PL".parse().unwrap()));
        assert_eq!(e.quotes.len(), 1);
        assert!(e.tonality < 0.0);
    }

    #[test]
    fn snapshot_swap_keeps_old_readers() {
        let handle = ResourceHandle::new(LinguisticResources::default());
        let old = handle.snapshot();
        handle.swap(LinguisticResources::bundled());
        assert!(old.rules.is_empty());
        assert!(!handle.snapshot().rules.is_empty());
    }
}
