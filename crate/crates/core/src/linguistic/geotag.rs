//! Place-name recognition and homograph disambiguation.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::entities::{parse_jsonl, EntityKind, GazetteerError, Mention};
use super::phrase::PhraseMatcher;
use crate::resources;
use crate::text::{self, char_offset, Token};
use crate::types::{CountryCode, ToponymId};

/// Tokens on each side of a place name searched for a disambiguator.
pub const DISAMBIGUATION_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureClass {
    Capital,
    City,
    Admin,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toponym {
    #[serde(default)]
    pub id: ToponymId,
    pub name: String,
    #[serde(default)]
    pub variants: Vec<String>,
    pub latitude: f64,
    pub longitude: f64,
    pub country: CountryCode,
    #[serde(default)]
    pub population: u64,
    pub feature_class: FeatureClass,
    /// First-level administrative region, e.g. `Texas`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admin1: Option<String>,
}

impl Toponym {
    fn validate(&self) -> Result<(), GazetteerError> {
        let ok = self.latitude.abs() <= 90.0 && self.longitude.abs() <= 180.0;
        ok.then_some(()).ok_or_else(|| GazetteerError::BadCoordinates(self.name.clone()))
    }

    fn disambiguators(&self) -> Vec<Vec<String>> {
        self.admin1
            .iter()
            .map(String::as_str)
            .chain(resources::countries().names(self.country.as_str()).iter().map(String::as_str))
            .map(text::term_words)
            .filter(|w| !w.is_empty())
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ToponymGazetteer {
    toponyms: BTreeMap<ToponymId, Toponym>,
    matcher: PhraseMatcher<ToponymId>,
}

impl ToponymGazetteer {
    /// Builds the index; toponyms with id 0 get `index + 1` as id.
    pub fn new(toponyms: impl IntoIterator<Item = Toponym>) -> Result<Self, GazetteerError> {
        let mut g = Self::default();
        for (i, mut t) in toponyms.into_iter().enumerate() {
            t.validate()?;
            if t.id == 0 {
                t.id = i as ToponymId + 1;
            }
            if g.toponyms.contains_key(&t.id) {
                return Err(GazetteerError::DuplicateId(t.id));
            }
            for name in std::iter::once(&t.name).chain(&t.variants) {
                g.matcher.insert(text::term_words(name), t.id);
            }
            g.toponyms.insert(t.id, t);
        }
        Ok(g)
    }

    pub fn from_jsonl(src: &str) -> Result<Self, GazetteerError> {
        Self::new(parse_jsonl::<Toponym>(src)?)
    }

    pub fn get(&self, id: ToponymId) -> Option<&Toponym> {
        self.toponyms.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Toponym> {
        self.toponyms.values()
    }
}

/// Which step of the precedence chain settled a homograph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Unique,
    Disambiguator,
    SourceCountry,
    Population,
    FeatureClass,
    CountryCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoRef {
    pub toponym_id: ToponymId,
    pub surface: String,
    pub char_offset: usize,
    pub resolution: Resolution,
}

fn class_rank(c: FeatureClass) -> u8 {
    match c {
        FeatureClass::Capital => 0,
        FeatureClass::City => 1,
        FeatureClass::Admin => 2,
        FeatureClass::Other => 3,
    }
}

struct Candidate<'a> {
    topo: &'a Toponym,
    hit: bool,
    home: bool,
}

/// Orders candidates best first by the precedence chain.
fn precedence(a: &Candidate, b: &Candidate) -> Ordering {
    b.hit
        .cmp(&a.hit)
        .then(b.home.cmp(&a.home))
        .then(b.topo.population.cmp(&a.topo.population))
        .then(class_rank(a.topo.feature_class).cmp(&class_rank(b.topo.feature_class)))
        .then(a.topo.country.cmp(&b.topo.country))
        .then(a.topo.id.cmp(&b.topo.id))
}

fn deciding_step(best: &Candidate, runner_up: &Candidate) -> Resolution {
    if best.hit != runner_up.hit {
        Resolution::Disambiguator
    } else if best.home != runner_up.home {
        Resolution::SourceCountry
    } else if best.topo.population != runner_up.topo.population {
        Resolution::Population
    } else if best.topo.feature_class != runner_up.topo.feature_class {
        Resolution::FeatureClass
    } else {
        Resolution::CountryCode
    }
}

fn window_hit(tokens: &[Token], start: usize, end: usize, names: &[Vec<String>]) -> bool {
    let before: Vec<String> =
        tokens[start.saturating_sub(DISAMBIGUATION_WINDOW)..start].iter().map(|t| t.lower.clone()).collect();
    let after: Vec<String> = tokens[end..(end + DISAMBIGUATION_WINDOW).min(tokens.len())]
        .iter()
        .map(|t| t.lower.clone())
        .collect();
    names.iter().any(|n| text::contains_phrase(&before, n) || text::contains_phrase(&after, n))
}

/// Recognises place names and picks one referent per occurrence.
///
/// Place strings overlapping a person mention are dropped. Homographs are
/// resolved by, in order: a region or country name within three tokens,
/// the source's country, population, feature class, then country code.
pub fn geotag(
    text: &str,
    mentions: &[Mention],
    gazetteer: &ToponymGazetteer,
    source_country: CountryCode,
) -> Vec<GeoRef> {
    let tokens = text::tokenize(text);
    let persons: Vec<(usize, usize)> = mentions
        .iter()
        .filter(|m| m.kind == EntityKind::Person)
        .map(|m| (m.byte_start, m.byte_end))
        .collect();
    let mut out = Vec::new();
    for m in gazetteer.matcher.find_all(&tokens) {
        let byte_start = tokens[m.start].byte_start;
        let byte_end = tokens[m.end - 1].byte_end;
        if persons.iter().any(|(s, e)| byte_start < *e && *s < byte_end) {
            continue;
        }
        let mut candidates: Vec<Candidate> = m
            .values
            .iter()
            .filter_map(|id| gazetteer.toponyms.get(id))
            .map(|topo| Candidate {
                topo,
                hit: window_hit(&tokens, m.start, m.end, &topo.disambiguators()),
                home: !source_country.is_unknown() && topo.country == source_country,
            })
            .collect();
        candidates.sort_by(precedence);
        let Some(best) = candidates.first() else { continue };
        let resolution = match candidates.get(1) {
            None => Resolution::Unique,
            Some(second) => deciding_step(best, second),
        };
        out.push(GeoRef {
            toponym_id: best.topo.id,
            surface: text[byte_start..byte_end].to_string(),
            char_offset: char_offset(text, byte_start),
            resolution,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linguistic::entities::{recognize_entities, Gazetteer};

    fn places() -> ToponymGazetteer {
        ToponymGazetteer::from_jsonl(concat!(
            r#"{"id":1,"name":"Paris","latitude":48.8566,"longitude":2.3522,"country":"FR","population":2200000,"feature_class":"capital","admin1":"Île-de-France"}"#, "\n",
            r#"{"id":2,"name":"Paris","latitude":33.6609,"longitude":-95.5555,"country":"US","population":25000,"feature_class":"city","admin1":"Texas"}"#, "\n",
            r#"{"id":3,"name":"Texas","latitude":31.0,"longitude":-100.0,"country":"US","population":29000000,"feature_class":"admin"}"#, "\n",
        ))
        .unwrap()
    }

    fn people() -> Gazetteer {
        Gazetteer::from_jsonl(
            r#"{"id":7,"kind":"person","canonical_name":"Paris Hilton","variants":[{"name":"Paris Hilton"}]}"#,
        )
        .unwrap()
    }

    fn tag(text: &str, country: &str) -> Vec<GeoRef> {
        let mentions = recognize_entities(text, &people());
        geotag(text, &mentions, &places(), country.parse().unwrap())
    }

    #[test]
    fn person_names_suppress_places() {
        assert!(tag("Paris Hilton arrived at the gala.", "ZZ").is_empty());
    }

    #[test]
    fn region_in_window_wins() {
        let refs = tag("The storm hit Paris, Texas overnight.", "FR");
        assert_eq!(refs[0].toponym_id, 2);
        assert_eq!(refs[0].resolution, Resolution::Disambiguator);
        assert_eq!(refs[1].toponym_id, 3);
    }

    #[test]
    fn population_breaks_ties() {
        let refs = tag("Protests in Paris continued.", "ZZ");
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].toponym_id, 1);
        assert_eq!(refs[0].resolution, Resolution::Population);
    }

    #[test]
    fn source_country_beats_population() {
        let refs = tag("Protests in Paris continued.", "US");
        assert_eq!(refs[0].toponym_id, 2);
        assert_eq!(refs[0].resolution, Resolution::SourceCountry);
    }

    #[test]
    fn coordinates_validated() {
        let bad = r#"{"name":"X","latitude":91.0,"longitude":0.0,"country":"FR","feature_class":"city"}"#;
        assert!(ToponymGazetteer::from_jsonl(bad).is_err());
    }
}
