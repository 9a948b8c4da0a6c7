use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::phrase::PhraseMatcher;
use crate::text::{self, char_offset};
use crate::types::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Person,
    Organization,
    Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameVariant {
    pub name: String,
    /// Language hints, e.g. `["de", "tr"]`.
    #[serde(default)]
    pub languages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub canonical_name: String,
    pub variants: Vec<NameVariant>,
    #[serde(default)]
    pub titles: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GazetteerError {
    #[error("entity {0}: canonical name is not among its variants")]
    CanonicalMissing(EntityId),
    #[error("entity {0}: duplicate variant {1:?}")]
    DuplicateVariant(EntityId, String),
    #[error("duplicate entity id {0}")]
    DuplicateId(EntityId),
    #[error("toponym {0}: coordinates out of range")]
    BadCoordinates(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Entity {
    pub fn validate(&self) -> Result<(), GazetteerError> {
        let mut seen = HashSet::new();
        for v in &self.variants {
            if !seen.insert(v.name.as_str()) {
                return Err(GazetteerError::DuplicateVariant(self.id, v.name.clone()));
            }
        }
        if !seen.contains(self.canonical_name.as_str()) {
            return Err(GazetteerError::CanonicalMissing(self.id));
        }
        Ok(())
    }
}

/// A recognised entity occurrence. Offsets refer to the analysed text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub entity_id: EntityId,
    pub kind: EntityKind,
    pub surface: String,
    pub char_offset: usize,
    pub char_len: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    /// False when the surface is a variant of several entities; the
    /// smallest id is reported.
    pub resolved: bool,
}

impl Mention {
    pub fn char_end(&self) -> usize {
        self.char_offset + self.char_len
    }
}

/// Entity dictionary with its variant index.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entities: BTreeMap<EntityId, Entity>,
    matcher: PhraseMatcher<EntityId>,
}

impl Gazetteer {
    pub fn new(entities: impl IntoIterator<Item = Entity>) -> Result<Self, GazetteerError> {
        let mut g = Self::default();
        for e in entities {
            e.validate()?;
            if g.entities.contains_key(&e.id) {
                return Err(GazetteerError::DuplicateId(e.id));
            }
            for v in &e.variants {
                g.matcher.insert(text::term_words(&v.name), e.id);
            }
            g.entities.insert(e.id, e);
        }
        Ok(g)
    }

    pub fn from_jsonl(src: &str) -> Result<Self, GazetteerError> {
        Self::new(parse_jsonl::<Entity>(src)?)
    }

    pub fn get(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

pub(crate) fn parse_jsonl<T: serde::de::DeserializeOwned>(src: &str) -> Result<Vec<T>, GazetteerError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| GazetteerError::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

/// Leftmost-longest dictionary lookup of every entity variant. Mentions are
/// non-overlapping and sorted by offset.
pub fn recognize_entities(text: &str, gazetteer: &Gazetteer) -> Vec<Mention> {
    let tokens = text::tokenize(text);
    gazetteer
        .matcher
        .find_all(&tokens)
        .into_iter()
        .filter_map(|m| {
            let entity_id = *m.values.iter().min()?;
            let kind = gazetteer.entities[&entity_id].kind;
            let byte_start = tokens[m.start].byte_start;
            let byte_end = tokens[m.end - 1].byte_end;
            let surface = &text[byte_start..byte_end];
            Some(Mention {
                entity_id,
                kind,
                surface: surface.to_string(),
                char_offset: char_offset(text, byte_start),
                char_len: surface.chars().count(),
                byte_start,
                byte_end,
                resolved: m.values.len() == 1,
            })
        })
        .collect()
}
