use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::resources;

pub type ArticleId = u64;
pub type EntityId = u64;
pub type ToponymId = u64;
pub type ClusterId = u64;
pub type StoryId = u64;

/// Language code used when no profile is a confident match.
pub const UNDETERMINED: &str = "und";

/// Seconds per size-history bucket.
pub const BUCKET_SECS: i64 = 600;

/// ISO 3166-1 alpha-2 country code, or `ZZ` for unknown.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub const UNKNOWN: CountryCode = CountryCode(*b"ZZ");

    pub fn as_str(&self) -> &str {
        // constructed only from validated ASCII uppercase
        std::str::from_utf8(&self.0).unwrap_or("ZZ")
    }

    pub fn is_unknown(&self) -> bool {
        *self == Self::UNKNOWN
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid country code {0:?}")]
pub struct InvalidCountry(pub String);

impl FromStr for CountryCode {
    type Err = InvalidCountry;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        if up == "ZZ" {
            return Ok(Self::UNKNOWN);
        }
        let bytes = up.as_bytes();
        if bytes.len() != 2 || !resources::countries().is_known(&up) {
            return Err(InvalidCountry(s.to_string()));
        }
        Ok(CountryCode([bytes[0], bytes[1]]))
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CountryCode({})", self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Monotone id allocator shared by writers of one id space.
#[derive(Debug, Default)]
pub struct IdSource(AtomicU64);

impl IdSource {
    pub fn starting_at(first: u64) -> Self {
        Self(AtomicU64::new(first))
    }

    pub fn next_id(&self) -> u64 {
        self.0.fetch_add(1, Ordering::Relaxed)
    }

    /// The id the next call to [`IdSource::next_id`] returns.
    pub fn peek(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Start of the 600 s bucket containing `t`.
pub fn bucket_of(t: DateTime<Utc>) -> DateTime<Utc> {
    let secs = t.timestamp().div_euclid(BUCKET_SECS) * BUCKET_SECS;
    Utc.timestamp_opt(secs, 0).single().expect("bucket timestamp in range")
}
