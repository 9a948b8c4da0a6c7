//! Core engine for multilingual news monitoring.
//!
//! The crate is organised along the processing chain: [`ingest`] reads and
//! deduplicates raw articles, [`linguistic`] enriches them, [`clustering`]
//! groups them into windowed clusters and stories, [`store`] persists the
//! metadata-only records, and [`alerting`], [`graphs`] and [`channels`] derive
//! analyst-facing views. [`pipeline`] wires the stages together and [`api`]
//! renders the documents shared by the CLI and the HTTP service.

pub mod alerting;
pub mod api;
pub mod channels;
pub mod clustering;
pub mod config;
pub mod error;
pub mod export;
pub mod graphs;
pub mod ingest;
pub mod linguistic;
pub mod pipeline;
pub mod resources;
pub mod store;
pub mod synthetic;
pub mod text;
pub mod types;

pub use alerting::{AlertCell, AlertConfig, AlertLevel};
pub use channels::{ChannelExpr, ChannelSet};
pub use clustering::{Cluster, Story};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use ingest::{RawArticle, Source, SourceKind, SourceRegistry};
pub use linguistic::{Entity, EntityKind, Toponym};
pub use store::{ArticleRecord, Store};
pub use types::{ArticleId, ClusterId, CountryCode, EntityId, StoryId, ToponymId};
