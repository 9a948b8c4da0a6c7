use thiserror::Error;

use crate::{
    alerting::AlertError, channels::ChannelError, clustering::ClusterError, config::ConfigError,
    graphs::GraphError, ingest::IngestError, store::StoreError,
};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for callers that drive several stages at once.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Alert(#[from] AlertError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown entity {0}")]
    UnknownEntity(u64),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
