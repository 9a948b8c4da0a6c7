//! Pipeline configuration, loaded from TOML.
//!
//! ```toml
//! clustering_threshold = 0.5
//! retention_days = 400
//!
//! [windows]
//! default_hours = 4
//! per_language = { de = 8 }
//!
//! [alerts]
//! floor = 0.5
//! medium = 2.0
//! high = 4.0
//!
//! [resources]
//! rules = "rules.json"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alerting::AlertConfig;
use crate::clustering::{DEFAULT_LOOKBACK_DAYS, DEFAULT_THRESHOLD};
use crate::linguistic::{parse_rules, Gazetteer, LinguisticResources, ToponymGazetteer};
use crate::resources::parse_lexicon;
use crate::store::DEFAULT_RETENTION_DAYS;
use crate::types::BUCKET_SECS;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    OutOfRange { field: &'static str, message: String },
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub default_hours: u32,
    pub per_language: BTreeMap<String, u32>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { default_hours: 4, per_language: BTreeMap::new() }
    }
}

/// Optional replacements for the bundled dictionaries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcePaths {
    pub rules: Option<PathBuf>,
    pub entities: Option<PathBuf>,
    pub toponyms: Option<PathBuf>,
    /// Directory of `<lang>.tsv` tonality lexicons.
    pub lexicons: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub windows: WindowConfig,
    pub clustering_threshold: f64,
    pub story_lookback_days: i64,
    pub dedup_window_hours: i64,
    pub bucket_secs: i64,
    pub retention_days: i64,
    pub alerts: AlertConfig,
    pub resources: ResourcePaths,
    /// Source registry JSON used when a run does not supply one.
    pub sources: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            windows: WindowConfig::default(),
            clustering_threshold: DEFAULT_THRESHOLD,
            story_lookback_days: DEFAULT_LOOKBACK_DAYS,
            dedup_window_hours: 24,
            bucket_secs: BUCKET_SECS,
            retention_days: DEFAULT_RETENTION_DAYS,
            alerts: AlertConfig::default(),
            resources: ResourcePaths::default(),
            sources: None,
        }
    }
}

fn range(field: &'static str, ok: bool, message: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { field, message: message.to_string() })
    }
}

impl PipelineConfig {
    pub fn from_toml(src: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(src).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&src, path)
    }

    /// Makes relative resource paths relative to the config file.
    fn resolve_paths(&mut self, base: &Path) {
        let r = &mut self.resources;
        for p in [&mut r.rules, &mut r.entities, &mut r.toponyms, &mut r.lexicons, &mut self.sources].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let hours_ok = |h: u32| (1..=48).contains(&h);
        range("windows.default_hours", hours_ok(self.windows.default_hours), "must be in 1..=48")?;
        range("windows.per_language", self.windows.per_language.values().all(|&h| hours_ok(h)), "must be in 1..=48")?;
        let t = self.clustering_threshold;
        range("clustering_threshold", t > 0.0 && t <= 1.0, "must be in (0, 1]")?;
        range("story_lookback_days", (1..=60).contains(&self.story_lookback_days), "must be in 1..=60")?;
        range("dedup_window_hours", (1..=168).contains(&self.dedup_window_hours), "must be in 1..=168")?;
        range("bucket_secs", self.bucket_secs == BUCKET_SECS, "only 600 is supported")?;
        range("retention_days", self.retention_days >= 15, "must cover the alert baseline (>= 15)")?;
        self.alerts
            .validate()
            .map_err(|e| ConfigError::OutOfRange { field: "alerts", message: e.to_string() })?;
        let r = &self.resources;
        for p in [&r.rules, &r.entities, &r.toponyms, &r.lexicons, &self.sources].into_iter().flatten() {
            if !p.exists() {
                return Err(ConfigError::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    pub fn window_for(&self, language: &str) -> Duration {
        let h = self.windows.per_language.get(language).copied().unwrap_or(self.windows.default_hours);
        Duration::hours(h as i64)
    }

    /// Bundled resources with any configured replacements applied.
    pub fn load_resources(&self) -> Result<LinguisticResources, ConfigError> {
        let mut res = LinguisticResources::bundled();
        let read = |p: &PathBuf| fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.clone(), source });
        let parse_err = |p: &PathBuf, e: &dyn std::fmt::Display| ConfigError::Parse { path: p.clone(), message: e.to_string() };
        let r = &self.resources;
        if let Some(p) = &r.rules {
            res.rules = parse_rules(&read(p)?).map_err(|e| parse_err(p, &e))?;
        }
        if let Some(p) = &r.entities {
            res.gazetteer = Gazetteer::from_jsonl(&read(p)?).map_err(|e| parse_err(p, &e))?;
        }
        if let Some(p) = &r.toponyms {
            res.toponyms = ToponymGazetteer::from_jsonl(&read(p)?).map_err(|e| parse_err(p, &e))?;
        }
        if let Some(dir) = &r.lexicons {
            let entries = fs::read_dir(dir).map_err(|source| ConfigError::Read { path: dir.clone(), source })?;
            let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
            paths.sort();
            for p in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "tsv")) {
                let lang = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let lex = parse_lexicon(&lang, &read(&p)?).map_err(|e| parse_err(&p, &e))?;
                res.lexicons.insert(lang, lex);
            }
        }
        Ok(res)
    }
}
