//! Batch command line and HTTP front end for the newswatch engine.

pub mod server;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::{DateTime, Duration, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use newswatch_core::alerting::{board_csv, Metric, Resolution};
use newswatch_core::api::{Paging, SearchParams, SeriesParams, Snapshot, DEFAULT_GRAPH_N, DEFAULT_TOP_N};
use newswatch_core::channels::{ChannelExpr, ProfileStore};
use newswatch_core::export::MapFilter;
use newswatch_core::graphs::{distribution_csv, Dimension};
use newswatch_core::linguistic::LinguisticResources;
use newswatch_core::pipeline::{run_corpus_file, RunReport};
use newswatch_core::synthetic::{burst_corpus, BurstSpec};
use newswatch_core::{ArticleRecord, CountryCode, EntityId, PipelineConfig, SourceRegistry, Store};

#[derive(Debug, Parser)]
#[command(name = "newswatch", version, about = "Multilingual news monitoring: ingest, cluster, alert, report")]
pub struct Cli {
    /// Pipeline configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store directory.
    #[arg(long, global = true, default_value = "newswatch-store")]
    pub store: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Evaluation time (RFC 3339). Defaults to midnight after the latest
    /// stored article.
    #[arg(long, global = true)]
    pub clock: Option<DateTime<Utc>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Kml,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PageArgs {
    #[arg(long)]
    pub offset: Option<usize>,
    #[arg(long)]
    pub limit: Option<usize>,
}

impl PageArgs {
    fn paging(&self) -> Paging {
        Paging { offset: self.offset, limit: self.limit }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    /// Whitespace-separated terms, all required.
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub country_source: Option<CountryCode>,
    #[arg(long)]
    pub country_about: Option<CountryCode>,
    #[arg(long)]
    pub category: Option<String>,
    #[arg(long)]
    pub entity: Option<EntityId>,
    #[arg(long)]
    pub from: Option<DateTime<Utc>>,
    /// Exclusive upper bound.
    #[arg(long)]
    pub to: Option<DateTime<Utc>>,
}

impl FilterArgs {
    fn params(&self) -> SearchParams {
        SearchParams {
            q: self.q.clone(),
            lang: self.lang.clone(),
            country_source: self.country_source,
            country_about: self.country_about,
            category: self.category.clone(),
            entity: self.entity,
            from: self.from,
            to: self.to,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a JSON Lines corpus through the pipeline into the store.
    Ingest {
        corpus: PathBuf,
        /// Source registry JSON.
        #[arg(long)]
        sources: Option<PathBuf>,
    },
    /// Ingest a corpus and write report, alerts, top stories and maps to a
    /// directory.
    Run {
        corpus: PathBuf,
        #[arg(long)]
        sources: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// The alert board.
    Alerts {
        #[command(flatten)]
        page: PageArgs,
    },
    /// Largest live clusters for a language.
    Top {
        #[arg(long)]
        lang: String,
        #[arg(long, default_value_t = DEFAULT_TOP_N)]
        n: usize,
        #[command(flatten)]
        page: PageArgs,
    },
    /// One cluster, or its member articles.
    Cluster {
        id: u64,
        #[arg(long)]
        articles: bool,
        #[command(flatten)]
        page: PageArgs,
    },
    /// A story chain of daily clusters.
    Story {
        id: u64,
    },
    /// Entity page: variants, related and associated entities, clusters,
    /// quotes.
    Entity {
        id: EntityId,
        #[arg(long, default_value_t = DEFAULT_GRAPH_N)]
        n: usize,
    },
    /// Entity ego graphs and quote graphs.
    Graph {
        #[command(subcommand)]
        kind: GraphKind,
    },
    /// Evaluate a channel expression or a saved channel.
    ChannelEval {
        /// Expression JSON, or `@path` to read it from a file.
        #[arg(long, conflicts_with_all = ["profile", "set", "channel"])]
        expr: Option<String>,
        #[arg(long, requires_all = ["set", "channel"])]
        profile: Option<String>,
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        channel: Option<String>,
        /// Profile directory. Defaults to `<store>/profiles`.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[command(flatten)]
        page: PageArgs,
    },
    /// Cluster map as GeoJSON (`--format json`) or KML (`--format kml`).
    ExportMap {
        #[arg(long)]
        lang: Option<String>,
        #[arg(long)]
        live_only: bool,
    },
    /// Article distribution over one dimension.
    ReportDistribution {
        #[arg(long, value_enum)]
        dimension: DimensionArg,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Conjunctive search over stored records.
    Search {
        #[command(flatten)]
        filter: FilterArgs,
        #[command(flatten)]
        page: PageArgs,
    },
    /// Daily or monthly counts or tonality.
    Series {
        #[arg(long)]
        country: Option<CountryCode>,
        #[arg(long)]
        category: Option<String>,
        #[arg(long)]
        lang: Option<String>,
        #[arg(long, value_enum, default_value_t = ResolutionArg::Day)]
        resolution: ResolutionArg,
        #[arg(long, value_enum, default_value_t = MetricArg::Count)]
        metric: MetricArg,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Profile directory. Defaults to `<store>/profiles`.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Write the synthetic burst corpus (`corpus.jsonl`, `sources.json`)
    /// to a directory.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = BurstSpec::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = BurstSpec::default().days)]
        days: u32,
    },
    /// Rebuild in-memory indexes from disk and report store statistics.
    Reindex,
}

#[derive(Debug, Subcommand)]
pub enum GraphKind {
    /// Union of the seeds' associated entities.
    Ego {
        /// Comma-separated entity ids.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value_t = DEFAULT_GRAPH_N)]
        n: usize,
    },
    /// Who quotes whom.
    Quotes {
        #[arg(long)]
        seeds: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DimensionArg {
    Language,
    Country,
    Category,
    SourceKind,
}

impl From<DimensionArg> for Dimension {
    fn from(d: DimensionArg) -> Self {
        match d {
            DimensionArg::Language => Dimension::Language,
            DimensionArg::Country => Dimension::Country,
            DimensionArg::Category => Dimension::Category,
            DimensionArg::SourceKind => Dimension::SourceKind,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResolutionArg {
    Day,
    Month,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Count,
    Tonality,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn records_csv(records: &[ArticleRecord]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "published_at", "source_id", "language", "country_of_source", "title", "url"])?;
    for r in records {
        w.write_record([
            r.id.to_string(),
            r.published_at.to_rfc3339(),
            r.source_id.clone(),
            r.language.clone(),
            r.country_of_source.to_string(),
            r.title.clone(),
            r.url.clone(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)?)
}

fn read_expr(arg: &str) -> anyhow::Result<ChannelExpr> {
    let json = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => arg.to_string(),
    };
    Ok(ChannelExpr::from_json(&json)?)
}

fn registry(explicit: Option<&Path>, cfg: &PipelineConfig, store: &Store) -> anyhow::Result<SourceRegistry> {
    let mut reg = store.sources().clone();
    if let Some(p) = explicit.or(cfg.sources.as_deref()) {
        let json = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        reg.merge(&SourceRegistry::from_json(&json)?);
    }
    Ok(reg)
}

/// Runs the pipeline over `corpus` and applies the retention window.
pub fn ingest(
    corpus: &Path,
    sources: Option<&Path>,
    cfg: &PipelineConfig,
    res: &LinguisticResources,
    store: &mut Store,
) -> anyhow::Result<RunReport> {
    let reg = registry(sources, cfg, store)?;
    let report = run_corpus_file(corpus, &reg, cfg, res, store)?;
    if let Some(latest) = store.latest_published() {
        let purged = store.purge_before(latest - Duration::days(cfg.retention_days))?;
        if purged > 0 {
            tracing::info!(purged, "records past retention removed");
        }
    }
    Ok(report)
}

fn snapshot<'a>(store: &'a Store, res: &'a LinguisticResources, cfg: &'a PipelineConfig, clock: Option<DateTime<Utc>>) -> Snapshot<'a> {
    let s = Snapshot::new(store, res, &cfg.alerts);
    match clock {
        Some(c) => s.at(c),
        None => s,
    }
}

fn require(format: Format, allowed: &[Format], verb: &str) -> anyhow::Result<()> {
    if !allowed.contains(&format) {
        bail!("{verb} does not support --format {:?}", format);
    }
    Ok(())
}

/// Writes the standard artifacts of a run into `dir`.
fn write_run_outputs(dir: &Path, report: &RunReport, snap: &Snapshot<'_>) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    match snap.alerts(Paging::new(0, newswatch_core::api::MAX_LIMIT)) {
        Ok(doc) => {
            fs::write(dir.join("alerts.json"), serde_json::to_string_pretty(&doc)?)?;
            let cells: Vec<_> = doc.page.items.into_iter().map(|r| r.cell).collect();
            fs::write(dir.join("alerts.csv"), board_csv(&cells))?;
        }
        Err(e) => tracing::warn!(error = %e, "no alert board"),
    }
    let languages: std::collections::BTreeSet<&str> = snap.store.clusters().filter(|c| c.live).map(|c| c.language.as_str()).collect();
    for lang in languages {
        let doc = snap.top_stories(lang, DEFAULT_TOP_N, Paging::default());
        fs::write(dir.join(format!("top-stories-{lang}.json")), serde_json::to_string_pretty(&doc)?)?;
    }
    let filter = MapFilter::default();
    fs::write(dir.join("map.geojson"), snap.map_geojson(&filter).to_string())?;
    fs::write(dir.join("map.kml"), snap.map_kml(&filter))?;
    Ok(())
}

/// Executes one command, writing its result to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let res = cfg.load_resources()?;
    let mut store = Store::open(&cli.store).with_context(|| format!("opening store {}", cli.store.display()))?;
    let format = cli.format;
    match cli.command {
        Command::Ingest { corpus, sources } => {
            require(format, &[Format::Json], "ingest")?;
            let report = ingest(&corpus, sources.as_deref(), &cfg, &res, &mut store)?;
            write_json(out, &report)
        }
        Command::Run { corpus, sources, out: dir } => {
            require(format, &[Format::Json], "run")?;
            let report = ingest(&corpus, sources.as_deref(), &cfg, &res, &mut store)?;
            write_run_outputs(&dir, &report, &snapshot(&store, &res, &cfg, cli.clock))?;
            write_json(out, &report)
        }
        Command::Alerts { page } => {
            require(format, &[Format::Json, Format::Csv], "alerts")?;
            let doc = snapshot(&store, &res, &cfg, cli.clock).alerts(page.paging())?;
            if format == Format::Csv {
                let cells: Vec<_> = doc.page.items.into_iter().map(|r| r.cell).collect();
                write!(out, "{}", board_csv(&cells))?;
                return Ok(());
            }
            write_json(out, &doc)
        }
        Command::Top { lang, n, page } => {
            require(format, &[Format::Json], "top")?;
            write_json(out, &snapshot(&store, &res, &cfg, cli.clock).top_stories(&lang, n, page.paging()))
        }
        Command::Cluster { id, articles, page } => {
            let snap = snapshot(&store, &res, &cfg, cli.clock);
            if articles {
                require(format, &[Format::Json, Format::Csv], "cluster --articles")?;
                let page = snap.cluster_articles(id, page.paging())?;
                if format == Format::Csv {
                    write!(out, "{}", records_csv(&page.items)?)?;
                    return Ok(());
                }
                return write_json(out, &page);
            }
            require(format, &[Format::Json], "cluster")?;
            write_json(out, &snap.cluster(id)?)
        }
        Command::Story { id } => {
            require(format, &[Format::Json], "story")?;
            write_json(out, &snapshot(&store, &res, &cfg, cli.clock).story(id)?)
        }
        Command::Entity { id, n } => {
            require(format, &[Format::Json], "entity")?;
            write_json(out, &snapshot(&store, &res, &cfg, cli.clock).entity(id, n)?)
        }
        Command::Graph { kind } => {
            require(format, &[Format::Json], "graph")?;
            let snap = snapshot(&store, &res, &cfg, cli.clock);
            match kind {
                GraphKind::Ego { seeds, n } => {
                    let seeds = server::parse_seeds(Some(&seeds)).map_err(anyhow::Error::msg)?;
                    write_json(out, &snap.ego_graph(&seeds, n)?)
                }
                GraphKind::Quotes { seeds } => {
                    let seeds = server::parse_seeds(seeds.as_deref()).map_err(anyhow::Error::msg)?;
                    write_json(out, &snap.quote_graph(&seeds))
                }
            }
        }
        Command::ChannelEval { expr, profile, set, channel, profiles, page } => {
            require(format, &[Format::Json, Format::Csv], "channel-eval")?;
            let expr = match (expr, profile) {
                (Some(e), _) => read_expr(&e)?,
                (None, Some(p)) => {
                    let dir = profiles.unwrap_or_else(|| cli.store.join("profiles"));
                    let sets = ProfileStore::new(dir).load(&p)?;
                    let (set, channel) = (set.unwrap_or_default(), channel.unwrap_or_default());
                    let s = sets.iter().find(|s| s.name == set).with_context(|| format!("no channel set {set:?}"))?;
                    s.get(&channel).with_context(|| format!("no channel {channel:?} in set {set:?}"))?.clone()
                }
                (None, None) => bail!("channel-eval needs --expr or --profile/--set/--channel"),
            };
            let doc = snapshot(&store, &res, &cfg, cli.clock).channel(&expr, page.paging())?;
            if format == Format::Csv {
                write!(out, "{}", records_csv(&doc.page.items)?)?;
                return Ok(());
            }
            write_json(out, &doc)
        }
        Command::ExportMap { lang, live_only } => {
            require(format, &[Format::Json, Format::Kml], "export-map")?;
            let snap = snapshot(&store, &res, &cfg, cli.clock);
            let filter = MapFilter { language: lang, live_only };
            if format == Format::Kml {
                write!(out, "{}", snap.map_kml(&filter))?;
                return Ok(());
            }
            write_json(out, &snap.map_geojson(&filter))
        }
        Command::ReportDistribution { dimension, filter } => {
            require(format, &[Format::Json, Format::Csv], "report-distribution")?;
            let doc = snapshot(&store, &res, &cfg, cli.clock).distribution(&filter.params(), dimension.into());
            if format == Format::Csv {
                write!(out, "{}", distribution_csv(&doc.rows)?)?;
                return Ok(());
            }
            write_json(out, &doc)
        }
        Command::Search { filter, page } => {
            require(format, &[Format::Json, Format::Csv], "search")?;
            let page = snapshot(&store, &res, &cfg, cli.clock).search(&filter.params(), page.paging());
            if format == Format::Csv {
                write!(out, "{}", records_csv(&page.items)?)?;
                return Ok(());
            }
            write_json(out, &page)
        }
        Command::Series { country, category, lang, resolution, metric, from, to } => {
            require(format, &[Format::Json], "series")?;
            let params = SeriesParams {
                country,
                category,
                lang,
                resolution: match resolution {
                    ResolutionArg::Day => Resolution::Day,
                    ResolutionArg::Month => Resolution::Month,
                },
                metric: match metric {
                    MetricArg::Count => Metric::Count,
                    MetricArg::Tonality => Metric::Tonality,
                },
                from,
                to,
            };
            write_json(out, &snapshot(&store, &res, &cfg, cli.clock).series(&params))
        }
        Command::Serve { addr, profiles } => {
            let profiles = ProfileStore::new(profiles.unwrap_or_else(|| cli.store.join("profiles")));
            let state = Arc::new(server::AppState {
                store,
                resources: res,
                alerts: cfg.alerts.clone(),
                clock: cli.clock,
                profiles: Some(profiles),
            });
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(&addr, state))
        }
        Command::Generate { out: dir, seed, days } => {
            let corpus = burst_corpus(&BurstSpec { seed, days, ..BurstSpec::default() });
            fs::create_dir_all(&dir)?;
            let mut lines = String::new();
            for a in &corpus.articles {
                lines.push_str(&serde_json::to_string(a)?);
                lines.push('\n');
            }
            fs::write(dir.join("corpus.jsonl"), lines)?;
            fs::write(dir.join("sources.json"), corpus.sources.to_json())?;
            write_json(out, &serde_json::json!({ "articles": corpus.articles.len(), "clock": corpus.clock }))
        }
        Command::Reindex => {
            store.reindex();
            let stats = serde_json::json!({
                "articles": store.len(),
                "clusters": store.clusters().count(),
                "stories": store.stories().count(),
                "quotes": store.quotes().len(),
                "next_article_id": store.next_article_id(),
            });
            write_json(out, &stats)
        }
    }
}
