//! Seeded generators for test corpora, benches and demos.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::channels::ChannelExpr;
use crate::clustering::{Cluster, ClusterKind, SizePoint, TermDoc};
use crate::ingest::{RawArticle, Source, SourceKind, SourceRegistry};
use crate::store::{ArticleRecord, Store};
use crate::types::{ArticleId, CountryCode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Neutral English nouns that trigger no category rule, entity or place.
pub const FILLER: &[&str] = &[
    "officials", "residents", "council", "statement", "authorities", "district", "community", "families",
    "neighbours", "volunteers", "streets", "bridge", "village", "harbour", "railway", "committee", "workers",
    "schools", "teachers", "parents", "children", "market", "traders", "farmers", "traffic", "drivers", "station",
    "airport", "passengers", "mayor", "minister", "parliament", "police", "firefighters", "shelter", "supplies",
    "electricity", "repairs", "engineers", "roads", "reporters", "witnesses", "crowd", "square", "church", "museum",
    "library", "garden", "coast", "valley", "island", "province", "county", "towns", "buildings", "houses",
    "apartments", "owners", "tenants", "shops", "customers", "tickets", "festival", "theatre", "newspaper", "radio",
    "television", "programme", "audience", "speech", "questions", "details", "plans", "budget", "costs", "grants",
    "projects", "progress", "ferries", "bakeries", "pharmacies", "tourists", "cyclists", "lorries", "warehouses",
];

const VERBS: &[&str] = &["delayed", "confirmed", "reported", "announced", "discussed", "rejected", "postponed", "reviewed"];
const DAYS: &[&str] = &["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

/// Sentence templates; `{k}` is the keyword, `{c}` the city, `{n}` a noun,
/// `{v}` a verb and `{d}` a weekday.
const TEMPLATES: &[&str] = &[
    "Officials in {c} said on {d} that the {k} had disrupted the {n} and the {n} across the {n}.",
    "According to the {n}, the {n} were {v} after the {k} reached the {n} near the {n}.",
    "Residents told the {n} that they were worried about the {n} and the {n}.",
    "The {n} of the {n} is expected to meet the {n} later this week.",
    "It was not clear when the {n} would be {v}, but the {n} said that there would be more {n} soon.",
    "Several {n} and {n} have already {v} their {n} because of the {n}.",
    "On {d} the {n} {v} a plan for the {n}, which has been under pressure since the {n}.",
    "Many {n} in the {n} were still waiting for the {n} to arrive.",
];

fn fill(rng: &mut impl Rng, template: &str, city: &str, keyword: &str) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        let slot = &rest[i + 1..i + 2];
        out.push_str(match slot {
            "k" => keyword,
            "c" => city,
            "v" => VERBS.choose(rng).expect("non-empty"),
            "d" => DAYS.choose(rng).expect("non-empty"),
            _ => FILLER.choose(rng).expect("non-empty"),
        });
        rest = &rest[i + 3..];
    }
    out.push_str(rest);
    out
}

/// Capital, source id and country code for each burst-corpus country.
pub const BURST_COUNTRIES: &[(&str, &str)] = &[
    ("Paris", "FR"),
    ("London", "GB"),
    ("Berlin", "DE"),
    ("Warsaw", "PL"),
    ("Madrid", "ES"),
    ("Rome", "IT"),
    ("Brussels", "BE"),
    ("Washington", "US"),
    ("Moscow", "RU"),
    ("Nairobi", "KE"),
];

/// Category id and the keyword that triggers it.
pub const BURST_CATEGORIES: &[(&str, &str)] =
    &[("flood", "flood"), ("earthquake", "earthquake"), ("cholera", "cholera"), ("elections", "election"), ("sport", "football")];

fn cc(s: &str) -> CountryCode {
    s.parse().expect("known country")
}

/// One English news source per burst country, id `src-<cc>`.
pub fn burst_sources() -> SourceRegistry {
    let mut reg = SourceRegistry::new();
    for (_, c) in BURST_COUNTRIES {
        reg.insert(Source {
            id: format!("src-{}", c.to_lowercase()),
            name: format!("{c} Daily"),
            country: cc(c),
            default_language: "en".into(),
            kind: SourceKind::News,
            url: format!("https://news.example/{}", c.to_lowercase()),
        })
        .expect("unique ids");
    }
    reg
}

fn filler(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| *FILLER.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

/// An English article about `keyword` in `city`, published at `at`. The
/// keyword and city each occur once in the body and once in the title.
pub fn cell_article(rng: &mut impl Rng, serial: usize, city: &str, country: &str, keyword: &str, at: DateTime<Utc>) -> RawArticle {
    let title = format!("{} {keyword} in {city}: {} {serial}", capitalise(FILLER.choose(rng).expect("non-empty")), filler(rng, 2));
    let mut sentences = vec![fill(rng, TEMPLATES[0], city, keyword)];
    let mut rest: Vec<&str> = TEMPLATES[2..].to_vec();
    rest.shuffle(rng);
    for t in rest.into_iter().take(3) {
        sentences.push(fill(rng, t, city, keyword));
    }
    RawArticle {
        external_id: format!("syn-{serial}"),
        source_id: format!("src-{}", country.to_lowercase()),
        url: format!("https://news.example/{}/{serial}", country.to_lowercase()),
        title,
        body: sentences.join(" "),
        published_at: at,
        fetched_at: at,
    }
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone)]
pub struct BurstSpec {
    pub seed: u64,
    pub days: u32,
    pub lambda: f64,
    pub first_day: NaiveDate,
    /// `(country index, category index)` of the burst cell.
    pub burst_cell: (usize, usize),
    pub burst_count: u32,
    /// Draw each cell's history so its total over the history days equals
    /// `lambda * (days - 1)`: a Poisson process conditioned on its mean.
    pub exact_baseline: bool,
}

impl Default for BurstSpec {
    fn default() -> Self {
        Self {
            seed: 20240601,
            days: 15,
            lambda: 2.0,
            first_day: NaiveDate::from_ymd_opt(2024, 6, 1).expect("valid date"),
            burst_cell: (3, 0),
            burst_count: 10,
            exact_baseline: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BurstCorpus {
    pub articles: Vec<RawArticle>,
    pub sources: SourceRegistry,
    /// Generated counts per `(country, category)` and day.
    pub counts: BTreeMap<(CountryCode, String), Vec<u32>>,
    pub days: Vec<NaiveDate>,
    /// End of the final day: the observation window is the final day.
    pub clock: DateTime<Utc>,
    pub burst: (CountryCode, String),
}

impl BurstCorpus {
    /// Total generated articles per day.
    pub fn global_daily(&self) -> Vec<u64> {
        (0..self.days.len()).map(|d| self.counts.values().map(|v| v[d] as u64).sum()).collect()
    }
}

/// `days` days of `lambda`-rate counts for every country × category cell,
/// with the final day of the burst cell set to `burst_count`.
pub fn burst_corpus(spec: &BurstSpec) -> BurstCorpus {
    let mut rng = rng(spec.seed);
    let poisson = Poisson::new(spec.lambda).expect("positive rate");
    let history = spec.days as usize - 1;
    let mut counts = BTreeMap::new();
    for (ci, (_, c)) in BURST_COUNTRIES.iter().enumerate() {
        for (ki, (cat, _)) in BURST_CATEGORIES.iter().enumerate() {
            let mut v: Vec<u32> = if spec.exact_baseline {
                let total = (spec.lambda * history as f64).round() as usize;
                let mut v = vec![0u32; history];
                for _ in 0..total {
                    v[rng.random_range(0..history)] += 1;
                }
                v
            } else {
                (0..history).map(|_| poisson.sample(&mut rng) as u32).collect()
            };
            let last = if (ci, ki) == spec.burst_cell { spec.burst_count } else { poisson.sample(&mut rng) as u32 };
            v.push(last);
            counts.insert((cc(c), cat.to_string()), v);
        }
    }
    let days: Vec<NaiveDate> = spec.first_day.iter_days().take(spec.days as usize).collect();
    let mut articles = Vec::new();
    let mut serial = 0;
    for (d, day) in days.iter().enumerate() {
        let start = Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).expect("midnight"));
        for (city, c) in BURST_COUNTRIES {
            for (cat, kw) in BURST_CATEGORIES {
                for _ in 0..counts[&(cc(c), cat.to_string())][d] {
                    serial += 1;
                    let at = start + Duration::seconds(rng.random_range(0..86_400));
                    articles.push(cell_article(&mut rng, serial, city, c, kw, at));
                }
            }
        }
    }
    articles.sort_by(|a, b| a.published_at.cmp(&b.published_at).then(a.external_id.cmp(&b.external_id)));
    let (bc, bk) = spec.burst_cell;
    BurstCorpus {
        articles,
        sources: burst_sources(),
        counts,
        clock: Utc.from_utc_datetime(&(days[days.len() - 1] + Duration::days(1)).and_hms_opt(0, 0, 0).expect("midnight")),
        days,
        burst: (cc(BURST_COUNTRIES[bc].1), BURST_CATEGORIES[bk].0.to_string()),
    }
}

/// Two topics with shared core vocabularies plus one filler word drawn from a
/// small pool common to both. Every third document of each topic is
/// duplicated under a fresh id. Returns the documents and the topic (0 or 1)
/// of each id.
pub fn two_topic_docs(seed: u64, per_topic: usize) -> (Vec<TermDoc>, BTreeMap<ArticleId, usize>) {
    const TOPICS: [&[&str]; 2] = [
        &["flood", "river", "levee", "rain", "evacuation", "water", "bank", "storm"],
        &["election", "ballot", "candidate", "vote", "campaign", "poll", "party", "turnout"],
    ];
    let mut rng = rng(seed);
    let mut docs = Vec::new();
    let mut labels = BTreeMap::new();
    let mut id = 0;
    for (t, vocab) in TOPICS.iter().enumerate() {
        for i in 0..per_topic {
            let mut terms = BTreeMap::new();
            let mut core: Vec<&str> = vocab.to_vec();
            core.shuffle(&mut rng);
            for w in &core[..6] {
                terms.insert(w.to_string(), rng.random_range(1..=3));
            }
            terms.insert(format!("filler{}", rng.random_range(0..4)), 1);
            id += 1;
            labels.insert(id, t);
            docs.push(TermDoc { article_id: id, term_counts: terms.clone() });
            if i % 3 == 0 {
                id += 1;
                labels.insert(id, t);
                docs.push(TermDoc { article_id: id, term_counts: terms });
            }
        }
    }
    (docs, labels)
}

pub const SEARCH_VOCAB: &[&str] = &[
    "storm", "river", "market", "vote", "virus", "bridge", "summit", "strike", "harvest", "border", "rescue", "court",
    "budget", "airport", "school", "museum", "quake", "protest", "treaty", "energy", "drought", "fire", "trial",
    "festival", "railway", "harbour", "minister", "council", "village", "island",
];
const LANGS: &[&str] = &["en", "de", "fr", "es", "it"];
const COUNTRIES: &[&str] = &["FR", "DE", "GB", "ES", "IT", "PL", "US", "KE"];
const CATEGORIES: &[&str] = &["flood", "health", "economy", "sport", "elections", "terrorism"];

/// A store of `n` random records plus window clusters over them, for
/// oracle comparisons. Record ids are `1..=n`.
pub fn random_store(seed: u64, n: usize) -> Store {
    let mut rng = rng(seed);
    let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).single().expect("valid");
    let mut clusters: Vec<Cluster> = (1..=30u64)
        .map(|id| Cluster {
            id,
            kind: ClusterKind::Window,
            language: LANGS[id as usize % LANGS.len()].into(),
            member_ids: Vec::new(),
            centroid: Default::default(),
            medoid_id: 0,
            title: format!("cluster {id}"),
            window_start: t0 + Duration::hours(id as i64),
            window_end: t0 + Duration::hours(id as i64),
            categories: BTreeMap::new(),
            entities: BTreeMap::new(),
            toponyms: BTreeMap::new(),
            size_history: Vec::new(),
            live: id % 4 != 0,
            retired_at: None,
            merged_into: None,
            day: None,
            story_id: None,
        })
        .collect();
    let mut store = Store::in_memory();
    for id in 1..=n as u64 {
        let language = LANGS.choose(&mut rng).expect("non-empty").to_string();
        let pick = |rng: &mut ChaCha8Rng, k: usize| (0..k).map(|_| *SEARCH_VOCAB.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ");
        let subset = |rng: &mut ChaCha8Rng, items: &[&str], p: f64| -> BTreeSet<String> {
            items.iter().filter(|_| rng.random_bool(p)).map(|s| s.to_string()).collect()
        };
        let cluster_id = if rng.random_bool(0.7) {
            let own: Vec<&mut Cluster> = clusters.iter_mut().filter(|c| c.language == language).collect();
            let c = own.into_iter().nth(rng.random_range(0..6)).expect("six clusters per language");
            c.member_ids.push(id);
            Some(c.id)
        } else {
            None
        };
        let rec = ArticleRecord {
            id,
            external_id: format!("r{id}"),
            source_id: format!("s{}", id % 7),
            url: format!("https://example.org/{id}"),
            title: pick(&mut rng, 4),
            snippet: pick(&mut rng, 12),
            language,
            country_of_source: cc(COUNTRIES.choose(&mut rng).expect("non-empty")),
            source_kind: [SourceKind::News, SourceKind::Agency, SourceKind::Social, SourceKind::Government][id as usize % 4],
            published_at: t0 + Duration::minutes(rng.random_range(0..60 * 24 * 30)),
            categories: subset(&mut rng, CATEGORIES, 0.25),
            entity_ids: (1..=20).filter(|_| rng.random_bool(0.1)).collect(),
            toponym_refs: BTreeSet::new(),
            countries_about: subset(&mut rng, COUNTRIES, 0.15).iter().map(|c| cc(c)).collect(),
            tonality: rng.random_range(-1.0..1.0),
            cluster_id,
        };
        store.commit(rec).expect("fresh ids");
    }
    for mut c in clusters {
        if let Some(&m) = c.member_ids.first() {
            c.medoid_id = m;
            c.size_history = vec![SizePoint { bucket: c.window_start, count: c.member_ids.len(), medoid_id: m }];
            store.put_cluster(c);
        }
    }
    store
}

/// A random channel expression of at most `depth` levels over the
/// vocabulary of [`random_store`].
pub fn random_channel_expr(rng: &mut impl Rng, depth: usize) -> ChannelExpr {
    if depth > 1 && rng.random_bool(0.45) {
        let of = (0..rng.random_range(1..=3)).map(|_| random_channel_expr(rng, depth - 1)).collect();
        return if rng.random_bool(0.5) { ChannelExpr::Union { of } } else { ChannelExpr::Intersection { of } };
    }
    let lang = || LANGS.to_vec();
    match rng.random_range(0..7) {
        0 => ChannelExpr::Category { id: CATEGORIES.choose(rng).expect("non-empty").to_string() },
        1 => ChannelExpr::TopStories { language: lang().choose(rng).expect("non-empty").to_string(), n: rng.random_range(1..=5) },
        2 => ChannelExpr::CountrySource { country: cc(COUNTRIES.choose(rng).expect("non-empty")) },
        3 => ChannelExpr::CountryAbout { country: cc(COUNTRIES.choose(rng).expect("non-empty")) },
        4 => ChannelExpr::Entity { id: rng.random_range(1..=20) },
        5 => ChannelExpr::Language { language: lang().choose(rng).expect("non-empty").to_string() },
        _ => {
            let k = rng.random_range(1..=2);
            ChannelExpr::Search { terms: (0..k).map(|_| *SEARCH_VOCAB.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ") }
        }
    }
}

/// Articles with `words`-word bodies made of unique tokens
/// (`b<article>w<position>`), so leaked body text is detectable. Each body
/// carries an attributed quote beyond the snippet.
pub fn long_body_articles(seed: u64, n: usize, words: usize) -> (Vec<RawArticle>, SourceRegistry) {
    let mut rng = rng(seed);
    let t0 = Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).single().expect("valid");
    let articles = (0..n)
        .map(|i| {
            let mut body: Vec<String> = (0..words).map(|p| format!("b{i}w{p}")).collect();
            let at = words * 3 / 4;
            body[at] = format!("\"b{i}w{at} b{i}w{}\", said Angela Merkel.", at + 1);
            body[at + 1] = String::new();
            let (city, c) = BURST_COUNTRIES[i % BURST_COUNTRIES.len()];
            RawArticle {
                external_id: format!("long-{i}"),
                source_id: format!("src-{}", c.to_lowercase()),
                url: format!("https://news.example/long/{i}"),
                title: format!("{city} {} {i}", filler(&mut rng, 3)),
                body: body.into_iter().filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" "),
                published_at: t0 + Duration::minutes(7 * i as i64),
                fetched_at: t0 + Duration::minutes(7 * i as i64),
            }
        })
        .collect();
    (articles, burst_sources())
}

/// Monthly tonality drifting linearly from `-0.2` to `+0.2` over `months`
/// months, ten records per month. Returns the store and the mean per month.
pub fn tonality_drift(seed: u64, months: u32) -> (Store, Vec<(NaiveDate, f64)>) {
    let mut rng = rng(seed);
    let mut store = Store::in_memory();
    let mut expected = Vec::new();
    let first = NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid");
    let mut id = 0;
    for m in 0..months {
        let month = first.checked_add_months(chrono::Months::new(m)).expect("in range");
        let mean = -0.2 + 0.4 * m as f64 / (months.max(2) - 1) as f64;
        let offsets: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..0.05)).collect();
        for (k, off) in offsets.iter().flat_map(|o| [*o, -*o]).enumerate() {
            id += 1;
            let day = month.with_day(1 + k as u32).expect("valid day");
            store
                .commit(ArticleRecord {
                    id,
                    external_id: format!("t{id}"),
                    source_id: "s".into(),
                    url: String::new(),
                    title: "tonality".into(),
                    snippet: String::new(),
                    language: "en".into(),
                    country_of_source: cc("GB"),
                    source_kind: SourceKind::Social,
                    published_at: Utc.from_utc_datetime(&day.and_hms_opt(12, 0, 0).expect("noon")),
                    categories: BTreeSet::from(["science_technology".to_string()]),
                    entity_ids: BTreeSet::new(),
                    toponym_refs: BTreeSet::new(),
                    countries_about: BTreeSet::new(),
                    tonality: mean + off,
                    cluster_id: None,
                })
                .expect("fresh ids");
        }
        expected.push((month, mean));
    }
    (store, expected)
}
