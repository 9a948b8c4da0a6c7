use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use newswatch_bench::{corpus, processed};
use newswatch_core::alerting::alert_board;
use newswatch_core::channels::evaluate;
use newswatch_core::clustering::{cluster_window, vectorize, DEFAULT_THRESHOLD};
use newswatch_core::linguistic::LinguisticResources;
use newswatch_core::pipeline::run_pipeline;
use newswatch_core::store::SearchQuery;
use newswatch_core::synthetic::{random_channel_expr, random_store, rng, two_topic_docs};
use newswatch_core::{AlertConfig, PipelineConfig, Store};

fn pipeline(c: &mut Criterion) {
    let res = LinguisticResources::bundled();
    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for days in [3, 15] {
        let corpus = corpus(days);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{days}d")), &corpus, |b, corpus| {
            b.iter_batched(
                || (corpus.articles.clone(), Store::in_memory()),
                |(articles, mut store)| run_pipeline(articles, &corpus.sources, &cfg, &res, &mut store).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn clustering(c: &mut Criterion) {
    let mut group = c.benchmark_group("cluster_window");
    for per_topic in [50, 200] {
        let (docs, _) = two_topic_docs(1, per_topic);
        let vectors = vectorize(&docs).vectors;
        group.bench_with_input(BenchmarkId::from_parameter(vectors.len()), &vectors, |b, v| {
            b.iter(|| cluster_window(black_box(v), DEFAULT_THRESHOLD))
        });
    }
    group.finish();
}

fn alerts(c: &mut Criterion) {
    let corpus = corpus(15);
    let store = processed(&corpus);
    let cfg = AlertConfig::default();
    c.bench_function("alert_board", |b| b.iter(|| alert_board(black_box(&store), corpus.clock, &cfg).unwrap()));
}

fn queries(c: &mut Criterion) {
    let store = random_store(1, 10_000);
    let mut r = rng(2);
    let exprs: Vec<_> = (0..50).map(|_| random_channel_expr(&mut r, 4)).collect();
    c.bench_function("channel_evaluate_50x10k", |b| {
        b.iter(|| exprs.iter().map(|e| evaluate(e, &store, None).unwrap().len()).sum::<usize>())
    });
    let q = SearchQuery::terms("storm river");
    c.bench_function("search_10k", |b| b.iter(|| store.search(black_box(&q)).len()));
}

criterion_group!(benches, pipeline, clustering, alerts, queries);
criterion_main!(benches);
