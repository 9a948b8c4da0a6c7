//! Fixtures shared by the benchmarks.

use newswatch_core::linguistic::LinguisticResources;
use newswatch_core::pipeline::run_pipeline;
use newswatch_core::synthetic::{burst_corpus, BurstCorpus, BurstSpec};
use newswatch_core::{PipelineConfig, Store};

/// The burst corpus over `days` days.
pub fn corpus(days: u32) -> BurstCorpus {
    burst_corpus(&BurstSpec { days, ..BurstSpec::default() })
}

/// An in-memory store holding the processed burst corpus.
pub fn processed(corpus: &BurstCorpus) -> Store {
    let mut store = Store::in_memory();
    run_pipeline(corpus.articles.clone(), &corpus.sources, &PipelineConfig::default(), &LinguisticResources::bundled(), &mut store)
        .expect("pipeline runs");
    store
}
