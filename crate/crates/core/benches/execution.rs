//! Sequential vs data-parallel execution on the batch loops that use it.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riskminer_core::features::{build_vocabulary, fit_idf, tfidf_batch};
use riskminer_core::models::{train_forest, ForestConfig, Labels};
use riskminer_core::preprocess::{preprocess_corpus, PreprocessConfig};
use riskminer_core::synth::{gaussian_blobs, risk_corpus, RiskCorpusConfig};
use riskminer_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn forest(c: &mut Criterion) {
    let centers: Vec<Vec<f64>> = (0..4).map(|k| (0..8).map(|j| ((k * 8 + j) % 5) as f64).collect()).collect();
    let (x, y) = gaussian_blobs(250, &centers, 1.5, 1);
    let names: Vec<String> = y.iter().map(|c| format!("c{c}")).collect();
    let labels = Labels::new(&names);
    let cfg = ForestConfig { n_trees: 64, seed: 1, ..ForestConfig::default() };
    let mut group = c.benchmark_group("forest_train_64_trees");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_forest(black_box(&x), &labels, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn tfidf(c: &mut Criterion) {
    let corpus = risk_corpus(&RiskCorpusConfig { n_docs: 5000, ..RiskCorpusConfig::default() });
    let docs = preprocess_corpus(&corpus, &PreprocessConfig::default(), Execution::Parallel).unwrap();
    let tokens: Vec<&[String]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
    let model = fit_idf(&build_vocabulary(&tokens, 1, 1.0).unwrap());
    let mut group = c.benchmark_group("tfidf_batch_5000_docs");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| tfidf_batch(black_box(&tokens), &model, exec)));
    }
    group.finish();
}

fn preprocess(c: &mut Criterion) {
    let corpus = risk_corpus(&RiskCorpusConfig { n_docs: 5000, ..RiskCorpusConfig::default() });
    let cfg = PreprocessConfig::default();
    let mut group = c.benchmark_group("preprocess_5000_docs");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| preprocess_corpus(black_box(&corpus), &cfg, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, forest, tfidf, preprocess);
criterion_main!(benches);
