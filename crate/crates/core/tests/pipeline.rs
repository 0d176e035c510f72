//! End-to-end runs over generated corpora.

use riskminer_core::corpus::{read_corpus, CorpusFormat};
use riskminer_core::eval::{split, SplitRatios};
use riskminer_core::features::{build_vocabulary, fit_idf};
use riskminer_core::models::{ModelKind, TrainedModel};
use riskminer_core::pipeline::{compare_models, evaluate_model, predict_model, train_model, ComparisonConfig, Dataset, ModelSettings};
use riskminer_core::preprocess::{preprocess_corpus, PreprocessConfig};
use riskminer_core::synth::{risk_corpus, RiskCorpusConfig};
use riskminer_core::Execution;

fn quick_settings(seed: u64) -> ModelSettings {
    let mut s = ModelSettings::with_seed(seed);
    s.forest.n_trees = 20;
    s.recurrent.epochs = 4;
    s.recurrent.hidden = 12;
    s.recurrent.embed_dim = 12;
    s
}

fn dataset(n_docs: usize, seed: u64) -> (Dataset, Vec<usize>, Vec<usize>) {
    let corpus = risk_corpus(&RiskCorpusConfig { n_docs, seed, ..RiskCorpusConfig::default() });
    let docs = preprocess_corpus(&corpus, &PreprocessConfig::default(), Execution::Parallel).unwrap();
    let labels: Vec<usize> = (0..docs.len()).map(|i| i % 5).collect();
    let s = split(docs.len(), SplitRatios::default(), seed, Some(&labels)).unwrap();
    let train_tokens: Vec<&[String]> = s.train.iter().map(|&i| docs[i].tokens.as_slice()).collect();
    let vocab = build_vocabulary(&train_tokens, 1, 1.0).unwrap();
    (Dataset::build(&docs, &fit_idf(&vocab), Execution::Parallel), s.train, s.test)
}

#[test]
fn every_kind_trains_round_trips_and_beats_chance() {
    let (data, train, test) = dataset(300, 9);
    let settings = ModelSettings::with_seed(9);
    for kind in ModelKind::ALL {
        let model = train_model(kind, &data, &train, &settings, Execution::Parallel).unwrap();
        let ev = evaluate_model(&model, &data, &test).unwrap();
        assert!(ev.metrics.accuracy > 0.4, "{}: {}", kind.as_str(), ev.metrics.accuracy);
        assert_eq!(ev.metrics.total as usize, test.len());
        let (back, meta) = TrainedModel::from_text(&model.to_text(&vec![("seed".into(), "9".into())])).unwrap();
        assert_eq!(meta, vec![("seed".to_string(), "9".to_string())]);
        assert_eq!(predict_model(&back, &data, &test).unwrap(), predict_model(&model, &data, &test).unwrap());
    }
}

#[test]
fn execution_mode_does_not_change_results() {
    let (data, train, _) = dataset(150, 2);
    let settings = quick_settings(2);
    for kind in ModelKind::ALL {
        let a = train_model(kind, &data, &train, &settings, Execution::Sequential).unwrap();
        let b = train_model(kind, &data, &train, &settings, Execution::Parallel).unwrap();
        assert_eq!(a.to_text(&Vec::new()), b.to_text(&Vec::new()), "{}", kind.as_str());
    }
}

#[test]
fn comparison_is_reproducible() {
    let corpus = risk_corpus(&RiskCorpusConfig { n_docs: 200, seed: 4, ..RiskCorpusConfig::default() });
    let mut cfg = ComparisonConfig::new(4);
    cfg.settings = quick_settings(4);
    cfg.kinds = vec![ModelKind::NaiveBayes, ModelKind::Forest];
    let a = compare_models(&corpus, "generated", &cfg).unwrap();
    let b = compare_models(&corpus, "generated", &cfg).unwrap();
    assert_eq!(a, b);
    let table = a.table().unwrap();
    assert!(table.contains("Naive Bayes") && table.contains("Random Forest"));
    assert!(table.contains("dataset: generated") && table.contains("seed: 4"));
}

#[test]
fn generated_corpus_survives_jsonl() {
    let corpus = risk_corpus(&RiskCorpusConfig { n_docs: 40, ..RiskCorpusConfig::default() });
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf).unwrap();
    assert_eq!(read_corpus(buf.as_slice(), CorpusFormat::Jsonl).unwrap(), corpus);
}
