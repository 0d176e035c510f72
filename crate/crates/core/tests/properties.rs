use proptest::prelude::*;

use riskminer_core::corpus::{read_corpus, Corpus, CorpusFormat, Document};
use riskminer_core::eval::{apportion, confusion_from_indices, kfold, metrics, roc, split, stratified_kfold, DataSplit, SplitRatios};
use riskminer_core::features::{build_vocabulary, fit_idf, tfidf, tfidf_batch, SparseVector, TfidfModel};
use riskminer_core::finance::yoy_change;
use riskminer_core::models::nn::softmax;
use riskminer_core::preprocess::{preprocess_text, PreprocessConfig, StopwordSet};
use riskminer_core::Execution;

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["risk", "credit", "market", "loss", "debt", "cash", "rate", "policy"]).prop_map(str::to_string)
}

fn docs() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(word(), 1..12), 1..10)
}

fn is_partition(parts: &[&[usize]], n: usize) -> bool {
    let mut all: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    all.sort_unstable();
    all == (0..n).collect::<Vec<_>>()
}

proptest! {
    #[test]
    fn sparse_vectors_are_canonical(pairs in prop::collection::vec((0usize..20, -3i32..4), 0..30)) {
        let raw: Vec<(usize, f64)> = pairs.iter().map(|&(i, v)| (i, v as f64)).collect();
        let v = SparseVector::from_pairs(raw.clone());
        prop_assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(v.entries().iter().all(|&(_, x)| x != 0.0));
        let dense = v.to_dense(20);
        for i in 0..20 {
            let sum: f64 = raw.iter().filter(|p| p.0 == i).map(|p| p.1).sum();
            prop_assert_eq!(dense[i], sum);
        }
    }

    #[test]
    fn tfidf_is_count_times_idf(corpus in docs()) {
        let vocab = build_vocabulary(&corpus, 1, 1.0).unwrap();
        let model = fit_idf(&vocab);
        let n = corpus.len() as f64;
        for doc in &corpus {
            let v = tfidf(doc, &model);
            for &(i, w) in v.entries() {
                let tf = doc.iter().filter(|t| t.as_str() == vocab.token(i)).count() as f64;
                let df = corpus.iter().filter(|d| d.iter().any(|t| t == vocab.token(i))).count() as f64;
                prop_assert!((w - tf * (n / (1.0 + df)).ln()).abs() < 1e-12);
            }
        }
        let seq = tfidf_batch(&corpus, &model, Execution::Sequential);
        prop_assert_eq!(&seq, &tfidf_batch(&corpus, &model, Execution::Parallel));
    }

    #[test]
    fn tfidf_model_text_round_trip(corpus in docs()) {
        let model = fit_idf(&build_vocabulary(&corpus, 1, 1.0).unwrap());
        let meta = vec![("seed".to_string(), "4".to_string())];
        let (back, back_meta) = TfidfModel::from_text(&model.to_text(&meta)).unwrap();
        prop_assert_eq!(back.idf(), model.idf());
        prop_assert_eq!(back.vocab(), model.vocab());
        prop_assert_eq!(back_meta, meta);
    }

    #[test]
    fn apportion_is_exact_and_fair(n in 0usize..500, a in 1u32..100, b in 1u32..100, c in 1u32..100) {
        let total = (a + b + c) as f64;
        let w = [a as f64 / total, b as f64 / total, c as f64 / total];
        let sizes = apportion(n, &w);
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        for (s, wi) in sizes.iter().zip(w) {
            let quota = wi * n as f64;
            prop_assert!((*s as f64) >= quota.floor() - 1e-9 && (*s as f64) <= quota.ceil() + 1e-9);
        }
    }

    #[test]
    fn splits_partition_indices(n in 3usize..300, seed in any::<u64>(), classes in 1usize..5) {
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        for strat in [None, Some(labels.as_slice())] {
            let s = split(n, SplitRatios::default(), seed, strat).unwrap();
            prop_assert!(is_partition(&[&s.train, &s.val, &s.test], n));
            prop_assert_eq!(&s, &split(n, SplitRatios::default(), seed, strat).unwrap());
        }
        let plain = split(n, SplitRatios::default(), seed, None).unwrap();
        let sizes = apportion(n, &[0.7, 0.15, 0.15]);
        prop_assert_eq!(vec![plain.train.len(), plain.val.len(), plain.test.len()], sizes);
        let (back, _) = DataSplit::from_text(&plain.to_text(&Vec::new())).unwrap();
        prop_assert_eq!(back, plain);
    }

    #[test]
    fn folds_are_balanced(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold(n, k, seed).unwrap();
        let refs: Vec<&[usize]> = folds.iter().map(Vec::as_slice).collect();
        prop_assert!(is_partition(&refs, n));
        let (lo, hi) = (folds.iter().map(Vec::len).min().unwrap(), folds.iter().map(Vec::len).max().unwrap());
        prop_assert!(hi - lo <= 1);
        let labels: Vec<usize> = (0..n).map(|i| (i * 7) % 3).collect();
        let strat = stratified_kfold(&labels, k, seed).unwrap();
        let refs: Vec<&[usize]> = strat.iter().map(Vec::as_slice).collect();
        prop_assert!(is_partition(&refs, n));
        for c in 0..3 {
            let per: Vec<usize> = strat.iter().map(|f| f.iter().filter(|&&i| labels[i] == c).count()).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn confusion_and_metrics_are_consistent(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200)) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let labels: Vec<String> = (0..4).map(|i| format!("c{i}")).collect();
        let cm = confusion_from_indices(&truth, &pred, labels.clone()).unwrap();
        prop_assert_eq!(cm.total(), truth.len() as u64);
        let swapped = confusion_from_indices(&pred, &truth, labels).unwrap();
        prop_assert_eq!(&swapped, &cm.transpose());
        let m = metrics(&cm).unwrap();
        let correct = truth.iter().zip(&pred).filter(|(a, b)| a == b).count();
        prop_assert!((m.accuracy - correct as f64 / truth.len() as f64).abs() < 1e-15);
        for x in [m.macro_precision, m.macro_recall, m.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn auc_is_symmetric_under_negation(data in prop::collection::vec((any::<bool>(), 0u8..10), 2..150)) {
        let truths: Vec<bool> = data.iter().map(|d| d.0).collect();
        prop_assume!(truths.iter().any(|&t| t) && truths.iter().any(|&t| !t));
        let scores: Vec<f64> = data.iter().map(|d| d.1 as f64).collect();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = roc(&truths, &scores).unwrap();
        let b = roc(&truths, &neg).unwrap();
        prop_assert!((a.auc + b.auc - 1.0).abs() < 1e-12);
        prop_assert_eq!(a.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(a.points.last().copied(), Some((1.0, 1.0)));
        prop_assert!(a.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0f64..500.0, 1..10)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn preprocessing_output_is_clean(text in "[A-Za-z<>/ ,.]{0,80}") {
        let stop = StopwordSet::new(["the", "and", "of"]);
        let cfg = PreprocessConfig { stopwords: stop.clone(), stemming: false, ..PreprocessConfig::default() };
        let tokens = preprocess_text(&text, &cfg).unwrap();
        for t in &tokens {
            prop_assert!(!t.is_empty());
            prop_assert!(!t.chars().any(char::is_uppercase));
            prop_assert!(!stop.contains(t));
            prop_assert!(!t.contains('<') && !t.contains('>'));
        }
    }

    #[test]
    fn corpus_jsonl_round_trip(texts in prop::collection::vec("[a-zA-Z0-9 ,\"\\\\]{1,40}", 1..8)) {
        prop_assume!(texts.iter().all(|t| !t.trim().is_empty()));
        let docs: Vec<Document> = texts.iter().enumerate().map(|(i, t)| Document::new(format!("d{i}"), t.clone()).with_label("x")).collect();
        let corpus = Corpus::new(docs).unwrap();
        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).unwrap();
        let back = read_corpus(buf.as_slice(), CorpusFormat::Jsonl).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn yoy_inverts(previous in 0.1f64..1e4, pct in -99.0f64..500.0) {
        let current = previous * (1.0 + pct / 100.0);
        prop_assert!((yoy_change(current, previous).unwrap() - pct).abs() < 1e-6);
    }
}
