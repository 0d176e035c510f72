//! Stage wiring shared by the command-line tool and the end-to-end model
//! comparison: per-kind feature views, training, prediction and evaluation
//! over index subsets, and the comparison table.
//!
//! Feature views: naive Bayes reads raw counts, the SVM reads L2-normalized
//! TF-IDF, the forest reads dense TF-IDF and the recurrent models read
//! vocabulary-id sequences (out-of-vocabulary tokens dropped).

use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::Corpus;
use crate::eval::{self, ConfusionMatrix, EvalError, MetricsReport, RocCurve, SplitRatios};
use crate::exec::Execution;
use crate::features::{bow, build_vocabulary, fit_idf, tfidf, FeatureError, SparseVector, TfidfModel};
use crate::models::{
    predict_forest, predict_nb, predict_recurrent, predict_svm, train_forest, train_nb, train_recurrent, train_svm,
    ForestConfig, Labels, ModelError, ModelKind, Prediction, RecurrentConfig, RecurrentKind, SvmConfig, TrainedModel,
};
use crate::preprocess::{preprocess_corpus, PreprocessConfig, PreprocessError, TokenizedDocument};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("document {0:?} has no label")]
    Unlabeled(String),
    #[error("document {0:?} has no in-vocabulary tokens")]
    EmptySequence(String),
    #[error("model expects {expected} features but the vocabulary has {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("no model results to report")]
    NoResults,
}

/// All feature views of a tokenized corpus under one TF-IDF model.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<Option<String>>,
    pub counts: Vec<SparseVector>,
    /// TF-IDF rows scaled to unit L2 norm (all-zero rows stay zero).
    pub tfidf: Vec<SparseVector>,
    pub sequences: Vec<Vec<usize>>,
    pub vocab_tokens: Vec<String>,
}

fn l2_normalize(v: SparseVector) -> SparseVector {
    let norm = v.entries().iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    SparseVector::from_pairs(v.entries().iter().map(|&(i, x)| (i, x / norm)).collect())
}

impl Dataset {
    pub fn build(docs: &[TokenizedDocument], model: &TfidfModel, exec: Execution) -> Self {
        let vocab = model.vocab();
        let views = exec.map_slice(docs, |d| {
            (bow(&d.tokens, vocab), l2_normalize(tfidf(&d.tokens, model)), vocab.encode(&d.tokens))
        });
        let mut data = Dataset {
            ids: docs.iter().map(|d| d.doc_id.clone()).collect(),
            labels: docs.iter().map(|d| d.label.clone()).collect(),
            counts: Vec::with_capacity(docs.len()),
            tfidf: Vec::with_capacity(docs.len()),
            sequences: Vec::with_capacity(docs.len()),
            vocab_tokens: vocab.tokens().to_vec(),
        };
        for (c, t, s) in views {
            data.counts.push(c);
            data.tfidf.push(t);
            data.sequences.push(s);
        }
        data
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_tokens.len()
    }

    /// Labels of the given rows; every row must be labelled.
    pub fn labels_for(&self, idx: &[usize]) -> Result<Labels, PipelineError> {
        let labels = idx
            .iter()
            .map(|&i| self.labels[i].as_deref().ok_or_else(|| PipelineError::Unlabeled(self.ids[i].clone())))
            .collect::<Result<Vec<&str>, _>>()?;
        Ok(Labels::new(&labels))
    }

    fn dense(&self, i: usize) -> Vec<f64> {
        self.tfidf[i].to_dense(self.vocab_size())
    }
}

/// Hyperparameters for every model kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub nb_alpha: f64,
    pub svm: SvmConfig,
    pub forest: ForestConfig,
    /// Shared by both recurrent kinds; `kind` is overridden per model.
    pub recurrent: RecurrentConfig,
    /// Optional embedding table (`vocab * embed_dim`) for recurrent models.
    pub embedding_init: Option<Vec<f64>>,
}

impl ModelSettings {
    pub fn with_seed(seed: u64) -> Self {
        ModelSettings {
            nb_alpha: 1.0,
            svm: SvmConfig { seed, ..SvmConfig::default() },
            forest: ForestConfig { seed, ..ForestConfig::default() },
            recurrent: RecurrentConfig { seed, ..RecurrentConfig::new(RecurrentKind::Lstm) },
            embedding_init: None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.svm.seed = seed;
        self.forest.seed = seed;
        self.recurrent.seed = seed;
    }
}

/// Trains one model kind on rows `idx`.
pub fn train_model(kind: ModelKind, data: &Dataset, idx: &[usize], settings: &ModelSettings, exec: Execution) -> Result<TrainedModel, PipelineError> {
    let labels = data.labels_for(idx)?;
    let v = data.vocab_size();
    let model = match kind {
        ModelKind::NaiveBayes => {
            let rows: Vec<SparseVector> = idx.iter().map(|&i| data.counts[i].clone()).collect();
            TrainedModel::NaiveBayes(train_nb(&rows, v, &labels, settings.nb_alpha)?)
        }
        ModelKind::Svm => {
            let rows: Vec<SparseVector> = idx.iter().map(|&i| data.tfidf[i].clone()).collect();
            TrainedModel::Svm(train_svm(&rows, v, &labels, &settings.svm, exec)?.0)
        }
        ModelKind::Forest => {
            let rows: Vec<Vec<f64>> = idx.iter().map(|&i| data.dense(i)).collect();
            TrainedModel::Forest(train_forest(&rows, &labels, &settings.forest, exec)?)
        }
        ModelKind::Rnn | ModelKind::Lstm => {
            let recurrent_kind = if kind == ModelKind::Rnn { RecurrentKind::Rnn } else { RecurrentKind::Lstm };
            let cfg = RecurrentConfig { kind: recurrent_kind, ..settings.recurrent.clone() };
            let seqs: Vec<Vec<usize>> = idx.iter().map(|&i| data.sequences[i].clone()).collect();
            let mut m = train_recurrent(&seqs, v, &labels, &cfg, settings.embedding_init.as_deref(), exec).map_err(|e| match e {
                ModelError::EmptySequence(j) => PipelineError::EmptySequence(data.ids[idx[j]].clone()),
                other => other.into(),
            })?;
            m.tokens = Some(data.vocab_tokens.clone());
            TrainedModel::Recurrent(m)
        }
    };
    Ok(model)
}

fn check_features(expected: usize, data: &Dataset) -> Result<(), PipelineError> {
    if expected != data.vocab_size() {
        return Err(PipelineError::FeatureMismatch { expected, got: data.vocab_size() });
    }
    Ok(())
}

/// Predictions for rows `idx`, in order. Recurrent models re-encode tokens
/// through their own stored vocabulary when they have one.
pub fn predict_model(model: &TrainedModel, data: &Dataset, idx: &[usize]) -> Result<Vec<Prediction>, PipelineError> {
    match model {
        TrainedModel::NaiveBayes(m) => {
            check_features(m.vocab_size, data)?;
            Ok(idx.iter().map(|&i| predict_nb(m, &data.counts[i])).collect())
        }
        TrainedModel::Svm(m) => {
            check_features(m.n_features, data)?;
            Ok(idx.iter().map(|&i| predict_svm(m, &data.tfidf[i])).collect::<Result<_, _>>()?)
        }
        TrainedModel::Forest(m) => {
            check_features(m.n_features, data)?;
            Ok(idx.iter().map(|&i| predict_forest(m, &data.dense(i))).collect::<Result<_, _>>()?)
        }
        TrainedModel::Recurrent(m) => {
            let same_vocab = m.tokens.as_deref().is_none_or(|t| t == data.vocab_tokens.as_slice());
            if !same_vocab {
                return Err(PipelineError::FeatureMismatch { expected: m.vocab_size, got: data.vocab_size() });
            }
            Ok(idx.iter().map(|&i| predict_recurrent(m, &data.sequences[i])).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    /// One-vs-rest curve per model class (`None` when undefined on this subset).
    pub roc: Vec<Option<RocCurve>>,
    pub macro_auc: Option<f64>,
    pub predictions: Vec<Prediction>,
}

/// Confusion, macro metrics and one-vs-rest ROC on rows `idx`. Labels absent
/// from the model are appended to the label order and count as errors.
pub fn evaluate_model(model: &TrainedModel, data: &Dataset, idx: &[usize]) -> Result<Evaluation, PipelineError> {
    let predictions = predict_model(model, data, idx)?;
    let mut order: Vec<String> = model.classes().to_vec();
    let mut extra: Vec<String> = Vec::new();
    for &i in idx {
        let l = data.labels[i].as_ref().ok_or_else(|| PipelineError::Unlabeled(data.ids[i].clone()))?;
        if !order.contains(l) && !extra.contains(l) {
            extra.push(l.clone());
        }
    }
    extra.sort();
    order.extend(extra);
    let pos = |l: &str| order.iter().position(|x| x == l).expect("label order covers all labels");
    let truth: Vec<usize> = idx.iter().map(|&i| pos(data.labels[i].as_deref().unwrap())).collect();
    let pred: Vec<usize> = predictions.iter().map(|p| p.class_index).collect();
    let confusion = eval::confusion_from_indices(&truth, &pred, order)?;
    let metrics = eval::metrics(&confusion)?;
    let scores: Vec<Vec<f64>> = predictions.iter().map(|p| p.scores.clone()).collect();
    let (roc, macro_auc) = match eval::roc_one_vs_rest(&truth, &scores, model.classes().len()) {
        Ok((curves, auc)) => (curves, Some(auc)),
        Err(EvalError::SingleClass) => (vec![None; model.classes().len()], None),
        Err(e) => return Err(e.into()),
    };
    Ok(Evaluation { confusion, metrics, roc, macro_auc, predictions })
}

/// Where a comparison's numbers came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub dataset: String,
    pub split: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub preprocess: PreprocessConfig,
    pub ratios: SplitRatios,
    pub min_df: usize,
    pub max_df_ratio: f64,
    pub settings: ModelSettings,
    pub kinds: Vec<ModelKind>,
    pub seed: u64,
    pub exec: Execution,
}

impl ComparisonConfig {
    pub fn new(seed: u64) -> Self {
        ComparisonConfig {
            preprocess: PreprocessConfig::default(),
            ratios: SplitRatios::default(),
            min_df: 1,
            max_df_ratio: 1.0,
            settings: ModelSettings::with_seed(seed),
            kinds: ModelKind::ALL.to_vec(),
            seed,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelComparison {
    pub results: Vec<(ModelKind, Evaluation)>,
    pub provenance: Provenance,
}

/// Preprocesses, makes a stratified split, fits the vocabulary on the
/// training part, then trains every requested kind and evaluates it on the
/// held-out test part.
pub fn compare_models(corpus: &Corpus, dataset: &str, cfg: &ComparisonConfig) -> Result<ModelComparison, PipelineError> {
    let docs = preprocess_corpus(corpus, &cfg.preprocess, cfg.exec)?;
    let all: Vec<usize> = (0..docs.len()).collect();
    let labels = {
        let ls = all
            .iter()
            .map(|&i| docs[i].label.as_deref().ok_or_else(|| PipelineError::Unlabeled(docs[i].doc_id.clone())))
            .collect::<Result<Vec<&str>, _>>()?;
        Labels::new(&ls)
    };
    let split = eval::split(docs.len(), cfg.ratios, cfg.seed, Some(labels.ids()))?;
    let train_tokens: Vec<&[String]> = split.train.iter().map(|&i| docs[i].tokens.as_slice()).collect();
    let vocab = build_vocabulary(&train_tokens, cfg.min_df, cfg.max_df_ratio)?;
    let data = Dataset::build(&docs, &fit_idf(&vocab), cfg.exec);
    let mut results = Vec::with_capacity(cfg.kinds.len());
    for &kind in &cfg.kinds {
        let model = train_model(kind, &data, &split.train, &cfg.settings, cfg.exec)?;
        results.push((kind, evaluate_model(&model, &data, &split.test)?));
    }
    let r = cfg.ratios;
    let provenance = Provenance {
        dataset: dataset.to_string(),
        split: format!(
            "held-out test set, {} of {} documents (stratified {}/{}/{} train/val/test)",
            split.test.len(),
            docs.len(),
            r.train,
            r.val,
            r.test
        ),
        seed: cfg.seed,
    };
    Ok(ModelComparison { results, provenance })
}

pub const TABLE3_HEADER: [&str; 5] = ["Model Type", "Accuracy", "Precision", "Recall", "F1 Score"];

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

/// Model comparison table (percentages to one decimal, macro-averaged
/// precision/recall/F1) followed by a provenance footer.
pub fn report_table3(rows: &[(ModelKind, &MetricsReport)], provenance: &Provenance) -> Result<String, PipelineError> {
    if rows.is_empty() {
        return Err(PipelineError::NoResults);
    }
    let width = rows.iter().map(|(k, _)| k.display_name().len()).max().unwrap_or(0).max(TABLE3_HEADER[0].len());
    let mut s = format!(
        "{:<width$}  {:>8}  {:>9}  {:>6}  {:>8}\n",
        TABLE3_HEADER[0], TABLE3_HEADER[1], TABLE3_HEADER[2], TABLE3_HEADER[3], TABLE3_HEADER[4]
    );
    for (kind, m) in rows {
        writeln!(
            s,
            "{:<width$}  {:>8}  {:>9}  {:>6}  {:>8}",
            kind.display_name(),
            pct(m.accuracy),
            pct(m.macro_precision),
            pct(m.macro_recall),
            pct(m.macro_f1)
        )
        .unwrap();
    }
    writeln!(s, "\nPrecision, recall and F1 are macro-averaged over classes.").unwrap();
    writeln!(s, "dataset: {}", provenance.dataset).unwrap();
    writeln!(s, "split: {}", provenance.split).unwrap();
    writeln!(s, "seed: {}", provenance.seed).unwrap();
    Ok(s)
}

/// The same table as CSV with full-precision fractions.
pub fn table3_csv(rows: &[(ModelKind, &MetricsReport)]) -> Result<String, PipelineError> {
    if rows.is_empty() {
        return Err(PipelineError::NoResults);
    }
    let mut s = String::from("model,accuracy,macro_precision,macro_recall,macro_f1\n");
    for (kind, m) in rows {
        writeln!(s, "{},{},{},{},{}", kind.as_str(), m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1).unwrap();
    }
    Ok(s)
}

impl ModelComparison {
    pub fn rows(&self) -> Vec<(ModelKind, &MetricsReport)> {
        self.results.iter().map(|(k, e)| (*k, &e.metrics)).collect()
    }

    pub fn table(&self) -> Result<String, PipelineError> {
        report_table3(&self.rows(), &self.provenance)
    }
}
