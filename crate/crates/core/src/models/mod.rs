//! Classifier families (naive Bayes, linear SVM, random forest, RNN, LSTM)
//! plus activations, losses, optimizers and regularization.
//!
//! Every classifier orders its classes lexicographically, so "lowest class
//! index" and "lexicographically smallest label" are the same tie-break.

mod forest;
mod nb;
pub mod nn;
mod recurrent;
mod svm;

use std::collections::BTreeSet;
use std::str::FromStr;

use thiserror::Error;

use crate::textfmt::{self, FormatError, Meta};

pub use forest::{gini, predict_forest, train_forest, ForestConfig, ForestModel, Tree, TreeNode};
pub use nb::{predict_nb, train_nb, NbModel};
pub use nn::{
    activation, loss, optimizer_step, penalty, Activation, LossKind, LossTarget, OptimizerConfig, OptimizerKind,
    OptimizerState, RegularizationConfig,
};
pub use recurrent::{predict_recurrent, train_recurrent, RecurrentConfig, RecurrentKind, RecurrentModel, RELATIVE_ERROR_FLOOR};
pub use svm::{predict_svm, train_svm, LinearSvmModel, SvmConfig, SvmMode, SvmTrace};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("class {0:?} has no training examples")]
    EmptyClass(String),
    #[error("training data has a single class; at least two are required")]
    SingleClass,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("prediction is not a probability distribution")]
    NotADistribution,
    #[error("sequence {0} is empty")]
    EmptySequence(usize),
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {0:?} is not a known class")]
    UnknownLabel(String),
    #[error("no training data")]
    NoData,
    #[error("counts must be non-negative")]
    NegativeCount,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Class names (sorted, distinct) and the class index of every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    classes: Vec<String>,
    ids: Vec<usize>,
}

impl Labels {
    /// Classes are the sorted distinct labels.
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Self {
        let classes: BTreeSet<&str> = labels.iter().map(AsRef::as_ref).collect();
        let classes: Vec<String> = classes.into_iter().map(str::to_string).collect();
        let ids = labels.iter().map(|l| classes.binary_search_by(|c| c.as_str().cmp(l.as_ref())).unwrap()).collect();
        Labels { classes, ids }
    }

    /// Uses an explicit class list, which may include classes with no samples.
    pub fn with_classes<S: AsRef<str>>(classes: &[S], labels: &[S]) -> Result<Self, ModelError> {
        let classes: BTreeSet<String> = classes.iter().map(|c| c.as_ref().to_string()).collect();
        let classes: Vec<String> = classes.into_iter().collect();
        let ids = labels
            .iter()
            .map(|l| {
                classes
                    .binary_search_by(|c| c.as_str().cmp(l.as_ref()))
                    .map_err(|_| ModelError::UnknownLabel(l.as_ref().to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Labels { classes, ids })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &i in &self.ids {
            counts[i] += 1;
        }
        counts
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(class)).ok()
    }

    /// Restricts to the given samples, keeping the full class list.
    pub fn select(&self, indices: &[usize]) -> Labels {
        Labels { classes: self.classes.clone(), ids: indices.iter().map(|&i| self.ids[i]).collect() }
    }

    fn require_every_class(&self) -> Result<(), ModelError> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(i) => Err(ModelError::EmptyClass(self.classes[i].clone())),
            None => Ok(()),
        }
    }
}

/// A predicted label with the per-class scores it was chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    pub scores: Vec<f64>,
}

/// Index of the maximum; the first (lowest) index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn prediction(classes: &[String], scores: Vec<f64>) -> Prediction {
    let class_index = argmax(&scores);
    Prediction { class_index, label: classes[class_index].clone(), scores }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    NaiveBayes,
    Svm,
    Forest,
    Rnn,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::NaiveBayes, ModelKind::Svm, ModelKind::Forest, ModelKind::Rnn, ModelKind::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "nb",
            ModelKind::Svm => "svm",
            ModelKind::Forest => "forest",
            ModelKind::Rnn => "rnn",
            ModelKind::Lstm => "lstm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "Naive Bayes",
            ModelKind::Svm => "Support Vector Machine (SVM)",
            ModelKind::Forest => "Random Forest",
            ModelKind::Rnn => "Recurrent Neural Network (RNN)",
            ModelKind::Lstm => "Long Short-Term Memory (LSTM)",
        }
    }

    pub fn is_sequence_model(self) -> bool {
        matches!(self, ModelKind::Rnn | ModelKind::Lstm)
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nb" | "naive_bayes" => Ok(ModelKind::NaiveBayes),
            "svm" => Ok(ModelKind::Svm),
            "forest" | "random_forest" => Ok(ModelKind::Forest),
            "rnn" => Ok(ModelKind::Rnn),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

pub const MODEL_FORMAT: &str = "riskminer-model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Any trained classifier, for file handoff between stages.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    NaiveBayes(NbModel),
    Svm(LinearSvmModel),
    Forest(ForestModel),
    Recurrent(RecurrentModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::NaiveBayes(_) => ModelKind::NaiveBayes,
            TrainedModel::Svm(_) => ModelKind::Svm,
            TrainedModel::Forest(_) => ModelKind::Forest,
            TrainedModel::Recurrent(m) => match m.kind {
                RecurrentKind::Rnn => ModelKind::Rnn,
                RecurrentKind::Lstm => ModelKind::Lstm,
            },
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            TrainedModel::NaiveBayes(m) => &m.classes,
            TrainedModel::Svm(m) => &m.classes,
            TrainedModel::Forest(m) => &m.classes,
            TrainedModel::Recurrent(m) => &m.classes,
        }
    }

    pub fn to_text(&self, meta: &Meta) -> String {
        match self {
            TrainedModel::NaiveBayes(m) => m.to_text(meta),
            TrainedModel::Svm(m) => m.to_text(meta),
            TrainedModel::Forest(m) => m.to_text(meta),
            TrainedModel::Recurrent(m) => m.to_text(meta),
        }
    }

    pub fn from_text(text: &str) -> Result<(Self, Meta), ModelError> {
        let doc = textfmt::Document::parse(text, MODEL_FORMAT, MODEL_SCHEMA_VERSION)?;
        let kind: ModelKind = doc
            .header
            .get("kind")
            .ok_or(FormatError::Malformed { line: 1, reason: "missing kind".into() })?
            .parse()
            .map_err(|reason| FormatError::Malformed { line: 1, reason })?;
        let meta = doc.header.meta.clone();
        let model = match kind {
            ModelKind::NaiveBayes => TrainedModel::NaiveBayes(NbModel::from_doc(doc)?),
            ModelKind::Svm => TrainedModel::Svm(LinearSvmModel::from_doc(doc)?),
            ModelKind::Forest => TrainedModel::Forest(ForestModel::from_doc(doc)?),
            ModelKind::Rnn | ModelKind::Lstm => TrainedModel::Recurrent(RecurrentModel::from_doc(doc)?),
        };
        Ok((model, meta))
    }
}

fn check_rows<T>(rows: &[T], labels: &Labels) -> Result<(), ModelError> {
    if rows.len() != labels.len() {
        return Err(ModelError::LengthMismatch { rows: rows.len(), labels: labels.len() });
    }
    if rows.is_empty() {
        return Err(ModelError::NoData);
    }
    Ok(())
}

// Class names may contain spaces, so they are stored as a JSON array.
fn classes_line(classes: &[String]) -> String {
    format!("classes {}\n", serde_json::to_string(classes).expect("string list serializes"))
}

fn parse_classes(doc: &mut textfmt::Document<'_>) -> Result<Vec<String>, ModelError> {
    let (line, text) = doc.next_line()?;
    let classes: Vec<String> = text
        .strip_prefix("classes ")
        .and_then(|json| serde_json::from_str(json).ok())
        .ok_or(FormatError::Malformed { line, reason: "expected classes line".into() })?;
    if classes.is_empty() || classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FormatError::Malformed { line, reason: "classes must be sorted and distinct".into() }.into());
    }
    Ok(classes)
}

fn parse_vector(doc: &mut textfmt::Document<'_>, keyword: &str, len: usize) -> Result<Vec<f64>, ModelError> {
    let (line, parts) = doc.expect(keyword)?;
    let v = textfmt::parse_floats(&parts, line)?;
    if v.len() != len {
        return Err(FormatError::Malformed { line, reason: format!("{keyword}: expected {len} values, got {}", v.len()) }.into());
    }
    Ok(v)
}
