//! Multinomial naive Bayes with additive (Laplace) smoothing.

use super::{check_rows, classes_line, parse_classes, parse_vector, prediction, Labels, ModelError, Prediction, MODEL_FORMAT, MODEL_SCHEMA_VERSION};
use crate::features::SparseVector;
use crate::textfmt::{self, Header, Meta};

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub classes: Vec<String>,
    pub log_prior: Vec<f64>,
    /// `log_likelihood[c][t] = ln((count(c, t) + alpha) / (total(c) + alpha * V))`.
    pub log_likelihood: Vec<Vec<f64>>,
    pub alpha: f64,
    pub vocab_size: usize,
}

/// Priors are class frequencies; rows are bag-of-words count vectors.
pub fn train_nb(rows: &[SparseVector], vocab_size: usize, labels: &Labels, alpha: f64) -> Result<NbModel, ModelError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidConfig("smoothing alpha must be > 0".into()));
    }
    check_rows(rows, labels)?;
    labels.require_every_class()?;
    let c = labels.n_classes();
    let mut counts = vec![vec![0.0; vocab_size]; c];
    for (row, &y) in rows.iter().zip(labels.ids()) {
        for &(t, v) in row.entries() {
            if t >= vocab_size {
                return Err(ModelError::DimensionMismatch { expected: vocab_size, got: t + 1 });
            }
            if v < 0.0 {
                return Err(ModelError::NegativeCount);
            }
            counts[y][t] += v;
        }
    }
    let n = rows.len() as f64;
    let log_prior = labels.class_counts().iter().map(|&k| (k as f64 / n).ln()).collect();
    let log_likelihood = counts
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            let denom = total + alpha * vocab_size as f64;
            row.iter().map(|&k| ((k + alpha) / denom).ln()).collect()
        })
        .collect();
    Ok(NbModel { classes: labels.classes().to_vec(), log_prior, log_likelihood, alpha, vocab_size })
}

/// Scores are `ln prior + sum count(t) * ln p(t | class)`, i.e. log-posteriors up to a constant.
/// Out-of-range token indices are ignored.
pub fn predict_nb(model: &NbModel, x: &SparseVector) -> Prediction {
    let scores = model
        .log_prior
        .iter()
        .zip(&model.log_likelihood)
        .map(|(&prior, ll)| {
            prior
                + x.entries()
                    .iter()
                    .filter(|&&(t, _)| t < model.vocab_size)
                    .map(|&(t, v)| v * ll[t])
                    .sum::<f64>()
        })
        .collect();
    prediction(&model.classes, scores)
}

impl NbModel {
    pub fn to_text(&self, meta: &Meta) -> String {
        let mut s = Header::new(MODEL_FORMAT, MODEL_SCHEMA_VERSION)
            .field("kind", "nb")
            .field("classes", self.classes.len())
            .field("vocab", self.vocab_size)
            .field("alpha", self.alpha)
            .with_meta(meta)
            .render();
        s.push_str(&classes_line(&self.classes));
        s.push_str(&format!("log_prior {}\n", textfmt::join_floats(&self.log_prior)));
        for row in &self.log_likelihood {
            s.push_str(&format!("log_likelihood {}\n", textfmt::join_floats(row)));
        }
        s
    }

    pub(super) fn from_doc(mut doc: textfmt::Document<'_>) -> Result<Self, ModelError> {
        let vocab_size: usize = doc.header.require("vocab")?;
        let alpha: f64 = doc.header.require("alpha")?;
        let classes = parse_classes(&mut doc)?;
        let log_prior = parse_vector(&mut doc, "log_prior", classes.len())?;
        let log_likelihood = (0..classes.len())
            .map(|_| parse_vector(&mut doc, "log_likelihood", vocab_size))
            .collect::<Result<_, _>>()?;
        Ok(NbModel { classes, log_prior, log_likelihood, alpha, vocab_size })
    }
}
