//! One-vs-rest linear SVM trained on the primal hinge objective
//! `lambda |w|^2 + mean(max(0, 1 - y (w.x + b)))`.
//!
//! The bias is an extra constant feature and is regularized with the rest.

use std::str::FromStr;

use rand::seq::SliceRandom;

use super::{check_rows, classes_line, parse_classes, parse_vector, prediction, Labels, ModelError, Prediction, MODEL_FORMAT, MODEL_SCHEMA_VERSION};
use crate::exec::Execution;
use crate::features::SparseVector;
use crate::rng::{self, stream};
use crate::textfmt::{self, Header, Meta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SvmMode {
    /// Stochastic subgradient steps with `eta_t = 1 / (2 lambda t)` and
    /// projection onto the ball of radius `1 / sqrt(2 lambda)`.
    #[default]
    Pegasos,
    /// One full subgradient step per epoch with halving backtracking,
    /// so the objective never increases.
    FullBatch,
}

impl FromStr for SvmMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pegasos" | "sgd" => Ok(SvmMode::Pegasos),
            "full_batch" | "batch" => Ok(SvmMode::FullBatch),
            other => Err(format!("unknown svm mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub mode: SvmMode,
    /// Initial step for full-batch mode.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { lambda: 1e-4, epochs: 50, mode: SvmMode::Pegasos, learning_rate: 1.0, seed: 0 }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidConfig("lambda must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(ModelError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig("learning rate must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub classes: Vec<String>,
    pub n_features: usize,
    pub lambda: f64,
    /// One weight row per class, bias excluded.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Objective value after every epoch, one series per class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SvmTrace {
    pub objective: Vec<Vec<f64>>,
}

pub fn train_svm(
    rows: &[SparseVector],
    n_features: usize,
    labels: &Labels,
    cfg: &SvmConfig,
    exec: Execution,
) -> Result<(LinearSvmModel, SvmTrace), ModelError> {
    cfg.validate()?;
    check_rows(rows, labels)?;
    labels.require_every_class()?;
    if labels.n_classes() < 2 {
        return Err(ModelError::SingleClass);
    }
    if let Some(bad) = rows.iter().filter_map(SparseVector::max_index).find(|&m| m >= n_features) {
        return Err(ModelError::DimensionMismatch { expected: n_features, got: bad + 1 });
    }
    let fitted = exec.map(labels.n_classes(), |c| {
        let y: Vec<f64> = labels.ids().iter().map(|&k| if k == c { 1.0 } else { -1.0 }).collect();
        match cfg.mode {
            SvmMode::Pegasos => pegasos(rows, &y, n_features, cfg),
            SvmMode::FullBatch => full_batch(rows, &y, n_features, cfg),
        }
    });
    let mut model = LinearSvmModel {
        classes: labels.classes().to_vec(),
        n_features,
        lambda: cfg.lambda,
        weights: Vec::new(),
        bias: Vec::new(),
    };
    let mut trace = SvmTrace::default();
    for (mut w, objective) in fitted {
        model.bias.push(w.pop().expect("bias slot"));
        model.weights.push(w);
        trace.objective.push(objective);
    }
    Ok((model, trace))
}

/// Scores are the per-class margins `w.x + b`.
pub fn predict_svm(model: &LinearSvmModel, x: &SparseVector) -> Result<Prediction, ModelError> {
    if let Some(m) = x.max_index().filter(|&m| m >= model.n_features) {
        return Err(ModelError::DimensionMismatch { expected: model.n_features, got: m + 1 });
    }
    let scores = model.weights.iter().zip(&model.bias).map(|(w, &b)| sparse_dot(w, x) + b).collect();
    Ok(prediction(&model.classes, scores))
}

fn sparse_dot(w: &[f64], x: &SparseVector) -> f64 {
    x.entries().iter().filter(|&&(j, _)| j < w.len()).map(|&(j, v)| w[j] * v).sum()
}

/// `w` carries the bias in its last slot.
fn margin(w: &[f64], x: &SparseVector) -> f64 {
    sparse_dot(w, x) + w[w.len() - 1]
}

fn objective(w: &[f64], rows: &[SparseVector], y: &[f64], lambda: f64) -> f64 {
    let hinge: f64 = rows.iter().zip(y).map(|(x, &yi)| (1.0 - yi * margin(w, x)).max(0.0)).sum();
    lambda * w.iter().map(|v| v * v).sum::<f64>() + hinge / rows.len() as f64
}

fn pegasos(rows: &[SparseVector], y: &[f64], n_features: usize, cfg: &SvmConfig) -> (Vec<f64>, Vec<f64>) {
    let dim = n_features + 1;
    // lambda |w|^2 is the usual Pegasos objective with lambda' = 2 lambda
    let lam = 2.0 * cfg.lambda;
    let radius = 1.0 / lam.sqrt();
    // w = scale * v, with |v|^2 tracked incrementally
    let mut v = vec![0.0; dim];
    let mut scale = 1.0;
    let mut v_norm2 = 0.0;
    let mut rng = rng::seeded(cfg.seed, stream::SVM);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut t = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lam * t as f64);
            let violated = y[i] * scale * margin(&v, &rows[i]) < 1.0;
            let shrink = 1.0 - eta * lam;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                scale = 1.0;
                v_norm2 = 0.0;
            } else {
                scale *= shrink;
            }
            if violated {
                let step = eta * y[i] / scale;
                for &(j, xj) in rows[i].entries().iter().chain(std::iter::once(&(n_features, 1.0))) {
                    let old = v[j];
                    v[j] += step * xj;
                    v_norm2 += v[j] * v[j] - old * old;
                }
            }
            let norm = scale * v_norm2.max(0.0).sqrt();
            if norm > radius {
                scale *= radius / norm;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|x| *x *= scale);
                scale = 1.0;
                v_norm2 = v.iter().map(|x| x * x).sum();
            }
        }
        let w: Vec<f64> = v.iter().map(|x| x * scale).collect();
        history.push(objective(&w, rows, y, cfg.lambda));
    }
    (v.into_iter().map(|x| x * scale).collect(), history)
}

fn full_batch(rows: &[SparseVector], y: &[f64], n_features: usize, cfg: &SvmConfig) -> (Vec<f64>, Vec<f64>) {
    let dim = n_features + 1;
    let n = rows.len() as f64;
    let mut w = vec![0.0; dim];
    let mut current = objective(&w, rows, y, cfg.lambda);
    let mut step = cfg.learning_rate;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        for (g, wj) in grad.iter_mut().zip(&w) {
            *g = 2.0 * cfg.lambda * wj;
        }
        for (x, &yi) in rows.iter().zip(y) {
            if yi * margin(&w, x) < 1.0 {
                for &(j, xj) in x.entries() {
                    grad[j] -= yi * xj / n;
                }
                grad[n_features] -= yi / n;
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let candidate: Vec<f64> = w.iter().zip(&grad).map(|(wj, g)| wj - step * g).collect();
            let value = objective(&candidate, rows, y, cfg.lambda);
            if value <= current {
                w = candidate;
                current = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if accepted {
            step = (step * 2.0).min(cfg.learning_rate);
        }
        history.push(current);
    }
    (w, history)
}

impl LinearSvmModel {
    pub fn to_text(&self, meta: &Meta) -> String {
        let mut s = Header::new(MODEL_FORMAT, MODEL_SCHEMA_VERSION)
            .field("kind", "svm")
            .field("classes", self.classes.len())
            .field("features", self.n_features)
            .field("lambda", self.lambda)
            .with_meta(meta)
            .render();
        s.push_str(&classes_line(&self.classes));
        s.push_str(&format!("bias {}\n", textfmt::join_floats(&self.bias)));
        for w in &self.weights {
            s.push_str(&format!("weights {}\n", textfmt::join_floats(w)));
        }
        s
    }

    pub(super) fn from_doc(mut doc: textfmt::Document<'_>) -> Result<Self, ModelError> {
        let n_features: usize = doc.header.require("features")?;
        let lambda: f64 = doc.header.require("lambda")?;
        let classes = parse_classes(&mut doc)?;
        let bias = parse_vector(&mut doc, "bias", classes.len())?;
        let weights = (0..classes.len()).map(|_| parse_vector(&mut doc, "weights", n_features)).collect::<Result<_, _>>()?;
        Ok(LinearSvmModel { classes, n_features, lambda, weights, bias })
    }
}
