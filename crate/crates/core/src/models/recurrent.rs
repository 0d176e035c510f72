//! Single-layer RNN and LSTM sequence classifiers trained with truncated
//! backpropagation through time.
//!
//! A sequence of token ids is embedded, run through the recurrent cell, and
//! the last hidden state feeds a softmax layer. Training minimizes mean
//! cross-entropy plus `l2 * sum(w^2)` over all weight matrices (biases are not
//! penalized), with optional global-norm gradient clipping.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::nn::{optimizer_step, sigmoid, softmax, OptimizerConfig, OptimizerState};
use super::{check_rows, classes_line, parse_classes, parse_vector, prediction, Labels, ModelError, Prediction, MODEL_FORMAT, MODEL_SCHEMA_VERSION};
use crate::exec::Execution;
use crate::rng::{self, stream};
use crate::textfmt::{self, FormatError, Header, Meta};

/// Denominator floor for [`RecurrentModel::gradient_check`] relative errors.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrentKind {
    /// `h_t = tanh(Wx x_t + Wh h_{t-1} + b)`.
    Rnn,
    /// Input, forget, output and candidate gates, in that order.
    Lstm,
}

impl RecurrentKind {
    fn gates(self) -> usize {
        match self {
            RecurrentKind::Rnn => 1,
            RecurrentKind::Lstm => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecurrentKind::Rnn => "rnn",
            RecurrentKind::Lstm => "lstm",
        }
    }
}

impl FromStr for RecurrentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rnn" => Ok(RecurrentKind::Rnn),
            "lstm" => Ok(RecurrentKind::Lstm),
            other => Err(format!("unknown recurrent kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentConfig {
    pub kind: RecurrentKind,
    pub embed_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub l2: f64,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Sequences are truncated to their first `max_len` tokens.
    pub max_len: usize,
    pub seed: u64,
}

impl RecurrentConfig {
    pub fn new(kind: RecurrentKind) -> Self {
        RecurrentConfig {
            kind,
            embed_dim: 32,
            hidden: 32,
            epochs: 20,
            batch_size: 16,
            optimizer: OptimizerConfig::adam(0.003),
            l2: 1e-5,
            clip_norm: Some(5.0),
            max_len: 200,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embed_dim == 0 || self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 || self.max_len == 0 {
            return Err(ModelError::InvalidConfig("embed_dim, hidden, epochs, batch_size and max_len must be >= 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(ModelError::InvalidConfig("l2 must be finite and >= 0".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(ModelError::InvalidConfig("clip norm must be > 0".into()));
            }
        }
        self.optimizer.validate()
    }
}

/// Offsets of each parameter block in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    v: usize,
    e: usize,
    h: usize,
    c: usize,
    g: usize,
    wx: usize,
    wh: usize,
    b: usize,
    wo: usize,
    bo: usize,
    total: usize,
}

impl Layout {
    fn new(kind: RecurrentKind, v: usize, e: usize, h: usize, c: usize) -> Self {
        let g = kind.gates();
        let wx = v * e;
        let wh = wx + g * h * e;
        let b = wh + g * h * h;
        let wo = b + g * h;
        let bo = wo + c * h;
        Layout { v, e, h, c, g, wx, wh, b, wo, bo, total: bo + c }
    }

    fn is_weight(&self, i: usize) -> bool {
        i < self.b || (self.wo..self.bo).contains(&i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentModel {
    pub kind: RecurrentKind,
    pub classes: Vec<String>,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub max_len: usize,
    /// Token strings for ids `0..vocab_size`, when known.
    pub tokens: Option<Vec<String>>,
    /// Mean training cross-entropy per epoch.
    pub loss_history: Vec<f64>,
    params: Vec<f64>,
}

struct Cache {
    hs: Vec<Vec<f64>>,
    cs: Vec<Vec<f64>>,
    /// LSTM gate activations per step.
    acts: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

/// Gradient of one sequence: dense for everything past the embedding table,
/// sparse rows for the embedding table.
struct SeqGrad {
    loss: f64,
    dense: Vec<f64>,
    emb: Vec<(usize, Vec<f64>)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl RecurrentModel {
    fn layout(&self) -> Layout {
        Layout::new(self.kind, self.vocab_size, self.embed_dim, self.hidden, self.classes.len())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Randomly initialized, untrained model.
    pub fn init(cfg: &RecurrentConfig, vocab_size: usize, classes: Vec<String>) -> Result<Self, ModelError> {
        cfg.validate()?;
        if vocab_size == 0 {
            return Err(ModelError::InvalidConfig("vocabulary is empty".into()));
        }
        let l = Layout::new(cfg.kind, vocab_size, cfg.embed_dim, cfg.hidden, classes.len());
        let mut rng = rng::seeded(cfg.seed, stream::RECURRENT);
        let mut params = vec![0.0; l.total];
        let mut fill = |range: std::ops::Range<usize>, scale: f64| {
            for p in &mut params[range] {
                *p = rng.gen_range(-scale..scale);
            }
        };
        fill(0..l.wx, 0.1);
        fill(l.wx..l.wh, 1.0 / (l.e as f64).sqrt());
        fill(l.wh..l.b, 1.0 / (l.h as f64).sqrt());
        fill(l.wo..l.bo, 1.0 / (l.h as f64).sqrt());
        if cfg.kind == RecurrentKind::Rnn {
            let q = orthogonal(l.h, &mut rng);
            params[l.wh..l.b].copy_from_slice(&q);
        }
        if cfg.kind == RecurrentKind::Lstm {
            params[l.b + l.h..l.b + 2 * l.h].iter_mut().for_each(|p| *p = 1.0);
        }
        Ok(RecurrentModel {
            kind: cfg.kind,
            classes,
            vocab_size,
            embed_dim: cfg.embed_dim,
            hidden: cfg.hidden,
            max_len: cfg.max_len,
            tokens: None,
            loss_history: Vec::new(),
            params,
        })
    }

    /// Replaces the embedding table (`vocab_size * embed_dim`, row-major).
    pub fn set_embedding(&mut self, table: &[f64]) -> Result<(), ModelError> {
        let n = self.vocab_size * self.embed_dim;
        if table.len() != n {
            return Err(ModelError::ShapeMismatch { expected: n, got: table.len() });
        }
        self.params[..n].copy_from_slice(table);
        Ok(())
    }

    fn truncate<'s>(&self, seq: &'s [usize]) -> &'s [usize] {
        &seq[..seq.len().min(self.max_len)]
    }

    fn forward(&self, seq: &[usize]) -> Cache {
        let l = self.layout();
        let p = &self.params;
        let (h, gh) = (l.h, l.g * l.h);
        let mut hs = vec![vec![0.0; h]];
        let mut cs = vec![vec![0.0; h]];
        let mut acts = Vec::new();
        for &tok in seq {
            let x = &p[tok * l.e..(tok + 1) * l.e];
            let hp = &hs[hs.len() - 1];
            let z: Vec<f64> = (0..gh)
                .map(|r| p[l.b + r] + dot(&p[l.wx + r * l.e..][..l.e], x) + dot(&p[l.wh + r * h..][..h], hp))
                .collect();
            match self.kind {
                RecurrentKind::Rnn => hs.push(z.iter().map(|v| v.tanh()).collect()),
                RecurrentKind::Lstm => {
                    let mut a = z;
                    a[..3 * h].iter_mut().for_each(|v| *v = sigmoid(*v));
                    a[3 * h..].iter_mut().for_each(|v| *v = v.tanh());
                    let cp = &cs[cs.len() - 1];
                    let c: Vec<f64> = (0..h).map(|j| a[h + j] * cp[j] + a[j] * a[3 * h + j]).collect();
                    let hn: Vec<f64> = (0..h).map(|j| a[2 * h + j] * c[j].tanh()).collect();
                    cs.push(c);
                    hs.push(hn);
                    acts.push(a);
                }
            }
        }
        let last = &hs[hs.len() - 1];
        let logits: Vec<f64> = (0..l.c).map(|k| p[l.bo + k] + dot(&p[l.wo + k * h..][..h], last)).collect();
        Cache { hs, cs, acts, probs: softmax(&logits) }
    }

    fn sequence_grad(&self, seq: &[usize], target: usize) -> SeqGrad {
        let seq = self.truncate(seq);
        let l = self.layout();
        let p = &self.params;
        let (h, gh, e) = (l.h, l.g * l.h, l.e);
        let cache = self.forward(seq);
        let loss = -cache.probs[target].max(1e-300).ln();
        let off = l.wx;
        let mut dense = vec![0.0; l.total - off];
        let mut emb = Vec::with_capacity(seq.len());

        let last = &cache.hs[seq.len()];
        let mut dh = vec![0.0; h];
        for k in 0..l.c {
            let d = cache.probs[k] - if k == target { 1.0 } else { 0.0 };
            dense[l.bo + k - off] += d;
            for j in 0..h {
                dense[l.wo + k * h + j - off] += d * last[j];
                dh[j] += d * p[l.wo + k * h + j];
            }
        }
        let mut dc = vec![0.0; h];
        for t in (1..=seq.len()).rev() {
            let hp = &cache.hs[t - 1];
            let dz: Vec<f64> = match self.kind {
                RecurrentKind::Rnn => (0..h).map(|j| dh[j] * (1.0 - cache.hs[t][j].powi(2))).collect(),
                RecurrentKind::Lstm => {
                    let a = &cache.acts[t - 1];
                    let (c, cp) = (&cache.cs[t], &cache.cs[t - 1]);
                    let mut dz = vec![0.0; gh];
                    for j in 0..h {
                        let (i, f, o, g) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
                        let tc = c[j].tanh();
                        let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                        dz[j] = dcj * g * i * (1.0 - i);
                        dz[h + j] = dcj * cp[j] * f * (1.0 - f);
                        dz[2 * h + j] = dh[j] * tc * o * (1.0 - o);
                        dz[3 * h + j] = dcj * i * (1.0 - g * g);
                        dc[j] = dcj * f;
                    }
                    dz
                }
            };
            let tok = seq[t - 1];
            let x = &p[tok * e..(tok + 1) * e];
            let mut dx = vec![0.0; e];
            let mut dh_prev = vec![0.0; h];
            for r in 0..gh {
                let d = dz[r];
                if d == 0.0 {
                    continue;
                }
                dense[l.b + r - off] += d;
                for j in 0..e {
                    dense[l.wx + r * e + j - off] += d * x[j];
                    dx[j] += d * p[l.wx + r * e + j];
                }
                for j in 0..h {
                    dense[l.wh + r * h + j - off] += d * hp[j];
                    dh_prev[j] += d * p[l.wh + r * h + j];
                }
            }
            emb.push((tok, dx));
            dh = dh_prev;
        }
        SeqGrad { loss, dense, emb }
    }

    fn batch_grad(&self, seqs: &[&[usize]], targets: &[usize], l2: f64, exec: Execution) -> (f64, f64, Vec<f64>) {
        let l = self.layout();
        let parts = exec.map(seqs.len(), |i| self.sequence_grad(seqs[i], targets[i]));
        let n = seqs.len() as f64;
        let mut grad = vec![0.0; l.total];
        let mut data_loss = 0.0;
        for part in parts {
            data_loss += part.loss;
            for (g, d) in grad[l.wx..].iter_mut().zip(&part.dense) {
                *g += d;
            }
            for (tok, dx) in part.emb {
                for (g, d) in grad[tok * l.e..(tok + 1) * l.e].iter_mut().zip(&dx) {
                    *g += d;
                }
            }
        }
        data_loss /= n;
        grad.iter_mut().for_each(|g| *g /= n);
        let mut penalty = 0.0;
        if l2 > 0.0 {
            for (i, (g, w)) in grad.iter_mut().zip(&self.params).enumerate() {
                if l.is_weight(i) {
                    penalty += w * w;
                    *g += 2.0 * l2 * w;
                }
            }
        }
        (data_loss, data_loss + l2 * penalty, grad)
    }

    /// Mean cross-entropy plus the L2 penalty, and its exact gradient.
    /// No clipping is applied.
    pub fn loss_and_gradient(&self, seqs: &[Vec<usize>], targets: &[usize], l2: f64) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_inputs(seqs, targets)?;
        let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
        let (_, total, grad) = self.batch_grad(&refs, targets, l2, Execution::Sequential);
        Ok((total, grad))
    }

    /// Largest relative error between the analytic gradient and central
    /// differences with step `step`, over every parameter.
    /// Relative error is `|a - n| / max(|a| + |n|, RELATIVE_ERROR_FLOOR)`.
    pub fn gradient_check(&self, seqs: &[Vec<usize>], targets: &[usize], l2: f64, step: f64) -> Result<f64, ModelError> {
        let (_, analytic) = self.loss_and_gradient(seqs, targets, l2)?;
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        for i in 0..self.params.len() {
            let orig = self.params[i];
            probe.params[i] = orig + step;
            let (plus, _) = probe.loss_and_gradient(seqs, targets, l2)?;
            probe.params[i] = orig - step;
            let (minus, _) = probe.loss_and_gradient(seqs, targets, l2)?;
            probe.params[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(RELATIVE_ERROR_FLOOR);
            worst = worst.max(rel);
        }
        Ok(worst)
    }

    fn check_inputs(&self, seqs: &[Vec<usize>], targets: &[usize]) -> Result<(), ModelError> {
        if seqs.len() != targets.len() {
            return Err(ModelError::LengthMismatch { rows: seqs.len(), labels: targets.len() });
        }
        if seqs.is_empty() {
            return Err(ModelError::NoData);
        }
        if let Some(i) = seqs.iter().position(Vec::is_empty) {
            return Err(ModelError::EmptySequence(i));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= self.classes.len()) {
            return Err(ModelError::DimensionMismatch { expected: self.classes.len(), got: t + 1 });
        }
        if let Some(&tok) = seqs.iter().flatten().find(|&&t| t >= self.vocab_size) {
            return Err(ModelError::DimensionMismatch { expected: self.vocab_size, got: tok + 1 });
        }
        Ok(())
    }

    /// Class probabilities. Out-of-vocabulary ids are skipped; a sequence with
    /// no known tokens gets the uniform distribution.
    pub fn probabilities(&self, seq: &[usize]) -> Vec<f64> {
        let known: Vec<usize> = seq.iter().copied().filter(|&t| t < self.vocab_size).collect();
        if known.is_empty() {
            return vec![1.0 / self.classes.len() as f64; self.classes.len()];
        }
        self.forward(self.truncate(&known)).probs
    }

    /// Maps tokens to ids through the stored token list, dropping unknowns.
    pub fn encode(&self, tokens: &[String]) -> Option<Vec<usize>> {
        let vocab = self.tokens.as_ref()?;
        Some(tokens.iter().filter_map(|t| vocab.binary_search(t).ok()).collect())
    }
}

/// Trains on token-id sequences. `embedding`, if given, initializes the
/// embedding table (`vocab_size * embed_dim`, row-major).
/// Random `n x n` orthogonal matrix (row-major): Gram-Schmidt on uniform draws.
fn orthogonal(n: usize, rng: &mut rng::Rng) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
        }
    }
    q.concat()
}

pub fn train_recurrent(
    seqs: &[Vec<usize>],
    vocab_size: usize,
    labels: &Labels,
    cfg: &RecurrentConfig,
    embedding: Option<&[f64]>,
    exec: Execution,
) -> Result<RecurrentModel, ModelError> {
    check_rows(seqs, labels)?;
    labels.require_every_class()?;
    if labels.n_classes() < 2 {
        return Err(ModelError::SingleClass);
    }
    let mut model = RecurrentModel::init(cfg, vocab_size, labels.classes().to_vec())?;
    if let Some(table) = embedding {
        model.set_embedding(table)?;
    }
    model.check_inputs(seqs, labels.ids())?;
    let mut state = OptimizerState::new(model.params.len());
    let mut rng = rng::seeded(cfg.seed, stream::RECURRENT + (1 << 16));
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bs: Vec<&[usize]> = batch.iter().map(|&i| seqs[i].as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| labels.ids()[i]).collect();
            let (data_loss, _, mut grad) = model.batch_grad(&bs, &ys, cfg.l2, exec);
            epoch_loss += data_loss * batch.len() as f64;
            if let Some(cap) = cfg.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cap {
                    grad.iter_mut().for_each(|g| *g *= cap / norm);
                }
            }
            optimizer_step(&cfg.optimizer, &mut model.params, &grad, &mut state)?;
        }
        model.loss_history.push(epoch_loss / seqs.len() as f64);
    }
    Ok(model)
}

pub fn predict_recurrent(model: &RecurrentModel, seq: &[usize]) -> Prediction {
    prediction(&model.classes, model.probabilities(seq))
}

impl RecurrentModel {
    pub fn to_text(&self, meta: &Meta) -> String {
        let mut s = Header::new(MODEL_FORMAT, MODEL_SCHEMA_VERSION)
            .field("kind", self.kind.as_str())
            .field("classes", self.classes.len())
            .field("vocab", self.vocab_size)
            .field("embed", self.embed_dim)
            .field("hidden", self.hidden)
            .field("max_len", self.max_len)
            .field("epochs", self.loss_history.len())
            .with_meta(meta)
            .render();
        s.push_str(&classes_line(&self.classes));
        if let Some(tokens) = &self.tokens {
            s.push_str(&format!("tokens {}\n", serde_json::to_string(tokens).expect("string list serializes")));
        }
        s.push_str(&format!("loss_history {}\n", textfmt::join_floats(&self.loss_history)));
        s.push_str(&format!("params {}\n", textfmt::join_floats(&self.params)));
        s
    }

    pub(super) fn from_doc(mut doc: textfmt::Document<'_>) -> Result<Self, ModelError> {
        let kind: RecurrentKind = doc
            .header
            .get("kind")
            .unwrap_or("")
            .parse()
            .map_err(|reason| FormatError::Malformed { line: 1, reason })?;
        let vocab_size: usize = doc.header.require("vocab")?;
        let embed_dim: usize = doc.header.require("embed")?;
        let hidden: usize = doc.header.require("hidden")?;
        let max_len: usize = doc.header.require("max_len")?;
        let epochs: usize = doc.header.require("epochs")?;
        let classes = parse_classes(&mut doc)?;
        let l = Layout::new(kind, vocab_size, embed_dim, hidden, classes.len());
        let tokens = if doc.remaining() == 3 {
            let (line, text) = doc.next_line()?;
            let tokens: Vec<String> = text
                .strip_prefix("tokens ")
                .and_then(|json| serde_json::from_str(json).ok())
                .ok_or(FormatError::Malformed { line, reason: "expected tokens line".into() })?;
            if tokens.len() != vocab_size {
                return Err(FormatError::Malformed { line, reason: "token count differs from vocab".into() }.into());
            }
            Some(tokens)
        } else {
            None
        };
        let loss_history = parse_vector(&mut doc, "loss_history", epochs)?;
        let params = parse_vector(&mut doc, "params", l.total)?;
        Ok(RecurrentModel { kind, classes, vocab_size, embed_dim, hidden, max_len, tokens, loss_history, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TrainedModel;

    fn small(kind: RecurrentKind, seed: u64) -> RecurrentModel {
        let cfg = RecurrentConfig { embed_dim: 3, hidden: 4, seed, ..RecurrentConfig::new(kind) };
        RecurrentModel::init(&cfg, 5, vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let seqs = vec![vec![0, 3, 1, 4], vec![2], vec![1, 1, 0, 2, 3, 4], vec![4, 4]];
        let targets = [0, 2, 1, 1];
        for kind in [RecurrentKind::Rnn, RecurrentKind::Lstm] {
            for seed in 0..3 {
                let m = small(kind, seed);
                let err = m.gradient_check(&seqs, &targets, 0.01, 1e-5).unwrap();
                assert!(err < 1e-4, "{kind:?} seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn layout_sizes() {
        let l = Layout::new(RecurrentKind::Lstm, 5, 3, 4, 2);
        assert_eq!(l.total, 15 + 16 * 3 + 16 * 4 + 16 + 2 * 4 + 2);
        assert_eq!(small(RecurrentKind::Rnn, 0).params().len(), 15 + 12 + 16 + 4 + 12 + 3);
        let m = small(RecurrentKind::Lstm, 0);
        assert!(m.params()[m.layout().b + 4..m.layout().b + 8].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn empty_sequence_is_uniform() {
        let m = small(RecurrentKind::Rnn, 1);
        let p = m.probabilities(&[]);
        assert!(p.iter().all(|&x| x == 1.0 / 3.0));
        assert_eq!(predict_recurrent(&m, &[]).label, "a");
        assert_eq!(m.probabilities(&[99]), p);
    }

    #[test]
    fn truncation_matches_prefix() {
        let cfg = RecurrentConfig { embed_dim: 3, hidden: 4, max_len: 3, ..RecurrentConfig::new(RecurrentKind::Lstm) };
        let m = RecurrentModel::init(&cfg, 5, vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(m.probabilities(&[1, 2, 3, 4, 0]), m.probabilities(&[1, 2, 3]));
        let p = m.probabilities(&[4, 1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    fn first_token_task() -> (Vec<Vec<usize>>, Labels) {
        let mut seqs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..60usize {
            let cls = i % 3;
            seqs.push(vec![cls, 3 + i % 2, 4, 3, 5 - i % 2]);
            ys.push(["x", "y", "z"][cls]);
        }
        (seqs, Labels::new(&ys))
    }

    #[test]
    fn learns_long_range_signal() {
        let (seqs, labels) = first_token_task();
        for kind in [RecurrentKind::Rnn, RecurrentKind::Lstm] {
            let cfg = RecurrentConfig { embed_dim: 8, hidden: 8, epochs: 30, ..RecurrentConfig::new(kind) };
            let m = train_recurrent(&seqs, 6, &labels, &cfg, None, Execution::Sequential).unwrap();
            let correct = seqs.iter().zip(labels.ids()).filter(|(s, &y)| predict_recurrent(&m, s).class_index == y).count();
            assert_eq!(correct, seqs.len(), "{kind:?}");
            assert!(m.loss_history.last() < m.loss_history.first());
        }
    }

    #[test]
    fn lstm_learns_first_token_parity() {
        let (seqs, names) = crate::synth::first_token_parity(400, 8, 16, 4);
        let labels = Labels::new(&names);
        let cfg = RecurrentConfig { embed_dim: 16, hidden: 16, epochs: 30, seed: 1, ..RecurrentConfig::new(RecurrentKind::Lstm) };
        let m = train_recurrent(&seqs, 16, &labels, &cfg, None, Execution::Parallel).unwrap();
        let correct = seqs.iter().zip(labels.ids()).filter(|(s, &y)| predict_recurrent(&m, s).class_index == y).count();
        assert!(correct as f64 / seqs.len() as f64 >= 0.95, "{correct}/{}", seqs.len());
    }

    #[test]
    fn training_is_execution_independent() {
        let (seqs, labels) = first_token_task();
        let cfg = RecurrentConfig { embed_dim: 4, hidden: 4, epochs: 2, ..RecurrentConfig::new(RecurrentKind::Lstm) };
        let a = train_recurrent(&seqs, 6, &labels, &cfg, None, Execution::Sequential).unwrap();
        let b = train_recurrent(&seqs, 6, &labels, &cfg, None, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (seqs, labels) = first_token_task();
        let cfg = RecurrentConfig::new(RecurrentKind::Rnn);
        assert!(matches!(
            train_recurrent(&seqs, 3, &labels, &cfg, None, Execution::Sequential),
            Err(ModelError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            train_recurrent(&seqs, 6, &labels, &cfg, Some(&[0.0; 3]), Execution::Sequential),
            Err(ModelError::ShapeMismatch { .. })
        ));
        let mut with_empty = seqs.clone();
        with_empty[7].clear();
        assert_eq!(
            train_recurrent(&with_empty, 6, &labels, &cfg, None, Execution::Sequential),
            Err(ModelError::EmptySequence(7))
        );
        let bad = RecurrentConfig { hidden: 0, ..cfg };
        assert!(matches!(train_recurrent(&seqs, 6, &labels, &bad, None, Execution::Sequential), Err(ModelError::InvalidConfig(_))));
    }

    #[test]
    fn text_round_trip() {
        let mut m = small(RecurrentKind::Lstm, 4);
        let (back, _) = TrainedModel::from_text(&m.to_text(&Vec::new())).unwrap();
        assert_eq!(back, TrainedModel::Recurrent(m.clone()));
        m.tokens = Some(["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect());
        m.loss_history = vec![1.5, 0.25];
        let (back, _) = TrainedModel::from_text(&m.to_text(&Vec::new())).unwrap();
        assert_eq!(back, TrainedModel::Recurrent(m.clone()));
        assert_eq!(m.encode(&["c".to_string(), "zz".to_string(), "a".to_string()]), Some(vec![2, 0]));
    }
}
