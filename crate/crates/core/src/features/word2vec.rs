//! Skip-gram and CBOW embeddings trained with negative sampling.
//!
//! Training is single-threaded so that a given (corpus, config, seed) always
//! produces bit-identical vectors.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::Rng;

use super::{FeatureError, Vocabulary};
use crate::rng;
use crate::textfmt::{self, FormatError, Header, Meta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Word2VecMode {
    SkipGram,
    Cbow,
}

impl FromStr for Word2VecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skipgram" | "skip-gram" => Ok(Word2VecMode::SkipGram),
            "cbow" => Ok(Word2VecMode::Cbow),
            other => Err(format!("unknown word2vec mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Word2VecConfig {
    pub mode: Word2VecMode,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            mode: Word2VecMode::SkipGram,
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl Word2VecConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    epoch_losses: Vec<f64>,
}

pub const EMBEDDING_FORMAT: &str = "riskminer-embedding";
pub const EMBEDDING_SCHEMA_VERSION: u32 = 1;

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Input vector of a token, if in vocabulary.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.index_of(token).map(|i| self.row(i))
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.input[index * self.dim..(index + 1) * self.dim]
    }

    pub fn input_vectors(&self) -> &[f64] {
        &self.input
    }

    pub fn output_vectors(&self) -> &[f64] {
        &self.output
    }

    /// Mean negative-sampling loss per training pair, one entry per epoch.
    /// Not persisted by the text format.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn to_text(&self, meta: &Meta) -> String {
        let mut s = Header::new(EMBEDDING_FORMAT, EMBEDDING_SCHEMA_VERSION)
            .field("V", self.vocab.len())
            .field("dim", self.dim)
            .field("N", self.vocab.n_docs())
            .with_meta(meta)
            .render();
        for (i, tok) in self.vocab.tokens().iter().enumerate() {
            let out = &self.output[i * self.dim..(i + 1) * self.dim];
            s.push_str(&format!(
                "{tok}\t{i}\t{}\t{}\t{}\n",
                self.vocab.df(i),
                textfmt::join_floats(self.row(i)),
                textfmt::join_floats(out)
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<(Self, Meta), FeatureError> {
        let mut doc = textfmt::Document::parse(text, EMBEDDING_FORMAT, EMBEDDING_SCHEMA_VERSION)?;
        let v: usize = doc.header.require("V")?;
        let dim: usize = doc.header.require("dim")?;
        let n: usize = doc.header.require("N")?;
        let mut entries = Vec::with_capacity(v);
        let mut input = Vec::with_capacity(v * dim);
        let mut output = Vec::with_capacity(v * dim);
        for i in 0..v {
            let (line, l) = doc.next_line()?;
            let parts: Vec<&str> = l.split('\t').collect();
            if parts.len() != 5 {
                return Err(FormatError::Malformed { line, reason: "expected 5 tab-separated fields".into() }.into());
            }
            if textfmt::parse_num::<usize>(parts[1], line)? != i {
                return Err(FormatError::Malformed { line, reason: "index out of order".into() }.into());
            }
            entries.push((parts[0].to_string(), textfmt::parse_num(parts[2], line)?));
            for (block, dst) in [(parts[3], &mut input), (parts[4], &mut output)] {
                let vals: Vec<&str> = block.split(' ').collect();
                let vals = textfmt::parse_floats(&vals, line)?;
                if vals.len() != dim {
                    return Err(FormatError::Malformed { line, reason: format!("expected {dim} values") }.into());
                }
                dst.extend(vals);
            }
        }
        let vocab = Vocabulary::from_parts(entries, n)?;
        let meta = doc.header.meta.clone();
        Ok((EmbeddingModel { vocab, dim, input, output, epoch_losses: Vec::new() }, meta))
    }
}

/// Cumulative unigram^0.75 distribution for drawing noise words.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty vocabulary");
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains embeddings over the sentences of `corpus` (one token list per sentence).
pub fn train_word2vec<D: AsRef<[String]>>(
    corpus: &[D],
    config: &Word2VecConfig,
) -> Result<EmbeddingModel, FeatureError> {
    config.validate()?;
    let total_tokens: usize = corpus.iter().map(|d| d.as_ref().len()).sum();
    if total_tokens < config.window + 1 {
        return Err(FeatureError::CorpusTooSmall { tokens: total_tokens, needed: config.window + 1 });
    }
    let vocab = super::build_vocabulary(corpus, 1, 1.0)?;
    let sentences: Vec<Vec<usize>> = corpus.iter().map(|d| vocab.encode(d.as_ref())).collect();

    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &sentences {
        for &w in s {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    let counts: Vec<usize> = (0..vocab.len()).map(|i| counts.get(&i).copied().unwrap_or(0)).collect();
    let noise = NoiseTable::new(&counts);

    let dim = config.dim;
    let v = vocab.len();
    let mut rng = rng::seeded(config.seed, rng::stream::WORD2VEC);
    let scale = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..v * dim).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * scale).collect();
    let mut output = vec![0.0; v * dim];

    let mut trainer = PairTrainer {
        dim,
        negatives: config.negatives,
        noise: &noise,
        grad: vec![0.0; dim],
        hidden: vec![0.0; dim],
    };
    let total_work = (config.epochs * total_tokens) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for sentence in &sentences {
            for pos in 0..sentence.len() {
                let progress = processed as f64 / total_work;
                let lr = config.learning_rate * (1.0 - 0.9 * progress);
                processed += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(sentence.len());
                let center = sentence[pos];
                match config.mode {
                    Word2VecMode::SkipGram => {
                        for (c, &ctx) in sentence.iter().enumerate().take(hi).skip(lo) {
                            if c == pos {
                                continue;
                            }
                            loss_sum += trainer.skipgram_pair(&mut input, &mut output, center, ctx, lr, &mut rng);
                            pairs += 1;
                        }
                    }
                    Word2VecMode::Cbow => {
                        let ctx: Vec<usize> = (lo..hi).filter(|&c| c != pos).map(|c| sentence[c]).collect();
                        if ctx.is_empty() {
                            continue;
                        }
                        loss_sum += trainer.cbow_step(&mut input, &mut output, &ctx, center, lr, &mut rng);
                        pairs += 1;
                    }
                }
            }
        }
        epoch_losses.push(if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 });
    }

    Ok(EmbeddingModel { vocab, dim, input, output, epoch_losses })
}

struct PairTrainer<'a> {
    dim: usize,
    negatives: usize,
    noise: &'a NoiseTable,
    grad: Vec<f64>,
    hidden: Vec<f64>,
}

impl PairTrainer<'_> {
    /// One positive and `negatives` noise updates against hidden vector `self.hidden`.
    /// Accumulates the hidden-vector gradient step into `self.grad`; returns the loss.
    fn score_targets<R: Rng>(&mut self, output: &mut [f64], target: usize, lr: f64, rng: &mut R) -> f64 {
        let d = self.dim;
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for k in 0..=self.negatives {
            let (word, label) = if k == 0 {
                (target, 1.0)
            } else {
                let w = self.noise.sample(rng);
                if w == target {
                    continue;
                }
                (w, 0.0)
            };
            let out = &mut output[word * d..(word + 1) * d];
            let p = sigmoid(dot(&self.hidden, out));
            loss -= if label == 1.0 { p.max(1e-12).ln() } else { (1.0 - p).max(1e-12).ln() };
            let g = lr * (label - p);
            for j in 0..d {
                self.grad[j] += g * out[j];
                out[j] += g * self.hidden[j];
            }
        }
        loss
    }

    fn skipgram_pair<R: Rng>(
        &mut self,
        input: &mut [f64],
        output: &mut [f64],
        center: usize,
        context: usize,
        lr: f64,
        rng: &mut R,
    ) -> f64 {
        let d = self.dim;
        self.hidden.copy_from_slice(&input[center * d..(center + 1) * d]);
        let loss = self.score_targets(output, context, lr, rng);
        for (x, g) in input[center * d..(center + 1) * d].iter_mut().zip(&self.grad) {
            *x += g;
        }
        loss
    }

    fn cbow_step<R: Rng>(
        &mut self,
        input: &mut [f64],
        output: &mut [f64],
        context: &[usize],
        center: usize,
        lr: f64,
        rng: &mut R,
    ) -> f64 {
        let d = self.dim;
        self.hidden.iter_mut().for_each(|h| *h = 0.0);
        for &c in context {
            for (h, x) in self.hidden.iter_mut().zip(&input[c * d..(c + 1) * d]) {
                *h += x;
            }
        }
        let inv = 1.0 / context.len() as f64;
        self.hidden.iter_mut().for_each(|h| *h *= inv);
        let loss = self.score_targets(output, center, lr, rng);
        for &c in context {
            for (x, g) in input[c * d..(c + 1) * d].iter_mut().zip(&self.grad) {
                *x += g;
            }
        }
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Vec<String>> {
        let words = ["alpha", "beta", "gamma", "delta", "risk", "loss", "gain"];
        (0..60)
            .map(|i| (0..6).map(|j| words[(i * 3 + j * 5) % words.len()].to_string()).collect())
            .collect()
    }

    #[test]
    fn config_invariants() {
        for cfg in [
            Word2VecConfig { epochs: 0, ..Default::default() },
            Word2VecConfig { window: 0, ..Default::default() },
            Word2VecConfig { negatives: 0, ..Default::default() },
            Word2VecConfig { dim: 0, ..Default::default() },
        ] {
            assert!(matches!(train_word2vec(&corpus(), &cfg), Err(FeatureError::InvalidConfig(_))));
        }
    }

    #[test]
    fn too_small_corpus() {
        let tiny = vec![vec!["a".to_string(), "b".to_string()]];
        let cfg = Word2VecConfig { window: 2, ..Default::default() };
        assert!(matches!(train_word2vec(&tiny, &cfg), Err(FeatureError::CorpusTooSmall { .. })));
    }

    #[test]
    fn deterministic_and_finite_in_both_modes() {
        for mode in [Word2VecMode::SkipGram, Word2VecMode::Cbow] {
            let cfg = Word2VecConfig { mode, dim: 8, window: 2, epochs: 3, seed: 11, ..Default::default() };
            let a = train_word2vec(&corpus(), &cfg).unwrap();
            let b = train_word2vec(&corpus(), &cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.input_vectors().iter().chain(a.output_vectors()).all(|x| x.is_finite()));
            assert_eq!(a.epoch_losses().len(), 3);
            assert!(a.epoch_losses().iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn text_round_trip() {
        let cfg = Word2VecConfig { dim: 4, window: 2, epochs: 1, seed: 3, ..Default::default() };
        let m = train_word2vec(&corpus(), &cfg).unwrap();
        let (back, _) = EmbeddingModel::from_text(&m.to_text(&Vec::new())).unwrap();
        assert_eq!(back.input_vectors(), m.input_vectors());
        assert_eq!(back.output_vectors(), m.output_vectors());
        assert_eq!(back.vocab(), m.vocab());
    }

    #[test]
    fn noise_table_respects_weights() {
        let table = NoiseTable::new(&[0, 16, 0]);
        let mut r = rng::seeded(1, 0);
        assert!((0..100).all(|_| table.sample(&mut r) == 1));
    }
}
