//! Risk-theme discovery with LDA (collapsed Gibbs sampling) and TF-IDF keyword extraction.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::Rng as _;
use thiserror::Error;

use crate::features::{tfidf, SparseMatrix, TfidfModel, Vocabulary};
use crate::rng::{self, Rng};

#[derive(Debug, Error, PartialEq)]
pub enum TopicError {
    #[error("document {0:?} has no in-vocabulary tokens")]
    EmptyDocument(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("topic {topic} out of range (K = {k})")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("document index {index} out of range ({n} documents)")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("document {id:?}: counts must be non-negative whole numbers")]
    InvalidCounts { id: String },
    #[error("matrix has {cols} columns but the vocabulary has {vocab} tokens")]
    VocabularyMismatch { cols: usize, vocab: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// `alpha = 50 / K`, `beta = 0.01`.
    pub fn new(k: usize, iterations: usize, seed: u64) -> Self {
        LdaConfig { k, alpha: 50.0 / k.max(1) as f64, beta: 0.01, iterations, seed }
    }

    pub fn validate(&self) -> Result<(), TopicError> {
        let bad = |m: &str| Err(TopicError::InvalidConfig(m.to_string()));
        if self.k == 0 {
            return bad("K must be >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be > 0");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be > 0");
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        Ok(())
    }
}

/// Fitted topic-word (`phi`, K x V) and document-topic (`theta`, D x K) distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub config: LdaConfig,
    tokens: Vec<String>,
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.phi.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Collapsed Gibbs sampler state. Exposed so callers can inspect the chain
/// between sweeps; [`fit_lda`] is the usual entry point.
pub struct LdaSampler {
    config: LdaConfig,
    vocab_size: usize,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<usize>,
    topic_word: Vec<usize>,
    topic_total: Vec<usize>,
    rng: Rng,
    weights: Vec<f64>,
}

impl LdaSampler {
    pub fn new(bow: &SparseMatrix, config: LdaConfig) -> Result<Self, TopicError> {
        config.validate()?;
        if bow.n_rows() == 0 {
            return Err(TopicError::EmptyCorpus);
        }
        let mut docs = Vec::with_capacity(bow.n_rows());
        for (id, row) in bow.ids.iter().zip(&bow.rows) {
            let mut words = Vec::new();
            for &(w, c) in row.entries() {
                if c < 0.0 || c.fract() != 0.0 {
                    return Err(TopicError::InvalidCounts { id: id.clone() });
                }
                words.extend(std::iter::repeat_n(w, c as usize));
            }
            if words.is_empty() {
                return Err(TopicError::EmptyDocument(id.clone()));
            }
            docs.push(words);
        }
        let k = config.k;
        let v = bow.n_cols;
        let mut rng = rng::seeded(config.seed, rng::stream::LDA);
        let mut doc_topic = vec![0; docs.len() * k];
        let mut topic_word = vec![0; k * v];
        let mut topic_total = vec![0; k];
        let assignments: Vec<Vec<usize>> = docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                words
                    .iter()
                    .map(|&w| {
                        let z = rng.gen_range(0..k);
                        doc_topic[d * k + z] += 1;
                        topic_word[z * v + w] += 1;
                        topic_total[z] += 1;
                        z
                    })
                    .collect()
            })
            .collect();
        Ok(LdaSampler {
            weights: vec![0.0; k],
            config,
            vocab_size: v,
            docs,
            assignments,
            doc_topic,
            topic_word,
            topic_total,
            rng,
        })
    }

    /// Resamples every token's topic once.
    pub fn sweep(&mut self) {
        let k = self.config.k;
        let v = self.vocab_size;
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        let vbeta = v as f64 * beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d * k + old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.doc_topic[d * k + t] as f64 + alpha)
                        * (self.topic_word[t * v + w] as f64 + beta)
                        / (self.topic_total[t] as f64 + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.weights.partition_point(|&c| c <= u).min(k - 1);

                self.assignments[d][i] = new;
                self.doc_topic[d * k + new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    /// Checks that the count tables agree with the token assignments.
    pub fn check_conservation(&self) -> Result<(), String> {
        let k = self.config.k;
        let v = self.vocab_size;
        let mut corpus_tokens = 0;
        for (d, words) in self.docs.iter().enumerate() {
            let row: usize = self.doc_topic[d * k..(d + 1) * k].iter().sum();
            if row != words.len() {
                return Err(format!("doc {d}: topic counts sum to {row}, document has {} tokens", words.len()));
            }
            corpus_tokens += words.len();
        }
        let dk_total: usize = self.doc_topic.iter().sum();
        let kw_total: usize = self.topic_word.iter().sum();
        let k_total: usize = self.topic_total.iter().sum();
        if dk_total != corpus_tokens || kw_total != corpus_tokens || k_total != corpus_tokens {
            return Err(format!(
                "totals disagree: doc-topic {dk_total}, topic-word {kw_total}, topic {k_total}, corpus {corpus_tokens}"
            ));
        }
        for t in 0..k {
            let s: usize = self.topic_word[t * v..(t + 1) * v].iter().sum();
            if s != self.topic_total[t] {
                return Err(format!("topic {t}: word counts sum to {s}, total says {}", self.topic_total[t]));
            }
        }
        Ok(())
    }

    pub fn estimate(&self, tokens: &[String]) -> TopicModel {
        let k = self.config.k;
        let v = self.vocab_size;
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        let phi = (0..k)
            .map(|t| {
                let denom = self.topic_total[t] as f64 + v as f64 * beta;
                (0..v).map(|w| (self.topic_word[t * v + w] as f64 + beta) / denom).collect()
            })
            .collect();
        let theta = self
            .docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                let denom = words.len() as f64 + k as f64 * alpha;
                (0..k).map(|t| (self.doc_topic[d * k + t] as f64 + alpha) / denom).collect()
            })
            .collect();
        TopicModel { phi, theta, config: self.config.clone(), tokens: tokens.to_vec() }
    }
}

/// Runs `config.iterations` sweeps and estimates phi/theta from the final state.
pub fn fit_lda(bow: &SparseMatrix, vocab: &Vocabulary, config: &LdaConfig) -> Result<TopicModel, TopicError> {
    if bow.n_cols != vocab.len() {
        return Err(TopicError::VocabularyMismatch { cols: bow.n_cols, vocab: vocab.len() });
    }
    let mut sampler = LdaSampler::new(bow, config.clone())?;
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(sampler.estimate(vocab.tokens()))
}

fn rank_desc(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0))
}

/// The `n` most probable tokens of `topic`; ties broken lexicographically.
pub fn top_terms(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<(String, f64)>, TopicError> {
    let row = model.phi.get(topic).ok_or(TopicError::TopicOutOfRange { topic, k: model.k() })?;
    let mut ranked: Vec<(String, f64)> = model.tokens.iter().cloned().zip(row.iter().copied()).collect();
    ranked.sort_by(rank_desc);
    ranked.truncate(n);
    Ok(ranked)
}

pub fn doc_topics(model: &TopicModel, index: usize) -> Result<&[f64], TopicError> {
    model
        .theta
        .get(index)
        .map(Vec::as_slice)
        .ok_or(TopicError::IndexOutOfRange { index, n: model.theta.len() })
}

/// Document tokens ranked by TF-IDF weight, descending; ties lexicographic.
pub fn extract_keywords(tokens: &[String], model: &TfidfModel, n: usize) -> Vec<(String, f64)> {
    let vec = tfidf(tokens, model);
    let mut ranked: Vec<(String, f64)> =
        vec.entries().iter().map(|&(i, w)| (model.vocab().token(i).to_string(), w)).collect();
    ranked.sort_by(rank_desc);
    ranked.truncate(n);
    ranked
}

/// One block per topic: `topic <k>` then `n` lines of `token probability`.
pub fn topic_report(model: &TopicModel, n: usize, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    for t in 0..model.k() {
        let _ = writeln!(s, "topic {t}");
        for (tok, p) in top_terms(model, t, n).expect("topic index in range") {
            let _ = writeln!(s, "{tok} {p}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_vocabulary, bow, fit_idf};

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn matrix(docs: &[Vec<String>]) -> (SparseMatrix, Vocabulary) {
        let vocab = build_vocabulary(docs, 1, 1.0).unwrap();
        let rows = docs.iter().map(|d| bow(d, &vocab)).collect();
        let ids = (0..docs.len()).map(|i| format!("d{i}")).collect();
        (SparseMatrix::new(ids, vec![None; docs.len()], rows, vocab.len()).unwrap(), vocab)
    }

    #[test]
    fn single_topic_is_degenerate() {
        let docs = vec![toks(&["risk", "risk", "credit"]), toks(&["risk", "market"])];
        let (m, vocab) = matrix(&docs);
        let model = fit_lda(&m, &vocab, &LdaConfig::new(1, 5, 3)).unwrap();
        for row in &model.theta {
            assert_eq!(row, &vec![1.0]);
        }
        // smoothed corpus-wide distribution: (count + beta) / (5 + 3 beta)
        let beta = 0.01;
        let expect = |c: f64| (c + beta) / (5.0 + 3.0 * beta);
        let idx = |t: &str| vocab.index_of(t).unwrap();
        assert!((model.phi[0][idx("risk")] - expect(3.0)).abs() < 1e-12);
        assert!((model.phi[0][idx("credit")] - expect(1.0)).abs() < 1e-12);
        assert_eq!(top_terms(&model, 0, 1).unwrap()[0].0, "risk");
        assert_eq!(doc_topics(&model, 1).unwrap(), &[1.0]);
    }

    #[test]
    fn errors() {
        let docs = vec![toks(&["a"]), toks(&["b"])];
        let (mut m, vocab) = matrix(&docs);
        m.rows[1] = Default::default();
        assert_eq!(fit_lda(&m, &vocab, &LdaConfig::new(2, 1, 0)), Err(TopicError::EmptyDocument("d1".into())));
        let (m, vocab) = matrix(&docs);
        let model = fit_lda(&m, &vocab, &LdaConfig::new(2, 1, 0)).unwrap();
        assert!(matches!(top_terms(&model, 2, 1), Err(TopicError::TopicOutOfRange { .. })));
        assert!(matches!(doc_topics(&model, 5), Err(TopicError::IndexOutOfRange { .. })));
        assert!(fit_lda(&m, &vocab, &LdaConfig { alpha: 0.0, ..LdaConfig::new(2, 1, 0) }).is_err());
    }

    #[test]
    fn top_terms_ties_and_overflow() {
        let docs = vec![toks(&["b", "a"])];
        let (m, vocab) = matrix(&docs);
        let model = fit_lda(&m, &vocab, &LdaConfig::new(1, 1, 0)).unwrap();
        let top = top_terms(&model, 0, 10).unwrap();
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].0, "a");
    }

    #[test]
    fn deterministic_and_normalized() {
        let docs: Vec<Vec<String>> = (0..20)
            .map(|i| toks(&["w0", "w1", "w2", "w3", "w4", "w5"][i % 3..i % 3 + 3]))
            .collect();
        let (m, vocab) = matrix(&docs);
        let cfg = LdaConfig { alpha: 0.5, ..LdaConfig::new(3, 20, 9) };
        let a = fit_lda(&m, &vocab, &cfg).unwrap();
        let b = fit_lda(&m, &vocab, &cfg).unwrap();
        assert_eq!(a, b);
        for row in a.phi.iter().chain(&a.theta) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn conservation_holds_every_sweep() {
        let docs: Vec<Vec<String>> = (0..15).map(|i| toks(&["x", "y", "z", "x"][..1 + i % 4])).collect();
        let (m, _) = matrix(&docs);
        let mut s = LdaSampler::new(&m, LdaConfig { alpha: 0.1, ..LdaConfig::new(4, 1, 2) }).unwrap();
        s.check_conservation().unwrap();
        for _ in 0..10 {
            s.sweep();
            s.check_conservation().unwrap();
        }
    }

    #[test]
    fn keywords_rank_by_weight() {
        let docs = vec![
            toks(&["liquidity", "liquidity", "risk"]),
            toks(&["risk", "market"]),
            toks(&["risk", "credit"]),
        ];
        let model = fit_idf(&build_vocabulary(&docs, 1, 1.0).unwrap());
        let kw = extract_keywords(&docs[0], &model, 5);
        assert_eq!(kw[0].0, "liquidity");
        assert!((kw[0].1 - 2.0 * (1.5f64).ln()).abs() < 1e-12);
        assert!(extract_keywords(&[], &model, 5).is_empty());
        assert!(extract_keywords(&docs[0], &model, 0).is_empty());
    }

    #[test]
    fn report_layout() {
        let docs = vec![toks(&["risk", "risk", "credit"])];
        let (m, vocab) = matrix(&docs);
        let model = fit_lda(&m, &vocab, &LdaConfig::new(1, 1, 0)).unwrap();
        let r = topic_report(&model, 1, &[("seed".into(), "0".into())]);
        let lines: Vec<&str> = r.lines().collect();
        assert_eq!(lines[0], "# seed=0");
        assert_eq!(lines[1], "topic 0");
        assert!(lines[2].starts_with("risk "));
    }
}
