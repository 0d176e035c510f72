//! Bag-of-words counts, TF-IDF weights, word embeddings and fused features.
//!
//! TF is the raw occurrence count and `idf(t) = ln(N / (1 + df(t)))`. With the
//! `+1` inside the ratio a term present in every document gets a negative
//! weight; that is kept as is, not floored at zero.

mod word2vec;

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::exec::Execution;
use crate::textfmt::{self, FormatError, Header, Meta};

pub use word2vec::{train_word2vec, EmbeddingModel, Word2VecConfig, Word2VecMode};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("every token was filtered out of the vocabulary")]
    EmptyVocabulary,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("corpus has {tokens} tokens, need at least {needed}")]
    CorpusTooSmall { tokens: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Token index with document frequencies. Indices follow lexicographic token order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit parts. Tokens are re-sorted; every
    /// `df` must satisfy `1 <= df <= n_docs`.
    pub fn from_parts(entries: Vec<(String, usize)>, n_docs: usize) -> Result<Self, FeatureError> {
        let mut map = BTreeMap::new();
        for (tok, df) in entries {
            if df == 0 || df > n_docs {
                return Err(FeatureError::InvalidVocabulary(format!("df({tok}) = {df} with N = {n_docs}")));
            }
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(FeatureError::InvalidVocabulary(format!("bad token {tok:?}")));
            }
            if map.insert(tok.clone(), df).is_some() {
                return Err(FeatureError::InvalidVocabulary(format!("duplicate token {tok:?}")));
            }
        }
        if map.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        let (tokens, df): (Vec<String>, Vec<usize>) = map.into_iter().unzip();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary { tokens, index, df, n_docs })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    /// Token ids of in-vocabulary tokens, in order.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.index_of(t)).collect()
    }
}

/// Tokens with `df < min_df` or `df / N > max_df_ratio` are excluded.
pub fn build_vocabulary<D: AsRef<[String]>>(
    docs: &[D],
    min_df: usize,
    max_df_ratio: f64,
) -> Result<Vocabulary, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let n = docs.len();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let distinct: HashSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let entries: Vec<(String, usize)> = df
        .into_iter()
        .filter(|&(_, c)| c >= min_df.max(1) && (c as f64 / n as f64) <= max_df_ratio)
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    Vocabulary::from_parts(entries, n)
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Sorts, merges duplicates by summation and drops zeros.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |p| self.entries[p].1)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Row-labelled sparse matrix; the feature-matrix handoff between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub ids: Vec<String>,
    pub labels: Vec<Option<String>>,
    pub rows: Vec<SparseVector>,
    pub n_cols: usize,
}

pub const FEATURES_FORMAT: &str = "riskminer-features";
pub const FEATURES_SCHEMA_VERSION: u32 = 1;

impl SparseMatrix {
    pub fn new(
        ids: Vec<String>,
        labels: Vec<Option<String>>,
        rows: Vec<SparseVector>,
        n_cols: usize,
    ) -> Result<Self, FeatureError> {
        if ids.len() != rows.len() || labels.len() != rows.len() {
            return Err(FeatureError::DimensionMismatch { expected: rows.len(), got: ids.len().min(labels.len()) });
        }
        if let Some(max) = rows.iter().filter_map(SparseVector::max_index).max() {
            if max >= n_cols {
                return Err(FeatureError::DimensionMismatch { expected: n_cols, got: max + 1 });
            }
        }
        Ok(SparseMatrix { ids, labels, rows, n_cols })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.to_dense(self.n_cols)).collect()
    }

    /// Sub-matrix with the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> SparseMatrix {
        SparseMatrix {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            n_cols: self.n_cols,
        }
    }

    /// Triplet text format: `row <r> <id> <label|->` lines, then `<r> <c> <value>` lines.
    pub fn to_text(&self, meta: &Meta) -> String {
        let mut s = Header::new(FEATURES_FORMAT, FEATURES_SCHEMA_VERSION)
            .field("rows", self.n_rows())
            .field("cols", self.n_cols)
            .field("nnz", self.rows.iter().map(SparseVector::nnz).sum::<usize>())
            .with_meta(meta)
            .render();
        for (r, (id, label)) in self.ids.iter().zip(&self.labels).enumerate() {
            s.push_str(&format!("row {r} {id} {}\n", label.as_deref().unwrap_or("-")));
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row.entries() {
                s.push_str(&format!("{r} {c} {v}\n"));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<(Self, Meta), FeatureError> {
        let mut doc = textfmt::Document::parse(text, FEATURES_FORMAT, FEATURES_SCHEMA_VERSION)?;
        let n_rows: usize = doc.header.require("rows")?;
        let n_cols: usize = doc.header.require("cols")?;
        let nnz: usize = doc.header.require("nnz")?;
        let mut ids = Vec::with_capacity(n_rows);
        let mut labels = Vec::with_capacity(n_rows);
        for r in 0..n_rows {
            let (line, parts) = doc.expect("row")?;
            if parts.len() != 3 || textfmt::parse_num::<usize>(parts[0], line)? != r {
                return Err(FormatError::Malformed { line, reason: "expected `row <r> <id> <label>`".into() }.into());
            }
            ids.push(parts[1].to_string());
            labels.push(if parts[2] == "-" { None } else { Some(parts[2].to_string()) });
        }
        let mut pairs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for _ in 0..nnz {
            let (line, l) = doc.next_line()?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(FormatError::Malformed { line, reason: "expected `<row> <col> <value>`".into() }.into());
            }
            let r: usize = textfmt::parse_num(parts[0], line)?;
            let c: usize = textfmt::parse_num(parts[1], line)?;
            if r >= n_rows || c >= n_cols {
                return Err(FormatError::Malformed { line, reason: "triplet outside the declared shape".into() }.into());
            }
            pairs[r].push((c, textfmt::parse_num(parts[2], line)?));
        }
        if doc.remaining() > 0 {
            let (line, _) = doc.next_line()?;
            return Err(FormatError::Malformed { line, reason: "more triplets than nnz".into() }.into());
        }
        let rows = pairs.into_iter().map(SparseVector::from_pairs).collect();
        let meta = doc.header.meta.clone();
        Ok((SparseMatrix::new(ids, labels, rows, n_cols)?, meta))
    }
}

/// Raw occurrence counts of in-vocabulary tokens.
pub fn bow(tokens: &[String], vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    SparseVector { entries: counts.into_iter().collect() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocab: Vocabulary,
    idf: Vec<f64>,
}

pub const TFIDF_FORMAT: &str = "riskminer-tfidf";
pub const TFIDF_SCHEMA_VERSION: u32 = 1;

impl TfidfModel {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn to_text(&self, meta: &Meta) -> String {
        let mut s = Header::new(TFIDF_FORMAT, TFIDF_SCHEMA_VERSION)
            .field("V", self.vocab.len())
            .field("N", self.vocab.n_docs())
            .with_meta(meta)
            .render();
        for (i, tok) in self.vocab.tokens().iter().enumerate() {
            s.push_str(&format!("{tok}\t{i}\t{}\t{}\n", self.vocab.df(i), self.idf[i]));
        }
        s
    }

    /// Parses the text format. The stored idf column is checked against the
    /// formula; a mismatch means the file was edited or corrupted.
    pub fn from_text(text: &str) -> Result<(Self, Meta), FeatureError> {
        let mut doc = textfmt::Document::parse(text, TFIDF_FORMAT, TFIDF_SCHEMA_VERSION)?;
        let v: usize = doc.header.require("V")?;
        let n: usize = doc.header.require("N")?;
        let mut entries = Vec::with_capacity(v);
        let mut stored = Vec::with_capacity(v);
        for _ in 0..v {
            let (line, l) = doc.next_line()?;
            let parts: Vec<&str> = l.split('\t').collect();
            if parts.len() != 4 {
                return Err(FormatError::Malformed { line, reason: "expected token, index, df, idf".into() }.into());
            }
            let idx: usize = textfmt::parse_num(parts[1], line)?;
            if idx != entries.len() {
                return Err(FormatError::Malformed { line, reason: format!("index {idx} out of order") }.into());
            }
            entries.push((parts[0].to_string(), textfmt::parse_num(parts[2], line)?));
            stored.push((line, textfmt::parse_num::<f64>(parts[3], line)?));
        }
        let model = fit_idf(&Vocabulary::from_parts(entries, n)?);
        for (i, (line, w)) in stored.into_iter().enumerate() {
            if w != model.idf[i] {
                return Err(FormatError::Malformed { line, reason: "idf does not match df and N".into() }.into());
            }
        }
        let meta = doc.header.meta.clone();
        Ok((model, meta))
    }
}

/// `idf(t) = ln(N / (1 + df(t)))`.
pub fn fit_idf(vocab: &Vocabulary) -> TfidfModel {
    let n = vocab.n_docs() as f64;
    let idf = (0..vocab.len()).map(|i| (n / (1.0 + vocab.df(i) as f64)).ln()).collect();
    TfidfModel { vocab: vocab.clone(), idf }
}

/// `count(t) * idf(t)` for each in-vocabulary token; zero products are dropped.
pub fn tfidf(tokens: &[String], model: &TfidfModel) -> SparseVector {
    let counts = bow(tokens, &model.vocab);
    SparseVector::from_pairs(counts.entries.iter().map(|&(i, c)| (i, c * model.idf[i])).collect())
}

/// TF-IDF vectors for a batch of documents, in input order.
pub fn tfidf_batch<D: AsRef<[String]> + Sync>(docs: &[D], model: &TfidfModel, exec: Execution) -> Vec<SparseVector> {
    exec.map_slice(docs, |d| tfidf(d.as_ref(), model))
}

/// Mean of the input vectors of in-vocabulary tokens; zeros when there are none.
pub fn doc_embedding(tokens: &[String], model: &EmbeddingModel) -> Vec<f64> {
    let mut acc = vec![0.0; model.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = model.vector(t) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        let inv = n as f64;
        for a in &mut acc {
            *a /= inv;
        }
    }
    acc
}

/// Dense TF-IDF block (length `vocab_size`) followed by the embedding block.
pub fn fuse_features(
    tfidf_vec: &SparseVector,
    vocab_size: usize,
    embedding: &[f64],
    dim: usize,
) -> Result<Vec<f64>, FeatureError> {
    if let Some(max) = tfidf_vec.max_index() {
        if max >= vocab_size {
            return Err(FeatureError::DimensionMismatch { expected: vocab_size, got: max + 1 });
        }
    }
    if embedding.len() != dim {
        return Err(FeatureError::DimensionMismatch { expected: dim, got: embedding.len() });
    }
    let mut out = tfidf_vec.to_dense(vocab_size);
    out.extend_from_slice(embedding);
    Ok(out)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, FeatureError> {
    if a.len() != b.len() {
        return Err(FeatureError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(FeatureError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
