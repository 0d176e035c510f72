//! Seeded synthetic datasets with known structure, used by tests, the
//! acceptance suite, benches and the `generate` command.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Corpus, Document};
use crate::rng::{self, stream, Rng};

/// Class keywords of the synthetic risk corpus, by label (sorted).
pub const RISK_CLASSES: [(&str, [&str; 12]); 5] = [
    (
        "credit_risk",
        ["credit", "default", "loan", "borrower", "collateral", "counterparty", "rating", "delinquency", "receivable", "lending", "bond", "downgrade"],
    ),
    (
        "liquidity_risk",
        ["liquidity", "cash", "funding", "solvency", "payable", "shortfall", "reserve", "withdrawal", "maturity", "refinancing", "overdraft", "deposit"],
    ),
    (
        "market_risk",
        ["market", "volatility", "price", "equity", "index", "fluctuation", "demand", "competition", "exchange", "trading", "commodity", "currency"],
    ),
    (
        "operational_risk",
        ["operational", "cost", "process", "system", "failure", "fraud", "staff", "outage", "supply", "error", "breakdown", "workforce"],
    ),
    (
        "policy_risk",
        ["policy", "regulation", "government", "tax", "tariff", "legislation", "subsidy", "regulator", "sanction", "reform", "election", "law"],
    ),
];

const COMMON_WORDS: [&str; 32] = [
    "company", "report", "quarter", "annual", "growth", "revenue", "profit", "management", "strategy", "attention",
    "increase", "outlook", "business", "financial", "performance", "analysis", "investment", "asset", "capital",
    "sector", "industry", "period", "result", "plan", "expected", "significant", "overall", "recommend", "board",
    "review", "segment", "guidance",
];

const FILLER_STOPWORDS: [&str; 8] = ["the", "of", "and", "in", "to", "for", "with", "on"];

#[derive(Debug, Clone, PartialEq)]
pub struct RiskCorpusConfig {
    pub n_docs: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a word is a keyword of the document's own class.
    pub own_keyword: f64,
    /// Probability that a word is a keyword of some other class.
    pub other_keyword: f64,
    /// Probability that a word is a stopword.
    pub stopword: f64,
    pub seed: u64,
}

impl Default for RiskCorpusConfig {
    fn default() -> Self {
        RiskCorpusConfig {
            n_docs: 1000,
            min_len: 15,
            max_len: 30,
            own_keyword: 0.26,
            other_keyword: 0.06,
            stopword: 0.15,
            seed: 0,
        }
    }
}

/// Labelled report snippets from five risk classes. Class `i` is used for
/// document `i mod 5` so the classes are balanced; the rest is drawn from
/// the seeded stream.
pub fn risk_corpus(cfg: &RiskCorpusConfig) -> Corpus {
    let mut rng = rng::seeded(cfg.seed, stream::SYNTH);
    let width = cfg.n_docs.max(1).to_string().len();
    let docs = (0..cfg.n_docs)
        .map(|i| {
            let class = i % RISK_CLASSES.len();
            let len = rng.gen_range(cfg.min_len..=cfg.max_len.max(cfg.min_len));
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    let u: f64 = rng.gen();
                    if u < cfg.own_keyword {
                        *RISK_CLASSES[class].1.choose(&mut rng).unwrap()
                    } else if u < cfg.own_keyword + cfg.other_keyword {
                        let other = (class + rng.gen_range(1..RISK_CLASSES.len())) % RISK_CLASSES.len();
                        *RISK_CLASSES[other].1.choose(&mut rng).unwrap()
                    } else if u < cfg.own_keyword + cfg.other_keyword + cfg.stopword {
                        *FILLER_STOPWORDS.choose(&mut rng).unwrap()
                    } else {
                        *COMMON_WORDS.choose(&mut rng).unwrap()
                    }
                })
                .collect();
            Document::new(format!("R{i:0width$}"), sentences(&words, &mut rng)).with_label(RISK_CLASSES[class].0)
        })
        .collect();
    Corpus::new(docs).expect("generated ids are unique and texts nonempty")
}

/// Joins words into capitalized sentences of 5 to 9 words.
fn sentences(words: &[&str], rng: &mut Rng) -> String {
    let mut out = String::new();
    let mut rest = words;
    while !rest.is_empty() {
        let n = rng.gen_range(5..=9).min(rest.len());
        let (head, tail) = rest.split_at(n);
        if !out.is_empty() {
            out.push(' ');
        }
        let mut s = head.join(" ");
        if let Some(first) = s.get(..1) {
            s = first.to_uppercase() + &s[1..];
        }
        out.push_str(&s);
        out.push('.');
        rest = tail;
    }
    out
}

/// Sentences for embedding tests in which two words share one context set.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    pub sentences: Vec<Vec<String>>,
    pub pair: (String, String),
    pub fillers: Vec<String>,
}

/// `pair.0` and `pair.1` only ever occur between the same left and right
/// context words; everything else is uniform filler.
pub fn planted_pair_corpus(n_sentences: usize, n_fillers: usize, seed: u64) -> PlantedCorpus {
    let mut rng = rng::seeded(seed, stream::SYNTH);
    let fillers: Vec<String> = (0..n_fillers).map(|i| format!("w{i:03}")).collect();
    let left = ["north", "east"];
    let right = ["south", "west"];
    let pair = ("alpha".to_string(), "beta".to_string());
    let sentences = (0..n_sentences)
        .map(|_| {
            let mut s: Vec<String> = (0..8).map(|_| fillers.choose(&mut rng).unwrap().clone()).collect();
            if rng.gen_bool(0.5) {
                let at = rng.gen_range(1..s.len() - 1);
                let word = if rng.gen_bool(0.5) { &pair.0 } else { &pair.1 };
                s[at - 1] = left.choose(&mut rng).unwrap().to_string();
                s[at] = word.clone();
                s[at + 1] = right.choose(&mut rng).unwrap().to_string();
            }
            s
        })
        .collect();
    PlantedCorpus { sentences, pair, fillers }
}

/// Two-topic corpus over disjoint vocabularies `a0..a9` and `b0..b9`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpus {
    pub docs: Vec<Vec<String>>,
    pub vocabularies: [Vec<String>; 2],
    /// Dominant topic of each document.
    pub dominant: Vec<usize>,
}

/// Each document puts weight `purity` on a dominant topic (chosen uniformly)
/// and the rest on the other; words are uniform within a topic.
pub fn two_topic_corpus(n_docs: usize, doc_len: usize, purity: f64, seed: u64) -> TopicCorpus {
    let mut rng = rng::seeded(seed, stream::SYNTH);
    let vocabularies = [
        (0..10).map(|i| format!("a{i}")).collect::<Vec<_>>(),
        (0..10).map(|i| format!("b{i}")).collect::<Vec<_>>(),
    ];
    let mut dominant = Vec::with_capacity(n_docs);
    let docs = (0..n_docs)
        .map(|_| {
            let d = rng.gen_range(0..2);
            dominant.push(d);
            (0..doc_len)
                .map(|_| {
                    let t = if rng.gen_bool(purity) { d } else { 1 - d };
                    vocabularies[t].choose(&mut rng).unwrap().clone()
                })
                .collect()
        })
        .collect();
    TopicCorpus { docs, vocabularies, dominant }
}

/// Isotropic Gaussian blobs, `n_per_center` points around each center.
/// Returns rows and center indices.
pub fn gaussian_blobs(n_per_center: usize, centers: &[Vec<f64>], sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng::seeded(seed, stream::SYNTH);
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and >= 0");
    let mut x = Vec::with_capacity(n_per_center * centers.len());
    let mut y = Vec::with_capacity(x.capacity());
    for _ in 0..n_per_center {
        for (c, center) in centers.iter().enumerate() {
            x.push(center.iter().map(|m| m + normal.sample(&mut rng)).collect());
            y.push(c);
        }
    }
    (x, y)
}

/// One feature uniform on `[-1, 1]`; the label is `x > 0`.
pub fn threshold_rule(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = rng::seeded(seed, stream::SYNTH);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..=1.0)]).collect();
    let y = x.iter().map(|r| r[0] > 0.0).collect();
    (x, y)
}

/// Random token-id sequences labelled by the parity of their first id.
pub fn first_token_parity(n: usize, len: usize, vocab: usize, seed: u64) -> (Vec<Vec<usize>>, Vec<&'static str>) {
    let mut rng = rng::seeded(seed, stream::SYNTH);
    let seqs: Vec<Vec<usize>> = (0..n).map(|_| (0..len).map(|_| rng.gen_range(0..vocab)).collect()).collect();
    let labels = seqs.iter().map(|s| if s[0] % 2 == 0 { "even" } else { "odd" }).collect();
    (seqs, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_corpus_is_balanced_and_seeded() {
        let cfg = RiskCorpusConfig { n_docs: 50, ..RiskCorpusConfig::default() };
        let c = risk_corpus(&cfg);
        assert_eq!(c.len(), 50);
        assert_eq!(c.label_set().len(), 5);
        assert!(c.docs().iter().all(|d| d.text.ends_with('.')));
        assert_eq!(c, risk_corpus(&cfg));
        assert_ne!(c, risk_corpus(&RiskCorpusConfig { seed: 1, ..cfg }));
    }

    #[test]
    fn planted_pair_contexts() {
        let p = planted_pair_corpus(200, 50, 0);
        for s in &p.sentences {
            for (i, w) in s.iter().enumerate() {
                if *w == p.pair.0 || *w == p.pair.1 {
                    assert!(["north", "east"].contains(&s[i - 1].as_str()));
                    assert!(["south", "west"].contains(&s[i + 1].as_str()));
                }
            }
        }
    }

    #[test]
    fn topic_corpus_vocabularies_disjoint() {
        let t = two_topic_corpus(20, 30, 0.9, 1);
        assert!(t.vocabularies[0].iter().all(|w| !t.vocabularies[1].contains(w)));
        assert!(t.docs.iter().all(|d| d.len() == 30));
    }

    #[test]
    fn small_generators() {
        let (x, y) = gaussian_blobs(10, &[vec![0.0, 0.0], vec![6.0, 6.0]], 1.0, 0);
        assert_eq!((x.len(), y.iter().filter(|&&c| c == 1).count()), (20, 10));
        let (x, y) = threshold_rule(100, 0);
        assert!(x.iter().zip(&y).all(|(r, &l)| (r[0] > 0.0) == l));
        let (s, l) = first_token_parity(10, 8, 16, 0);
        assert!(s.iter().zip(&l).all(|(q, &lab)| (q[0] % 2 == 0) == (lab == "even")));
    }
}
