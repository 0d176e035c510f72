//! Text cleaning, segmentation and normalization.
//!
//! The pipeline order is fixed: markup stripping, segmentation, lowercasing,
//! character-policy filtering, stopword removal, stemming.

mod porter;

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::exec::Execution;

pub use porter::stem;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("maximal-match segmentation requires a nonempty lexicon")]
    MissingLexicon,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed tokenized record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
}

/// Tokens of one document, in source order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    #[serde(rename = "id")]
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub tokens: Vec<String>,
}

/// Removes every `<...>` span. An unclosed `<` removes the rest of the text.
pub fn strip_markup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        match rest[open..].find('>') {
            Some(close) => rest = &rest[open + close + 1..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Segmentation {
    /// Split on whitespace; every punctuation or symbol character is its own token.
    #[default]
    Delimited,
    /// Greedy longest lexicon match, for scripts written without spaces.
    MaximalMatch,
}

impl FromStr for Segmentation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delimited" => Ok(Segmentation::Delimited),
            "maximal_match" | "maximal-match" => Ok(Segmentation::MaximalMatch),
            other => Err(format!("unknown segmentation mode {other:?}")),
        }
    }
}

/// Word list for maximal-match segmentation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashSet<String>,
    max_chars: usize,
}

impl Lexicon {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: HashSet<String> =
            entries.into_iter().map(Into::into).filter(|e| !e.is_empty()).collect();
        let max_chars = entries.iter().map(|e| e.chars().count()).max().unwrap_or(0);
        Lexicon { entries, max_chars }
    }

    /// One entry per line; blank lines ignored.
    pub fn parse(text: &str) -> Self {
        Lexicon::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        Ok(Lexicon::parse(&std::fs::read_to_string(path)?))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, s: &str) -> bool {
        self.entries.contains(s)
    }
}

pub fn segment(
    text: &str,
    mode: Segmentation,
    lexicon: Option<&Lexicon>,
) -> Result<Vec<String>, PreprocessError> {
    match mode {
        Segmentation::Delimited => Ok(segment_delimited(text)),
        Segmentation::MaximalMatch => match lexicon {
            Some(lex) if !lex.is_empty() => Ok(segment_maximal(text, lex)),
            _ => Err(PreprocessError::MissingLexicon),
        },
    }
}

fn segment_delimited(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

fn segment_maximal(text: &str, lex: &Lexicon) -> Vec<String> {
    let mut tokens = Vec::new();
    for run in text.split_whitespace() {
        let chars: Vec<char> = run.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let longest = (1..=lex.max_chars.min(chars.len() - i))
                .rev()
                .map(|len| (len, chars[i..i + len].iter().collect::<String>()))
                .find(|(_, cand)| lex.contains(cand));
            match longest {
                Some((len, word)) => {
                    tokens.push(word);
                    i += len;
                }
                None => {
                    tokens.push(chars[i].to_string());
                    i += 1;
                }
            }
        }
    }
    tokens
}

/// Lowercased stopword set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordSet {
    words: HashSet<String>,
}

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

impl Default for StopwordSet {
    fn default() -> Self {
        StopwordSet::parse(DEFAULT_STOPWORDS)
    }
}

impl StopwordSet {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopwordSet { words: words.into_iter().map(|w| w.as_ref().trim().to_lowercase()).collect() }
    }

    pub fn empty() -> Self {
        StopwordSet { words: HashSet::new() }
    }

    /// One word per line, `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        StopwordSet::new(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        Ok(StopwordSet::parse(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Case-insensitive membership.
    pub fn contains(&self, token: &str) -> bool {
        if token.chars().any(char::is_uppercase) {
            self.words.contains(&token.to_lowercase())
        } else {
            self.words.contains(token)
        }
    }
}

pub fn remove_stopwords(tokens: &[String], stopwords: &StopwordSet) -> Vec<String> {
    tokens.iter().filter(|t| !stopwords.contains(t)).cloned().collect()
}

/// Which tokens survive the character filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CharPolicy {
    /// Drop tokens without a single letter or digit.
    #[default]
    RequireAlphanumeric,
    KeepAll,
}

impl CharPolicy {
    fn keeps(self, token: &str) -> bool {
        match self {
            CharPolicy::RequireAlphanumeric => token.chars().any(char::is_alphanumeric),
            CharPolicy::KeepAll => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub strip_markup: bool,
    pub segmentation: Segmentation,
    pub lexicon: Option<Lexicon>,
    pub stopwords: StopwordSet,
    pub char_policy: CharPolicy,
    pub stemming: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            strip_markup: true,
            segmentation: Segmentation::Delimited,
            lexicon: None,
            stopwords: StopwordSet::default(),
            char_policy: CharPolicy::RequireAlphanumeric,
            stemming: true,
        }
    }
}

/// Runs every stage on raw text.
pub fn preprocess_text(text: &str, config: &PreprocessConfig) -> Result<Vec<String>, PreprocessError> {
    let stripped;
    let text = if config.strip_markup {
        stripped = strip_markup(text);
        stripped.as_str()
    } else {
        text
    };
    let mut tokens = segment(text, config.segmentation, config.lexicon.as_ref())?;
    if config.lowercase {
        for t in &mut tokens {
            if t.chars().any(char::is_uppercase) {
                *t = t.to_lowercase();
            }
        }
    }
    tokens.retain(|t| config.char_policy.keeps(t));
    let mut tokens = remove_stopwords(&tokens, &config.stopwords);
    if config.stemming {
        for t in &mut tokens {
            *t = stem(t);
        }
    }
    Ok(tokens)
}

pub fn preprocess_pipeline(
    doc: &Document,
    config: &PreprocessConfig,
) -> Result<TokenizedDocument, PreprocessError> {
    Ok(TokenizedDocument {
        doc_id: doc.id.clone(),
        label: doc.label.clone(),
        tokens: preprocess_text(&doc.text, config)?,
    })
}

/// Preprocesses every document; output order equals corpus order.
pub fn preprocess_corpus(
    corpus: &Corpus,
    config: &PreprocessConfig,
    exec: Execution,
) -> Result<Vec<TokenizedDocument>, PreprocessError> {
    exec.map_slice(corpus.docs(), |d| preprocess_pipeline(d, config)).into_iter().collect()
}

pub fn write_tokenized<W: Write>(docs: &[TokenizedDocument], mut out: W) -> Result<(), PreprocessError> {
    for d in docs {
        writeln!(out, "{}", serde_json::to_string(d).expect("tokenized docs always serialize"))?;
    }
    Ok(())
}

pub fn read_tokenized<R: Read>(reader: R) -> Result<Vec<TokenizedDocument>, PreprocessError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let doc: TokenizedDocument = serde_json::from_str(&line)
            .map_err(|e| PreprocessError::MalformedRecord { line: i + 1, reason: e.to_string() })?;
        out.push(doc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn markup_removal() {
        assert_eq!(strip_markup("<b>risk</b> up"), "risk up");
        assert_eq!(strip_markup("no tags here"), "no tags here");
        assert_eq!(strip_markup("a <i><u>deep</u></i> b"), "a deep b");
        assert_eq!(strip_markup("cut <here and more"), "cut ");
    }

    #[test]
    fn delimited_segmentation() {
        assert_eq!(
            segment("credit risk, rising.", Segmentation::Delimited, None).unwrap(),
            toks(&["credit", "risk", ",", "rising", "."])
        );
        assert!(segment("", Segmentation::Delimited, None).unwrap().is_empty());
    }

    #[test]
    fn maximal_match_segmentation() {
        let lex = Lexicon::new(["ab", "abc", "d"]);
        assert_eq!(segment("abcd", Segmentation::MaximalMatch, Some(&lex)).unwrap(), toks(&["abc", "d"]));
        assert_eq!(segment("xabd", Segmentation::MaximalMatch, Some(&lex)).unwrap(), toks(&["x", "ab", "d"]));
        assert!(matches!(
            segment("abcd", Segmentation::MaximalMatch, None),
            Err(PreprocessError::MissingLexicon)
        ));
        assert!(matches!(
            segment("abcd", Segmentation::MaximalMatch, Some(&Lexicon::default())),
            Err(PreprocessError::MissingLexicon)
        ));
    }

    #[test]
    fn maximal_match_multibyte() {
        let lex = Lexicon::new(["金融", "风险", "金融风险"]);
        assert_eq!(
            segment("金融风险高", Segmentation::MaximalMatch, Some(&lex)).unwrap(),
            toks(&["金融风险", "高"])
        );
    }

    #[test]
    fn stopword_removal() {
        let sw = StopwordSet::default();
        assert_eq!(remove_stopwords(&toks(&["the", "risk", "and", "loss"]), &sw), toks(&["risk", "loss"]));
        assert!(remove_stopwords(&[], &sw).is_empty());
        assert!(remove_stopwords(&toks(&["the", "in", "and"]), &sw).is_empty());
        assert_eq!(remove_stopwords(&toks(&["The", "Risk"]), &sw), toks(&["Risk"]));
    }

    #[test]
    fn stopword_file_format() {
        let sw = StopwordSet::parse("# comment\nThe\n\n  AND \n");
        assert_eq!(sw.len(), 2);
        assert!(sw.contains("the") && sw.contains("and"));
        assert!(StopwordSet::default().len() >= 120);
    }

    #[test]
    fn pipeline_examples() {
        let cfg = PreprocessConfig::default();
        assert_eq!(preprocess_text("The <b>markets</b> are falling", &cfg).unwrap(), toks(&["market", "fall"]));
        assert!(preprocess_text("", &cfg).unwrap().is_empty());
        assert_eq!(
            preprocess_text("Rising market risk, attention needed on liquidity", &cfg).unwrap(),
            toks(&["rise", "market", "risk", "attent", "need", "liquid"])
        );
    }

    #[test]
    fn pipeline_flags_off() {
        let cfg = PreprocessConfig {
            lowercase: false,
            strip_markup: false,
            stopwords: StopwordSet::empty(),
            char_policy: CharPolicy::KeepAll,
            stemming: false,
            ..Default::default()
        };
        assert_eq!(
            preprocess_text("<b>Risk</b>!", &cfg).unwrap(),
            toks(&["<", "b", ">", "Risk", "<", "/", "b", ">", "!"])
        );
    }

    #[test]
    fn tokenized_io_round_trip() {
        let docs = vec![TokenizedDocument { doc_id: "d1".into(), label: Some("x".into()), tokens: toks(&["a", "b"]) }];
        let mut buf = Vec::new();
        write_tokenized(&docs, &mut buf).unwrap();
        assert_eq!(read_tokenized(buf.as_slice()).unwrap(), docs);
    }
}
