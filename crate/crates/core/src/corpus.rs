//! Documents, corpora and financial indicator records.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?} has empty text")]
    EmptyText(String),
    #[error("document with empty id at line {0}")]
    EmptyId(usize),
    #[error("line {line}: unknown report type {value:?}")]
    UnknownReportType { line: usize, value: String },
    #[error("line {line}: total assets of {company:?} must be positive")]
    NonPositiveAsset { line: usize, company: String },
    #[error("line {line}: {field} = {value} is outside its valid range")]
    OutOfRange { line: usize, field: &'static str, value: f64 },
    #[error("corpus is empty")]
    Empty,
}

/// A single labelled unit of financial text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub company: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document { id: id.into(), text: text.into(), label: None, company: None, date: None }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_company(mut self, company: impl Into<String>) -> Self {
        self.company = Some(company.into());
        self
    }
}

/// An ordered, immutable collection of documents with unique ids and nonempty text.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    docs: Vec<Document>,
    label_set: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, enforcing id uniqueness and nonempty text.
    pub fn new(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in &docs {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(doc.id.clone()));
            }
        }
        Ok(Self::from_docs_unchecked(docs))
    }

    fn from_docs_unchecked(docs: Vec<Document>) -> Self {
        let label_set: BTreeSet<String> = docs.iter().filter_map(|d| d.label.clone()).collect();
        Corpus { docs, label_set: label_set.into_iter().collect() }
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Sorted distinct non-null labels.
    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }

    /// Labels in document order; `None` for unlabelled documents.
    pub fn labels(&self) -> Vec<Option<&str>> {
        self.docs.iter().map(|d| d.label.as_deref()).collect()
    }

    /// Writes the corpus as line-delimited JSON, one document per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for doc in &self.docs {
            let line = serde_json::to_string(doc).expect("documents always serialize");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.docs.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" | "ndjson" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(file, format)
}

/// Parses a corpus from a reader. Blank JSONL lines and `#` comment lines are skipped.
pub fn read_corpus<R: Read>(reader: R, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let docs = match format {
        CorpusFormat::Jsonl => read_jsonl_docs(reader)?,
        CorpusFormat::Csv => read_csv_docs(reader)?,
    };
    Corpus::new(docs)
}

fn read_jsonl_docs<R: Read>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| CorpusError::MalformedRecord { line: i + 1, reason: e.to_string() })?;
        if doc.id.is_empty() {
            return Err(CorpusError::EmptyId(i + 1));
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn read_csv_docs<R: Read>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Fields).from_reader(reader);
    let mut docs = Vec::new();
    for (i, rec) in rdr.deserialize::<Document>().enumerate() {
        // header is line 1
        let line = i + 2;
        let doc = rec.map_err(|e| CorpusError::MalformedRecord { line, reason: e.to_string() })?;
        if doc.id.is_empty() {
            return Err(CorpusError::EmptyId(line));
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Summary of a corpus with anomalies listed rather than raised.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n_docs: usize,
    pub label_counts: BTreeMap<String, usize>,
    pub unlabeled: Vec<String>,
    pub empty_text: Vec<String>,
    pub duplicate_ids: Vec<String>,
}

impl ValidationReport {
    pub fn n_labels(&self) -> usize {
        self.label_counts.len()
    }

    /// Empty-text and duplicate-id findings. Unlabelled documents are listed
    /// separately and are not counted as anomalies.
    pub fn anomalies(&self) -> usize {
        self.empty_text.len() + self.duplicate_ids.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "documents\t{}", self.n_docs)?;
        writeln!(f, "labels\t{}", self.n_labels())?;
        writeln!(f, "anomalies\t{}", self.anomalies())?;
        for (label, count) in &self.label_counts {
            writeln!(f, "label\t{label}\t{count}")?;
        }
        for id in &self.unlabeled {
            writeln!(f, "unlabeled\t{id}")?;
        }
        for id in &self.empty_text {
            writeln!(f, "empty_text\t{id}")?;
        }
        for id in &self.duplicate_ids {
            writeln!(f, "duplicate_id\t{id}")?;
        }
        Ok(())
    }
}

pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    validate_documents(corpus.docs())
}

/// Validates a raw document list (which may violate corpus invariants).
pub fn validate_documents(docs: &[Document]) -> ValidationReport {
    let mut label_counts = BTreeMap::new();
    let mut unlabeled = Vec::new();
    let mut empty_text = Vec::new();
    let mut duplicate_ids = Vec::new();
    let mut seen = HashSet::new();
    for doc in docs {
        match &doc.label {
            Some(l) => *label_counts.entry(l.clone()).or_insert(0) += 1,
            None => unlabeled.push(doc.id.clone()),
        }
        if doc.text.trim().is_empty() {
            empty_text.push(doc.id.clone());
        }
        if !seen.insert(doc.id.as_str()) {
            duplicate_ids.push(doc.id.clone());
        }
    }
    ValidationReport { n_docs: docs.len(), label_counts, unlabeled, empty_text, duplicate_ids }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportType {
    Annual,
    Quarterly,
    MarketAnalysis,
}

impl ReportType {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportType::Annual => "Annual Report",
            ReportType::Quarterly => "Quarterly Report",
            ReportType::MarketAnalysis => "Market Analysis",
        }
    }
}

impl FromStr for ReportType {
    type Err = String;

    /// Case-insensitive; accepts "Annual", "Annual Report", "market_analysis", etc.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        let key = key.strip_suffix("report").unwrap_or(&key);
        match key {
            "annual" => Ok(ReportType::Annual),
            "quarterly" => Ok(ReportType::Quarterly),
            "marketanalysis" => Ok(ReportType::MarketAnalysis),
            _ => Err(s.to_string()),
        }
    }
}

impl fmt::Display for ReportType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of financial indicators. Currency amounts are in billions.
#[derive(Debug, Clone, PartialEq)]
pub struct FinancialRecord {
    pub company: String,
    pub report_type: ReportType,
    pub report_date: NaiveDate,
    pub total_assets: f64,
    pub net_profit: f64,
    pub liquidity_ratio: f64,
    pub debt_ratio: f64,
    pub risk_assessment: String,
}

pub const FINANCIAL_HEADER: [&str; 8] = [
    "company",
    "report_type",
    "report_date",
    "total_assets",
    "net_profit",
    "liquidity_ratio",
    "debt_ratio",
    "risk_assessment",
];

/// Sanity bounds applied while loading financial records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordBounds {
    pub max_debt_ratio: f64,
}

impl Default for RecordBounds {
    fn default() -> Self {
        RecordBounds { max_debt_ratio: 1.5 }
    }
}

pub fn load_financial_records(path: impl AsRef<Path>) -> Result<Vec<FinancialRecord>, CorpusError> {
    read_financial_records(std::fs::File::open(path)?, RecordBounds::default())
}

pub fn read_financial_records<R: Read>(
    reader: R,
    bounds: RecordBounds,
) -> Result<Vec<FinancialRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CorpusError::MalformedRecord { line: 1, reason: e.to_string() })?;
    let got: Vec<&str> = header.iter().collect();
    if got != FINANCIAL_HEADER {
        return Err(CorpusError::MalformedRecord {
            line: 1,
            reason: format!("expected header {:?}, found {:?}", FINANCIAL_HEADER.join(","), got.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CorpusError::MalformedRecord { line, reason: e.to_string() })?;
        out.push(parse_financial_row(&rec, line, bounds)?);
    }
    Ok(out)
}

fn parse_financial_row(
    rec: &csv::StringRecord,
    line: usize,
    bounds: RecordBounds,
) -> Result<FinancialRecord, CorpusError> {
    let field = |i: usize| rec.get(i).unwrap_or("");
    let malformed = |reason: String| CorpusError::MalformedRecord { line, reason };
    let number = |i: usize, name: &str| -> Result<f64, CorpusError> {
        let raw = field(i);
        let trimmed = strip_unit(raw);
        let v: f64 = trimmed
            .parse()
            .map_err(|_| malformed(format!("{name}: cannot parse {raw:?} as a number")))?;
        if !v.is_finite() {
            return Err(malformed(format!("{name}: non-finite value")));
        }
        Ok(v)
    };

    let company = field(0).to_string();
    if company.is_empty() {
        return Err(malformed("company is empty".into()));
    }
    let report_type = field(1)
        .parse::<ReportType>()
        .map_err(|value| CorpusError::UnknownReportType { line, value })?;
    let report_date = NaiveDate::parse_from_str(field(2), "%Y-%m-%d")
        .map_err(|e| malformed(format!("report_date {:?}: {e}", field(2))))?;
    let total_assets = number(3, "total_assets")?;
    if total_assets <= 0.0 {
        return Err(CorpusError::NonPositiveAsset { line, company });
    }
    let net_profit = number(4, "net_profit")?;
    let liquidity_ratio = number(5, "liquidity_ratio")?;
    if liquidity_ratio <= 0.0 {
        return Err(CorpusError::OutOfRange { line, field: "liquidity_ratio", value: liquidity_ratio });
    }
    let debt_ratio = number(6, "debt_ratio")?;
    if !(0.0..=bounds.max_debt_ratio).contains(&debt_ratio) {
        return Err(CorpusError::OutOfRange { line, field: "debt_ratio", value: debt_ratio });
    }
    Ok(FinancialRecord {
        company,
        report_type,
        report_date,
        total_assets,
        net_profit,
        liquidity_ratio,
        debt_ratio,
        risk_assessment: field(7).to_string(),
    })
}

/// Accepts "500", "500 billion" or "500B".
fn strip_unit(raw: &str) -> &str {
    let s = raw.trim();
    let lower = s.to_ascii_lowercase();
    for unit in ["billion", "bn", "b"] {
        if lower.ends_with(unit) {
            return s[..s.len() - unit.len()].trim_end();
        }
    }
    s
}

pub fn write_financial_records<W: Write>(records: &[FinancialRecord], out: W) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CorpusError::Io(e.into());
    w.write_record(FINANCIAL_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.company.clone(),
            r.report_type.as_str().to_string(),
            r.report_date.format("%Y-%m-%d").to_string(),
            r.total_assets.to_string(),
            r.net_profit.to_string(),
            r.liquidity_ratio.to_string(),
            r.debt_ratio.to_string(),
            r.risk_assessment.clone(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_jsonl_record() {
        let src = r#"{"id":"a1","text":"rising market risk","label":"market_risk"}"#;
        let c = read_corpus(src.as_bytes(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.label_set(), ["market_risk".to_string()]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let src = "{\"id\":\"a1\",\"text\":\"x\"}\n{\"id\":\"a1\",\"text\":\"y\"}\n";
        match read_corpus(src.as_bytes(), CorpusFormat::Jsonl) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "a1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_text_and_malformed_lines() {
        let src = "{\"id\":\"a1\",\"text\":\"  \"}\n";
        assert!(matches!(read_corpus(src.as_bytes(), CorpusFormat::Jsonl), Err(CorpusError::EmptyText(_))));
        let src = "{\"id\":\"a1\",\"text\":\"ok\"}\n{not json\n";
        assert!(matches!(
            read_corpus(src.as_bytes(), CorpusFormat::Jsonl),
            Err(CorpusError::MalformedRecord { line: 2, .. })
        ));
    }

    #[test]
    fn csv_corpus_with_optional_fields() {
        let src = "id,text,label,company,date\nd1,credit risk up,credit,Company B,2023-06-30\nd2,calm,,,\n";
        let c = read_corpus(src.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(c.docs()[0].date, NaiveDate::from_ymd_opt(2023, 6, 30));
        assert_eq!(c.docs()[1].label, None);
        assert_eq!(c.label_set().len(), 1);
    }

    #[test]
    fn strict_dates() {
        let src = r#"{"id":"a","text":"t","date":"2023/03/31"}"#;
        assert!(read_corpus(src.as_bytes(), CorpusFormat::Jsonl).is_err());
    }

    #[test]
    fn validation_counts() {
        let docs = vec![
            Document::new("a", "x").with_label("p"),
            Document::new("b", "y"),
            Document::new("a", " "),
        ];
        let r = validate_documents(&docs);
        assert_eq!(r.n_docs, 3);
        assert_eq!(r.unlabeled, vec!["b".to_string(), "a".to_string()]);
        assert_eq!(r.empty_text, vec!["a".to_string()]);
        assert_eq!(r.duplicate_ids, vec!["a".to_string()]);
        assert_eq!(r.anomalies(), 2);
    }

    #[test]
    fn report_type_aliases() {
        assert_eq!("Annual Report".parse::<ReportType>(), Ok(ReportType::Annual));
        assert_eq!("annual".parse::<ReportType>(), Ok(ReportType::Annual));
        assert_eq!("QUARTERLY".parse::<ReportType>(), Ok(ReportType::Quarterly));
        assert_eq!("Market Analysis".parse::<ReportType>(), Ok(ReportType::MarketAnalysis));
        assert!("Monthly".parse::<ReportType>().is_err());
    }

    const HEADER: &str = "company,report_type,report_date,total_assets,net_profit,liquidity_ratio,debt_ratio,risk_assessment\n";

    #[test]
    fn financial_row_parsing() {
        let src = format!(
            "{HEADER}Company A,Annual Report,2023-03-31,500 billion,50,1.5,0.6,\"Rising market risk, attention needed on liquidity\"\n"
        );
        let recs = read_financial_records(src.as_bytes(), RecordBounds::default()).unwrap();
        let a = &recs[0];
        assert_eq!(a.report_type, ReportType::Annual);
        assert_eq!((a.total_assets, a.net_profit, a.liquidity_ratio, a.debt_ratio), (500.0, 50.0, 1.5, 0.6));
        assert_eq!(a.risk_assessment, "Rising market risk, attention needed on liquidity");
    }

    #[test]
    fn financial_row_errors() {
        let zero = format!("{HEADER}Company A,Annual,2023-03-31,0,50,1.5,0.6,x\n");
        assert!(matches!(
            read_financial_records(zero.as_bytes(), RecordBounds::default()),
            Err(CorpusError::NonPositiveAsset { line: 2, .. })
        ));
        let kind = format!("{HEADER}Company A,Monthly,2023-03-31,10,50,1.5,0.6,x\n");
        assert!(matches!(
            read_financial_records(kind.as_bytes(), RecordBounds::default()),
            Err(CorpusError::UnknownReportType { .. })
        ));
        let debt = format!("{HEADER}Company A,Annual,2023-03-31,10,50,1.5,2.0,x\n");
        assert!(read_financial_records(debt.as_bytes(), RecordBounds::default()).is_err());
        assert!(read_financial_records(debt.as_bytes(), RecordBounds { max_debt_ratio: 3.0 }).is_ok());
        let bad_header = "company,type\nA,Annual\n";
        assert!(matches!(
            read_financial_records(bad_header.as_bytes(), RecordBounds::default()),
            Err(CorpusError::MalformedRecord { line: 1, .. })
        ));
    }
}
