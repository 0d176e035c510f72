//! Financial ratios, year-over-year trends and threshold screening.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use thiserror::Error;

use crate::corpus::FinancialRecord;

#[derive(Debug, Error)]
pub enum FinanceError {
    #[error("{name} must be > 0, got {value}")]
    NonPositiveDenominator { name: &'static str, value: f64 },
    #[error("previous-period value must be > 0, got {0}")]
    NonPositiveBase(f64),
    #[error("company {0:?} has no matching record in the other period")]
    UnmatchedCompany(String),
    #[error("company {0:?} appears more than once in one period")]
    DuplicateCompany(String),
    #[error("invalid screen config: {0}")]
    InvalidConfig(String),
    #[error("malformed trend table at row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Current assets / current liabilities.
pub fn liquidity_ratio(current_assets: f64, current_liabilities: f64) -> Result<f64, FinanceError> {
    if !(current_liabilities > 0.0) {
        return Err(FinanceError::NonPositiveDenominator { name: "current liabilities", value: current_liabilities });
    }
    Ok(current_assets / current_liabilities)
}

/// Total liabilities / total assets.
pub fn debt_ratio(total_liabilities: f64, total_assets: f64) -> Result<f64, FinanceError> {
    if !(total_assets > 0.0) {
        return Err(FinanceError::NonPositiveDenominator { name: "total assets", value: total_assets });
    }
    Ok(total_liabilities / total_assets)
}

/// Percent change `100 (current - previous) / previous`.
pub fn yoy_change(current: f64, previous: f64) -> Result<f64, FinanceError> {
    if !(previous > 0.0) {
        return Err(FinanceError::NonPositiveBase(previous));
    }
    Ok(100.0 * (current - previous) / previous)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenConfig {
    /// Liquidity flag fires when the ratio is at or below this.
    pub liquidity_floor: f64,
    /// Debt flag fires when the ratio is at or above this.
    pub debt_ceiling: f64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig { liquidity_floor: 1.5, debt_ceiling: 0.7 }
    }
}

impl ScreenConfig {
    /// Zero thresholds are accepted (they switch a rule fully off or on).
    pub fn validate(&self) -> Result<(), FinanceError> {
        for (name, v) in [("liquidity_floor", self.liquidity_floor), ("debt_ceiling", self.debt_ceiling)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FinanceError::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

pub const LIQUIDITY_RULE: &str = "liquidity_floor";
pub const DEBT_RULE: &str = "debt_ceiling";

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenFlag {
    pub rule: &'static str,
    pub triggered: bool,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub company: String,
    pub liquidity_ratio: f64,
    pub debt_ratio: f64,
    pub flags: Vec<ScreenFlag>,
}

impl RatioReport {
    pub fn triggered(&self, rule: &str) -> bool {
        self.flags.iter().any(|f| f.rule == rule && f.triggered)
    }
}

/// One report per record, sorted by company (stable for equal names).
pub fn screen(records: &[FinancialRecord], cfg: &ScreenConfig) -> Result<Vec<RatioReport>, FinanceError> {
    cfg.validate()?;
    let mut reports: Vec<RatioReport> = records
        .iter()
        .map(|r| RatioReport {
            company: r.company.clone(),
            liquidity_ratio: r.liquidity_ratio,
            debt_ratio: r.debt_ratio,
            flags: vec![
                ScreenFlag { rule: LIQUIDITY_RULE, triggered: r.liquidity_ratio <= cfg.liquidity_floor, threshold: cfg.liquidity_floor },
                ScreenFlag { rule: DEBT_RULE, triggered: r.debt_ratio >= cfg.debt_ceiling, threshold: cfg.debt_ceiling },
            ],
        })
        .collect();
    reports.sort_by(|a, b| a.company.cmp(&b.company));
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub company: String,
    /// Percent.
    pub net_profit_yoy: f64,
    /// Percent.
    pub asset_growth: f64,
}

fn by_company(records: &[FinancialRecord]) -> Result<BTreeMap<&str, &FinancialRecord>, FinanceError> {
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert(r.company.as_str(), r).is_some() {
            return Err(FinanceError::DuplicateCompany(r.company.clone()));
        }
    }
    Ok(map)
}

/// Pairs each current-period record with the same company's previous-period
/// record; output is sorted by company.
pub fn trend_report(previous: &[FinancialRecord], current: &[FinancialRecord]) -> Result<Vec<TrendReport>, FinanceError> {
    let prev = by_company(previous)?;
    let cur = by_company(current)?;
    if let Some(extra) = prev.keys().find(|c| !cur.contains_key(*c)) {
        return Err(FinanceError::UnmatchedCompany(extra.to_string()));
    }
    cur.iter()
        .map(|(company, c)| {
            let p = prev.get(company).ok_or_else(|| FinanceError::UnmatchedCompany(company.to_string()))?;
            Ok(TrendReport {
                company: company.to_string(),
                net_profit_yoy: yoy_change(c.net_profit, p.net_profit)?,
                asset_growth: yoy_change(c.total_assets, p.total_assets)?,
            })
        })
        .collect()
}

/// A row of the combined analysis table.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub company: String,
    pub risk_theme: String,
    pub liquidity_ratio: f64,
    pub debt_ratio: f64,
    pub net_profit_yoy: Option<f64>,
    pub asset_growth: Option<f64>,
}

pub const ANALYSIS_HEADER: [&str; 6] =
    ["Company", "Main Risk Theme", "Liquidity Ratio", "Debt Ratio", "Net Profit Change (YoY)", "Asset Growth Rate"];

/// Signed percent, e.g. `+10%`; empty when absent.
pub fn format_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:+}%"),
        None => String::new(),
    }
}

fn parse_percent(s: &str, row: usize) -> Result<Option<f64>, FinanceError> {
    let t = s.trim();
    if t.is_empty() {
        return Ok(None);
    }
    t.trim_end_matches('%')
        .trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| FinanceError::Malformed { row, reason: format!("bad percentage {s:?}") })
}

pub fn write_analysis_csv<W: Write>(rows: &[AnalysisRow], out: W) -> Result<(), FinanceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ANALYSIS_HEADER)?;
    for r in rows {
        w.write_record([
            r.company.clone(),
            r.risk_theme.clone(),
            r.liquidity_ratio.to_string(),
            r.debt_ratio.to_string(),
            format_percent(r.net_profit_yoy),
            format_percent(r.asset_growth),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a table with [`ANALYSIS_HEADER`] columns; percentages may carry a
/// sign and a `%` suffix.
pub fn read_analysis_csv<R: Read>(input: R) -> Result<Vec<AnalysisRow>, FinanceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ANALYSIS_HEADER {
        return Err(FinanceError::Malformed { row: 1, reason: format!("expected header {ANALYSIS_HEADER:?}") });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let num = |j: usize| {
            rec[j].parse::<f64>().map_err(|_| FinanceError::Malformed { row, reason: format!("bad number {:?}", &rec[j]) })
        };
        rows.push(AnalysisRow {
            company: rec[0].to_string(),
            risk_theme: rec[1].to_string(),
            liquidity_ratio: num(2)?,
            debt_ratio: num(3)?,
            net_profit_yoy: parse_percent(&rec[4], row)?,
            asset_growth: parse_percent(&rec[5], row)?,
        });
    }
    Ok(rows)
}

pub fn screen_table(reports: &[RatioReport]) -> String {
    let width = reports.iter().map(|r| r.company.len()).max().unwrap_or(0).max(7);
    let mut s = format!("{:<width$}  {:>9}  {:>5}  {:>9}  {:>9}\n", "company", "liquidity", "debt", "liq_flag", "debt_flag");
    for r in reports {
        let mark = |rule| if r.triggered(rule) { "FLAG" } else { "-" };
        writeln!(
            s,
            "{:<width$}  {:>9}  {:>5}  {:>9}  {:>9}",
            r.company,
            r.liquidity_ratio,
            r.debt_ratio,
            mark(LIQUIDITY_RULE),
            mark(DEBT_RULE)
        )
        .unwrap();
    }
    if let Some(r) = reports.first() {
        let t: Vec<String> = r.flags.iter().map(|f| format!("{}={}", f.rule, f.threshold)).collect();
        writeln!(s, "thresholds: {} (liquidity <= floor, debt >= ceiling)", t.join(", ")).unwrap();
    }
    s
}

pub fn write_screen_csv<W: Write>(reports: &[RatioReport], out: W) -> Result<(), FinanceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["company", "liquidity_ratio", "debt_ratio", "liquidity_flag", "liquidity_floor", "debt_flag", "debt_ceiling"])?;
    for r in reports {
        let mut row = vec![r.company.clone(), r.liquidity_ratio.to_string(), r.debt_ratio.to_string()];
        for f in &r.flags {
            row.push(f.triggered.to_string());
            row.push(f.threshold.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ReportType;
    use chrono::NaiveDate;

    fn record(company: &str, assets: f64, profit: f64, liq: f64, debt: f64) -> FinancialRecord {
        FinancialRecord {
            company: company.into(),
            report_type: ReportType::Annual,
            report_date: NaiveDate::from_ymd_opt(2023, 3, 31).unwrap(),
            total_assets: assets,
            net_profit: profit,
            liquidity_ratio: liq,
            debt_ratio: debt,
            risk_assessment: String::new(),
        }
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(liquidity_ratio(150.0, 100.0).unwrap(), 1.5);
        assert_eq!(liquidity_ratio(7.0, 7.0).unwrap(), 1.0);
        assert!(liquidity_ratio(1.0, 0.0).is_err());
        assert_eq!(debt_ratio(300.0, 500.0).unwrap(), 0.6);
        assert_eq!(debt_ratio(0.0, 9.0).unwrap(), 0.0);
        assert!(debt_ratio(1.0, 0.0).is_err());
    }

    #[test]
    fn yoy_examples() {
        assert_eq!(yoy_change(55.0, 50.0).unwrap(), 10.0);
        assert_eq!(yoy_change(3.0, 3.0).unwrap(), 0.0);
        assert!(matches!(yoy_change(1.0, 0.0), Err(FinanceError::NonPositiveBase(_))));
    }

    #[test]
    fn screen_boundaries_and_order() {
        let recs = [record("Z", 1.0, 1.0, 1.5, 0.7), record("A", 1.0, 1.0, 1.6, 0.69)];
        let out = screen(&recs, &ScreenConfig::default()).unwrap();
        assert_eq!(out[0].company, "A");
        assert!(!out[0].triggered(LIQUIDITY_RULE) && !out[0].triggered(DEBT_RULE));
        assert!(out[1].triggered(LIQUIDITY_RULE) && out[1].triggered(DEBT_RULE));
        let off = screen(&recs, &ScreenConfig { liquidity_floor: 0.0, debt_ceiling: 0.0 }).unwrap();
        assert!(off.iter().all(|r| !r.triggered(LIQUIDITY_RULE) && r.triggered(DEBT_RULE)));
        assert!(screen(&recs, &ScreenConfig { liquidity_floor: f64::NAN, debt_ceiling: 0.7 }).is_err());
        assert!(screen_table(&out).contains("FLAG"));
    }

    #[test]
    fn trend_pairs() {
        let prev = [record("A", 500.0, 50.0, 1.5, 0.6)];
        let cur = [record("A", 525.0, 55.0, 1.5, 0.6)];
        let t = trend_report(&prev, &cur).unwrap();
        assert_eq!((t[0].net_profit_yoy, t[0].asset_growth), (10.0, 5.0));
        assert_eq!(trend_report(&prev, &prev).unwrap()[0].net_profit_yoy, 0.0);
        assert!(matches!(trend_report(&[], &cur), Err(FinanceError::UnmatchedCompany(c)) if c == "A"));
        assert!(matches!(trend_report(&[prev[0].clone(), prev[0].clone()], &cur), Err(FinanceError::DuplicateCompany(_))));
    }

    #[test]
    fn analysis_csv_round_trip() {
        let rows = vec![AnalysisRow {
            company: "Company A".into(),
            risk_theme: "Market Risk".into(),
            liquidity_ratio: 1.5,
            debt_ratio: 0.6,
            net_profit_yoy: Some(10.0),
            asset_growth: Some(-2.5),
        }];
        let mut buf = Vec::new();
        write_analysis_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Company A,Market Risk,1.5,0.6,+10%,-2.5%"));
        assert_eq!(read_analysis_csv(text.as_bytes()).unwrap(), rows);
    }
}
