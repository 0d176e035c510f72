//! Model and finance outputs against direct hand computation.

use std::path::Path;

use riskminer_core::corpus::load_financial_records;
use riskminer_core::features::SparseVector;
use riskminer_core::finance::{
    format_percent, read_analysis_csv, screen, screen_table, trend_report, write_analysis_csv, AnalysisRow, ScreenConfig, DEBT_RULE,
    LIQUIDITY_RULE,
};
use riskminer_core::models::{predict_nb, train_nb, Labels};

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Every two-class corpus of up to four documents over a two-term vocabulary
/// with counts in 0..=2, and every label assignment that uses both classes.
#[test]
fn naive_bayes_matches_direct_bayes_rule() {
    let patterns: Vec<[u8; 2]> = (0..9).map(|c| [(c % 3) as u8, (c / 3) as u8]).collect();
    let mut checked = 0;
    for d in 2..=4usize {
        for code in 0..9usize.pow(d as u32) {
            let docs: Vec<[u8; 2]> = (0..d).map(|i| patterns[(code / 9usize.pow(i as u32)) % 9]).collect();
            for mask in 1..(1u32 << d) - 1 {
                let names: Vec<&str> = (0..d).map(|i| if mask >> i & 1 == 1 { "p" } else { "q" }).collect();
                let labels = Labels::new(&names);
                let rows: Vec<SparseVector> =
                    docs.iter().map(|x| SparseVector::from_pairs(vec![(0, x[0] as f64), (1, x[1] as f64)])).collect();
                for alpha in [0.5, 1.0] {
                    let model = train_nb(&rows, 2, &labels, alpha).unwrap();
                    for (q, row) in docs.iter().zip(&rows) {
                        let p = predict_nb(&model, row);
                        for (c, class) in ["p", "q"].iter().enumerate() {
                            let members: Vec<&[u8; 2]> = docs.iter().zip(&names).filter(|(_, n)| *n == class).map(|(x, _)| x).collect();
                            let counts = [members.iter().map(|x| x[0] as f64).sum::<f64>(), members.iter().map(|x| x[1] as f64).sum::<f64>()];
                            let total = counts[0] + counts[1];
                            let mut want = (members.len() as f64 / d as f64).ln();
                            for t in 0..2 {
                                want += q[t] as f64 * ((counts[t] + alpha) / (total + 2.0 * alpha)).ln();
                            }
                            assert!((p.scores[c] - want).abs() < 1e-12, "docs {docs:?} labels {names:?}");
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 10_000);
}

#[test]
fn trends_between_constructed_periods() {
    let previous = load_financial_records(data("table1_financials.csv")).unwrap();
    let current = load_financial_records(data("table1_next_period.csv")).unwrap();
    assert_eq!(previous.len(), 10);
    let trends = trend_report(&previous, &current).unwrap();
    let expected = [
        ("Company A", 10.0, 5.0),
        ("Company B", 5.0, 3.0),
        ("Company C", 15.0, 7.0),
    ];
    for (company, yoy, growth) in expected {
        let t = trends.iter().find(|t| t.company == company).unwrap();
        assert!((t.net_profit_yoy - yoy).abs() < 1e-9, "{company}");
        assert!((t.asset_growth - growth).abs() < 1e-9, "{company}");
    }
    let a = &trends[0];
    let round = |x: f64| (x * 100.0).round() / 100.0;
    assert_eq!(format_percent(Some(round(a.net_profit_yoy))), "+10%");
    assert_eq!(format_percent(Some(round(a.asset_growth))), "+5%");
    assert!(trend_report(&previous, &previous[..9]).is_err());
}

#[test]
fn screening_uses_inclusive_thresholds() {
    let records = load_financial_records(data("table1_financials.csv")).unwrap();
    let reports = screen(&records, &ScreenConfig::default()).unwrap();
    let flagged = |rule| reports.iter().filter(|r| r.triggered(rule)).map(|r| r.company.as_str()).collect::<Vec<_>>();
    assert_eq!(flagged(LIQUIDITY_RULE), ["Company A", "Company B", "Company D", "Company G", "Company H", "Company J"]);
    assert_eq!(flagged(DEBT_RULE), ["Company B", "Company H", "Company J"]);
    let strict = screen(&records, &ScreenConfig { liquidity_floor: 1.4, debt_ceiling: 0.75 }).unwrap();
    assert_eq!(strict.iter().filter(|r| r.triggered(LIQUIDITY_RULE)).count(), 3);
    assert!(strict.iter().all(|r| !r.triggered(DEBT_RULE)));
    assert!(screen_table(&reports).lines().count() > 10);
    assert!(screen(&records, &ScreenConfig { liquidity_floor: -1.0, ..ScreenConfig::default() }).is_err());
}

#[test]
fn analysis_csv_round_trip() {
    let rows = vec![
        AnalysisRow {
            company: "Company A".into(),
            risk_theme: "Rising market risk, attention needed on liquidity".into(),
            liquidity_ratio: 1.5,
            debt_ratio: 0.6,
            net_profit_yoy: Some(10.0),
            asset_growth: Some(5.0),
        },
        AnalysisRow {
            company: "Company K".into(),
            risk_theme: "no prior period".into(),
            liquidity_ratio: 2.0,
            debt_ratio: 0.3,
            net_profit_yoy: None,
            asset_growth: Some(-2.5),
        },
    ];
    let mut buf = Vec::new();
    write_analysis_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.contains("+10%") && text.contains("-2.5%"));
    assert_eq!(read_analysis_csv(buf.as_slice()).unwrap(), rows);
}
