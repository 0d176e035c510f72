use std::fmt;
use std::fmt::Write as _;

use super::EvalError;

/// Rows are true labels, columns are predicted labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn transpose(&self) -> ConfusionMatrix {
        let k = self.labels.len();
        ConfusionMatrix {
            labels: self.labels.clone(),
            counts: (0..k).map(|i| (0..k).map(|j| self.counts[j][i]).collect()).collect(),
        }
    }

    /// Tab-separated, with a header row of predicted labels.
    pub fn to_table(&self) -> String {
        let mut s = String::from("true\\predicted");
        for l in &self.labels {
            write!(s, "\t{l}").unwrap();
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            s.push_str(l);
            for c in row {
                write!(s, "\t{c}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion<S: AsRef<str>>(y_true: &[S], y_pred: &[S], label_order: &[S]) -> Result<ConfusionMatrix, EvalError> {
    let labels: Vec<String> = label_order.iter().map(|l| l.as_ref().to_string()).collect();
    let index = |l: &S| {
        labels.iter().position(|x| x == l.as_ref()).ok_or_else(|| EvalError::UnknownLabel(l.as_ref().to_string()))
    };
    let truth = y_true.iter().map(index).collect::<Result<Vec<_>, _>>()?;
    let pred = y_pred.iter().map(index).collect::<Result<Vec<_>, _>>()?;
    confusion_from_indices(&truth, &pred, labels)
}

pub fn confusion_from_indices(truth: &[usize], pred: &[usize], labels: Vec<String>) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch { left: truth.len(), right: pred.len() });
    }
    let k = labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        let bad = if t >= k { Some(t) } else if p >= k { Some(p) } else { None };
        if let Some(b) = bad {
            return Err(EvalError::UnknownLabel(format!("#{b}")));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { labels, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Labels never predicted; their precision is reported as 0.
    pub undefined_precision: Vec<String>,
    /// Labels with no true samples; their recall is reported as 0.
    pub undefined_recall: Vec<String>,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.labels.len();
    let mut report = MetricsReport {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: 0.0,
        macro_recall: 0.0,
        macro_f1: 0.0,
        per_class: Vec::with_capacity(k),
        undefined_precision: Vec::new(),
        undefined_recall: Vec::new(),
        total,
    };
    for i in 0..k {
        let tp = cm.counts[i][i];
        let col: u64 = (0..k).map(|r| cm.counts[r][i]).sum();
        let row: u64 = cm.counts[i].iter().sum();
        let precision = ratio(tp, col).unwrap_or_else(|| {
            report.undefined_precision.push(cm.labels[i].clone());
            0.0
        });
        let recall = ratio(tp, row).unwrap_or_else(|| {
            report.undefined_recall.push(cm.labels[i].clone());
            0.0
        });
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        report.per_class.push(ClassMetrics { label: cm.labels[i].clone(), precision, recall, f1, support: row });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| report.per_class.iter().map(f).sum::<f64>() / k as f64;
    report.macro_precision = mean(|c| c.precision);
    report.macro_recall = mean(|c| c.recall);
    report.macro_f1 = mean(|c| c.f1);
    Ok(report)
}

impl MetricsReport {
    /// Machine-readable `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "averaging=macro").unwrap();
        writeln!(s, "samples={}", self.total).unwrap();
        writeln!(s, "accuracy={}", self.accuracy).unwrap();
        writeln!(s, "macro_precision={}", self.macro_precision).unwrap();
        writeln!(s, "macro_recall={}", self.macro_recall).unwrap();
        writeln!(s, "macro_f1={}", self.macro_f1).unwrap();
        for c in &self.per_class {
            writeln!(s, "class.{}.precision={}", c.label, c.precision).unwrap();
            writeln!(s, "class.{}.recall={}", c.label, c.recall).unwrap();
            writeln!(s, "class.{}.f1={}", c.label, c.f1).unwrap();
            writeln!(s, "class.{}.support={}", c.label, c.support).unwrap();
        }
        writeln!(s, "undefined_precision={}", self.undefined_precision.join(",")).unwrap();
        writeln!(s, "undefined_recall={}", self.undefined_recall.join(",")).unwrap();
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.per_class.iter().map(|c| c.label.len()).max().unwrap_or(0).max(15);
        writeln!(f, "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}", "class", "precision", "recall", "f1", "support")?;
        for c in &self.per_class {
            writeln!(f, "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}", c.label, c.precision, c.recall, c.f1, c.support)?;
        }
        writeln!(
            f,
            "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
            "macro average", self.macro_precision, self.macro_recall, self.macro_f1, self.total
        )?;
        writeln!(f, "accuracy: {:.4}", self.accuracy)?;
        if !self.undefined_precision.is_empty() {
            writeln!(f, "note: never predicted, precision set to 0: {}", self.undefined_precision.join(", "))?;
        }
        if !self.undefined_recall.is_empty() {
            writeln!(f, "note: no true samples, recall set to 0: {}", self.undefined_recall.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for (x, y) in &self.points {
            writeln!(s, "{x},{y}").unwrap();
        }
        s
    }
}

/// Sweeps thresholds over distinct scores, highest first; tied scores move
/// the curve in one diagonal step. AUC is the trapezoidal area, which equals
/// the Mann-Whitney statistic with ties counted as one half.
pub fn roc(truths: &[bool], scores: &[f64]) -> Result<RocCurve, EvalError> {
    if truths.len() != scores.len() {
        return Err(EvalError::LengthMismatch { left: truths.len(), right: scores.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    let pos = truths.iter().filter(|&&t| t).count() as u64;
    let neg = truths.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of one positive-negative pair, kept integral
    let mut area2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if truths[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve { points, auc: area2 as f64 / (2 * pos * neg) as f64 })
}

/// One-vs-rest curves per class (`None` when a class is absent or universal)
/// and the mean AUC over the defined curves.
pub fn roc_one_vs_rest(truth: &[usize], scores: &[Vec<f64>], n_classes: usize) -> Result<(Vec<Option<RocCurve>>, f64), EvalError> {
    if truth.len() != scores.len() {
        return Err(EvalError::LengthMismatch { left: truth.len(), right: scores.len() });
    }
    let mut curves = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let t: Vec<bool> = truth.iter().map(|&y| y == c).collect();
        let s: Vec<f64> = scores.iter().map(|row| row.get(c).copied().unwrap_or(f64::NAN)).collect();
        match roc(&t, &s) {
            Ok(curve) => curves.push(Some(curve)),
            Err(EvalError::SingleClass) => curves.push(None),
            Err(e) => return Err(e),
        }
    }
    let defined: Vec<f64> = curves.iter().flatten().map(|c| c.auc).collect();
    if defined.is_empty() {
        return Err(EvalError::SingleClass);
    }
    let macro_auc = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok((curves, macro_auc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub r_squared: f64,
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = y_true.len() as f64;
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::ConstantTarget);
    }
    Ok(RegressionMetrics { mse: ss_res / n, r_squared: 1.0 - ss_res / ss_tot })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_counts() {
        let cm = confusion(&["A", "A", "B", "B"], &["A", "B", "B", "B"], &["A", "B"]).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 2]]);
        let empty: [&str; 0] = [];
        let cm = confusion(&empty, &empty, &["A", "B"]).unwrap();
        assert_eq!(cm.total(), 0);
        assert_eq!(metrics(&cm), Err(EvalError::EmptyMatrix));
        assert_eq!(confusion(&["A"], &["C"], &["A", "B"]), Err(EvalError::UnknownLabel("C".into())));
        assert!(matches!(confusion(&["A"], &[], &["A"]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn binary_hand_counts() {
        let cm = ConfusionMatrix { labels: vec!["neg".into(), "pos".into()], counts: vec![vec![8, 2], vec![2, 8]] };
        let m = metrics(&cm).unwrap();
        assert!((m.accuracy - 0.8).abs() < 1e-15);
        for c in &m.per_class {
            assert!((c.precision - 0.8).abs() < 1e-15 && (c.recall - 0.8).abs() < 1e-15 && (c.f1 - 0.8).abs() < 1e-15);
        }
        assert!((m.macro_f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn never_predicted_class_is_flagged() {
        let cm = ConfusionMatrix { labels: vec!["a".into(), "b".into()], counts: vec![vec![3, 0], vec![2, 0]] };
        let m = metrics(&cm).unwrap();
        assert_eq!(m.per_class[1].precision, 0.0);
        assert_eq!(m.undefined_precision, vec!["b".to_string()]);
        assert!(m.to_string().contains("precision set to 0: b"));
        assert!(m.to_kv().contains("undefined_precision=b\n"));
    }

    #[test]
    fn roc_examples() {
        let r = roc(&[false, false, true, true], &[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
        let tied = roc(&[false, true], &[0.5, 0.5]).unwrap();
        assert_eq!(tied.auc, 0.5);
        assert_eq!(tied.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc(&[true, true], &[0.1, 0.2]), Err(EvalError::SingleClass));
        assert_eq!(roc(&[true, false], &[f64::NAN, 0.2]), Err(EvalError::NonFiniteScore(0)));
        assert!(r.to_csv().starts_with("fpr,tpr\n0,0\n"));
    }

    #[test]
    fn one_vs_rest_skips_absent_classes() {
        let truth = [0, 1, 0, 1];
        let scores = vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.8, 0.0], vec![0.7, 0.3, 0.0], vec![0.4, 0.6, 0.0]];
        let (curves, auc) = roc_one_vs_rest(&truth, &scores, 3).unwrap();
        assert!(curves[2].is_none());
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn regression_examples() {
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
        assert!((m.mse - 4.0 / 3.0).abs() < 1e-15);
        assert!((m.r_squared + 1.0).abs() < 1e-15);
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(m.r_squared, 0.0);
        assert_eq!(regression_metrics(&[1.0, 1.0], &[1.0, 1.0]), Err(EvalError::ConstantTarget));
        assert_eq!(regression_metrics(&[], &[]), Err(EvalError::Empty));
    }
}
