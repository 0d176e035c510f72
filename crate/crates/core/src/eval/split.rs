use std::fmt::Write as _;

use rand::seq::SliceRandom;

use super::EvalError;
use crate::rng::{self, stream};
use crate::textfmt::{self, FormatError, Header, Meta};

pub const SPLIT_FORMAT: &str = "riskminer-split";
pub const SPLIT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.70, val: 0.15, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), EvalError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(EvalError::BadRatios(format!("{parts:?} has a non-positive entry")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::BadRatios(format!("{parts:?} sums to {sum}")));
        }
        Ok(())
    }
}

/// Train / validation / test index lists, pairwise disjoint and covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder apportionment of `n` units by `weights` (which sum to 1).
/// Leftover units go to the largest fractional parts, earlier entries first on ties.
pub fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Seeded shuffle, then a contiguous cut. With `stratify`, each label's
/// indices (in shuffled order) are cut by its own apportionment.
pub fn split(n: usize, ratios: SplitRatios, seed: u64, stratify: Option<&[usize]>) -> Result<DataSplit, EvalError> {
    ratios.validate()?;
    if n < 3 {
        return Err(EvalError::TooFewSamples { needed: 3, got: n });
    }
    let weights = [ratios.train, ratios.val, ratios.test];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed, stream::SPLIT));
    let mut out = DataSplit::default();
    match stratify {
        None => {
            let sizes = apportion(n, &weights);
            out.train = order[..sizes[0]].to_vec();
            out.val = order[sizes[0]..sizes[0] + sizes[1]].to_vec();
            out.test = order[sizes[0] + sizes[1]..].to_vec();
        }
        Some(labels) => {
            if labels.len() != n {
                return Err(EvalError::LengthMismatch { left: n, right: labels.len() });
            }
            let n_labels = labels.iter().max().map_or(0, |m| m + 1);
            let mut per_label = vec![0usize; n_labels];
            labels.iter().for_each(|&l| per_label[l] += 1);
            let quotas: Vec<Vec<usize>> = per_label.iter().map(|&c| apportion(c, &weights)).collect();
            let mut seen = vec![0usize; n_labels];
            for i in order {
                let l = labels[i];
                let k = seen[l];
                seen[l] += 1;
                let q = &quotas[l];
                let part = if k < q[0] {
                    &mut out.train
                } else if k < q[0] + q[1] {
                    &mut out.val
                } else {
                    &mut out.test
                };
                part.push(i);
            }
        }
    }
    Ok(out)
}

/// One cross-validation round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn check_k(n: usize, k: usize) -> Result<(), EvalError> {
    if k < 2 || k > n {
        return Err(EvalError::BadK { k, n });
    }
    Ok(())
}

/// `k` disjoint folds covering `0..n`; the first `n % k` folds hold one extra index.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed, stream::KFOLD));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Like [`kfold`], but deals each label's samples round-robin across folds.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    let n = labels.len();
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed, stream::KFOLD));
    order.sort_by_key(|&i| labels[i]);
    let mut folds = vec![Vec::new(); k];
    for (j, i) in order.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    Ok(folds)
}

/// Each fold becomes the test set once; the rest form the training set.
pub fn folds_to_pairs(folds: &[Vec<usize>]) -> Vec<Fold> {
    (0..folds.len())
        .map(|f| Fold {
            train: folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, idx)| idx.iter().copied()).collect(),
            test: folds[f].clone(),
        })
        .collect()
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_text(&self, meta: &Meta) -> String {
        let mut s = Header::new(SPLIT_FORMAT, SPLIT_SCHEMA_VERSION)
            .field("train", self.train.len())
            .field("val", self.val.len())
            .field("test", self.test.len())
            .with_meta(meta)
            .render();
        for (name, idx) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            s.push_str(name);
            for i in idx {
                write!(s, " {i}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<(Self, Meta), EvalError> {
        let mut doc = textfmt::Document::parse(text, SPLIT_FORMAT, SPLIT_SCHEMA_VERSION)?;
        let mut read = |name: &str| -> Result<Vec<usize>, EvalError> {
            let expected: usize = doc.header.require(name)?;
            let (line, parts) = doc.expect(name)?;
            let idx = parts.iter().map(|p| textfmt::parse_num(p, line)).collect::<Result<Vec<usize>, _>>()?;
            if idx.len() != expected {
                return Err(FormatError::Malformed { line, reason: format!("{name}: expected {expected} indices") }.into());
            }
            Ok(idx)
        };
        let split = DataSplit { train: read("train")?, val: read("val")?, test: read("test")? };
        let mut all: Vec<usize> = split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
        all.sort_unstable();
        if all.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(FormatError::Malformed { line: 1, reason: "split is not a partition of 0..n".into() }.into());
        }
        Ok((split, doc.header.meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn sizes_follow_largest_remainder() {
        let s = split(10, SplitRatios { train: 0.6, val: 0.2, test: 0.2 }, 1, None).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
        assert_eq!(apportion(3, &[0.7, 0.15, 0.15]), vec![2, 1, 0]);
        assert_eq!(apportion(7, &[0.5, 0.5]), vec![4, 3]);
    }

    #[test]
    fn stratified_hand_trace() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let s = split(10, SplitRatios { train: 0.6, val: 0.2, test: 0.2 }, 9, Some(&labels)).unwrap();
        let count = |idx: &[usize], l| idx.iter().filter(|&&i| labels[i] == l).count();
        assert_eq!((count(&s.train, 0), count(&s.train, 1)), (3, 3));
        assert_eq!(sorted([s.train, s.val, s.test].concat()), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_errors_and_determinism() {
        assert!(matches!(split(2, SplitRatios::default(), 0, None), Err(EvalError::TooFewSamples { .. })));
        let bad = SplitRatios { train: 0.5, val: 0.5, test: 0.0 };
        assert!(matches!(split(10, bad, 0, None), Err(EvalError::BadRatios(_))));
        assert_eq!(split(50, SplitRatios::default(), 4, None), split(50, SplitRatios::default(), 4, None));
        assert_ne!(split(50, SplitRatios::default(), 4, None), split(50, SplitRatios::default(), 5, None));
    }

    #[test]
    fn kfold_sizes() {
        let folds = kfold(10, 3, 0).unwrap();
        assert_eq!(folds.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 3]);
        assert_eq!(sorted(folds.concat()), (0..10).collect::<Vec<_>>());
        assert!(kfold(10, 5, 0).unwrap().iter().all(|f| f.len() == 2));
        assert_eq!(kfold(3, 4, 0), Err(EvalError::BadK { k: 4, n: 3 }));
        assert_eq!(kfold(3, 1, 0), Err(EvalError::BadK { k: 1, n: 3 }));
    }

    #[test]
    fn stratified_folds_balance_labels() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let folds = stratified_kfold(&labels, 5, 2).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 6);
            assert!((0..3).all(|l| f.iter().filter(|&&i| labels[i] == l).count() == 2));
        }
        let pairs = folds_to_pairs(&folds);
        assert!(pairs.iter().all(|p| p.train.len() == 24 && p.test.iter().all(|i| !p.train.contains(i))));
    }

    #[test]
    fn text_round_trip() {
        let s = split(20, SplitRatios::default(), 3, None).unwrap();
        let meta = vec![("seed".to_string(), "3".to_string())];
        let (back, m) = DataSplit::from_text(&s.to_text(&meta)).unwrap();
        assert_eq!((back, m), (s, meta));
        let broken = "riskminer-split schema_version=1 train=1 val=1 test=1\ntrain 0\nval 0\ntest 2\n";
        assert!(DataSplit::from_text(broken).is_err());
    }
}
