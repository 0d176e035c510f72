//! Random forest of CART trees split on Gini impurity.
//!
//! Each tree sees a bootstrap sample and, at every node, a random subset of
//! features. Tree `i` draws from its own stream, so the forest is identical
//! whether trees are built sequentially or in parallel.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{check_rows, classes_line, parse_classes, prediction, Labels, ModelError, Prediction, MODEL_FORMAT, MODEL_SCHEMA_VERSION};
use crate::exec::Execution;
use crate::rng::{self, stream, Rng};
use crate::textfmt::{self, FormatError, Header, Meta};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(F))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, mtry: None, min_leaf: 1, max_depth: None, bootstrap: true, seed: 0 }
    }
}

impl ForestConfig {
    pub fn validate(&self, n_features: usize) -> Result<(), ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ModelError::InvalidConfig("min_leaf must be >= 1".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > n_features {
                return Err(ModelError::InvalidConfig(format!("mtry must lie in 1..={n_features}")));
            }
        }
        Ok(())
    }

    fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or_else(|| ((n_features as f64).sqrt().ceil() as usize).clamp(1, n_features.max(1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Samples with `x[feature] <= threshold` go to `left`.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Class histogram of the training samples that reached the leaf.
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Root is node 0.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the leaf reached by `x`, lowest index on ties.
    pub fn vote(&self, x: &[f64]) -> usize {
        let counts = self.leaf_for(x);
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub classes: Vec<String>,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

/// `1 - sum p_k^2`; zero for an empty histogram.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = f64::from(n);
    1.0 - counts.iter().map(|&c| (f64::from(c) / n).powi(2)).sum::<f64>()
}

pub fn train_forest(x: &[Vec<f64>], labels: &Labels, cfg: &ForestConfig, exec: Execution) -> Result<ForestModel, ModelError> {
    check_rows(x, labels)?;
    let n_features = x[0].len();
    if n_features == 0 {
        return Err(ModelError::InvalidConfig("rows have no features".into()));
    }
    if let Some(r) = x.iter().find(|r| r.len() != n_features) {
        return Err(ModelError::DimensionMismatch { expected: n_features, got: r.len() });
    }
    cfg.validate(n_features)?;
    let builder = Builder {
        x,
        y: labels.ids(),
        n_classes: labels.n_classes(),
        mtry: cfg.resolved_mtry(n_features),
        min_leaf: cfg.min_leaf,
        max_depth: cfg.max_depth.unwrap_or(usize::MAX),
    };
    let trees = exec.map(cfg.n_trees, |i| {
        let mut rng = rng::seeded(cfg.seed, stream::FOREST_TREE_BASE + i as u64);
        let n = x.len();
        let sample: Vec<usize> = if cfg.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
        builder.build(sample, &mut rng)
    });
    Ok(ForestModel { classes: labels.classes().to_vec(), n_features, trees })
}

/// Majority vote. Each tree votes for its leaf's majority class and the
/// scores are vote fractions; ties go to the lower class index.
pub fn predict_forest(model: &ForestModel, x: &[f64]) -> Result<Prediction, ModelError> {
    if x.len() != model.n_features {
        return Err(ModelError::DimensionMismatch { expected: model.n_features, got: x.len() });
    }
    let mut votes = vec![0usize; model.classes.len()];
    for tree in &model.trees {
        votes[tree.vote(x)] += 1;
    }
    let t = model.trees.len() as f64;
    Ok(prediction(&model.classes, votes.iter().map(|&v| v as f64 / t).collect()))
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: usize,
}

struct SplitChoice {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn build(&self, sample: Vec<usize>, rng: &mut Rng) -> Tree {
        let mut nodes = Vec::new();
        self.grow(sample, 0, rng, &mut nodes);
        Tree { nodes }
    }

    fn histogram(&self, sample: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &i in sample {
            counts[self.y[i]] += 1;
        }
        counts
    }

    fn grow(&self, sample: Vec<usize>, depth: usize, rng: &mut Rng, nodes: &mut Vec<TreeNode>) -> usize {
        let id = nodes.len();
        let counts = self.histogram(&sample);
        let parent = gini(&counts);
        nodes.push(TreeNode::Leaf { counts });
        if parent == 0.0 || depth >= self.max_depth || sample.len() < 2 * self.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(&sample, rng) else { return id };
        if best.impurity >= parent {
            return id;
        }
        let (left, right): (Vec<usize>, Vec<usize>) =
            sample.iter().partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let l = self.grow(left, depth + 1, rng, nodes);
        let r = self.grow(right, depth + 1, rng, nodes);
        nodes[id] = TreeNode::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        id
    }

    /// Walks a random feature permutation until `mtry` non-constant features
    /// have been scored. Ties go to the lower feature, then the lower threshold.
    fn best_split(&self, sample: &[usize], rng: &mut Rng) -> Option<SplitChoice> {
        let n_features = self.x[0].len();
        let mut features: Vec<usize> = (0..n_features).collect();
        features.shuffle(rng);
        let mut best: Option<SplitChoice> = None;
        let mut tried = 0;
        let mut values: Vec<(f64, usize)> = Vec::with_capacity(sample.len());
        for f in features {
            if tried == self.mtry {
                break;
            }
            values.clear();
            values.extend(sample.iter().map(|&i| (self.x[i][f], self.y[i])));
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            if values[0].0 == values[values.len() - 1].0 {
                continue;
            }
            tried += 1;
            if let Some(c) = self.best_threshold(f, &values) {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        c.impurity < b.impurity
                            || (c.impurity == b.impurity
                                && (c.feature < b.feature || (c.feature == b.feature && c.threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_threshold(&self, feature: usize, values: &[(f64, usize)]) -> Option<SplitChoice> {
        let n = values.len();
        let mut left = vec![0u32; self.n_classes];
        let mut right = vec![0u32; self.n_classes];
        for &(_, y) in values {
            right[y] += 1;
        }
        let mut best: Option<SplitChoice> = None;
        for i in 0..n - 1 {
            let (v, y) = values[i];
            left[y] += 1;
            right[y] -= 1;
            let next = values[i + 1].0;
            let n_left = i + 1;
            if v == next || n_left < self.min_leaf || n - n_left < self.min_leaf {
                continue;
            }
            let impurity = (n_left as f64 * gini(&left) + (n - n_left) as f64 * gini(&right)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mid = 0.5 * (v + next);
                let threshold = if mid < next { mid } else { v };
                best = Some(SplitChoice { impurity, feature, threshold });
            }
        }
        best
    }
}

impl ForestModel {
    pub fn to_text(&self, meta: &Meta) -> String {
        let mut s = Header::new(MODEL_FORMAT, MODEL_SCHEMA_VERSION)
            .field("kind", "forest")
            .field("classes", self.classes.len())
            .field("features", self.n_features)
            .field("trees", self.trees.len())
            .with_meta(meta)
            .render();
        s.push_str(&classes_line(&self.classes));
        for tree in &self.trees {
            writeln!(s, "tree {}", tree.nodes.len()).unwrap();
            for node in &tree.nodes {
                match node {
                    TreeNode::Split { feature, threshold, left, right } => {
                        writeln!(s, "split {feature} {threshold} {left} {right}").unwrap();
                    }
                    TreeNode::Leaf { counts } => {
                        let c: Vec<String> = counts.iter().map(u32::to_string).collect();
                        writeln!(s, "leaf {}", c.join(" ")).unwrap();
                    }
                }
            }
        }
        s
    }

    pub(super) fn from_doc(mut doc: textfmt::Document<'_>) -> Result<Self, ModelError> {
        let n_features: usize = doc.header.require("features")?;
        let n_trees: usize = doc.header.require("trees")?;
        let classes = parse_classes(&mut doc)?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (line, parts) = doc.expect("tree")?;
            let n_nodes: usize = textfmt::parse_num(parts.first().copied().unwrap_or(""), line)?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let (line, text) = doc.next_line()?;
                let parts: Vec<&str> = text.split_whitespace().collect();
                let bad = |reason: &str| ModelError::Format(FormatError::Malformed { line, reason: reason.into() });
                let node = match parts.first().copied() {
                    Some("split") if parts.len() == 5 => {
                        let feature: usize = textfmt::parse_num(parts[1], line)?;
                        let left: usize = textfmt::parse_num(parts[3], line)?;
                        let right: usize = textfmt::parse_num(parts[4], line)?;
                        if feature >= n_features || left >= n_nodes || right >= n_nodes {
                            return Err(bad("split index out of range"));
                        }
                        TreeNode::Split { feature, threshold: textfmt::parse_num(parts[2], line)?, left, right }
                    }
                    Some("leaf") if parts.len() == classes.len() + 1 => TreeNode::Leaf {
                        counts: parts[1..].iter().map(|p| textfmt::parse_num(p, line)).collect::<Result<_, _>>()?,
                    },
                    _ => return Err(bad("expected split or leaf node")),
                };
                nodes.push(node);
            }
            trees.push(Tree { nodes });
        }
        Ok(ForestModel { classes, n_features, trees })
    }
}
