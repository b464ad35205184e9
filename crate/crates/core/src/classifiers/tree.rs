use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier};
use crate::preprocessing::FeatureMatrix;
use crate::{Error, Label, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: Label,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary CART tree stored as an arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: TreeParams,
    n_features: usize,
    nodes: Vec<Node>,
}

impl TreeModel {
    /// A tree that always predicts `label`.
    pub fn constant(label: Label, n_features: usize) -> Self {
        TreeModel {
            params: TreeParams::default(),
            n_features,
            nodes: vec![Node::Leaf { label }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks arena links after deserialization.
    pub(crate) fn check(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::ModelFormat("tree has no nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = *node
            {
                if feature >= self.n_features
                    || !threshold.is_finite()
                    || left <= i
                    || right <= i
                    || left >= n
                    || right >= n
                {
                    return Err(Error::ModelFormat(format!("tree node {i} is malformed")));
                }
            }
        }
        Ok(())
    }
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> Label {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { label } => return label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }
}

/// Candidate split. `score` is Σ_left c²/n_left + Σ_right c²/n_right kept
/// as an exact fraction; a larger score means lower weighted Gini.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    feature: usize,
    threshold: f64,
    num: u128,
    den: u128,
}

impl Candidate {
    fn new(
        feature: usize,
        threshold: f64,
        sq_left: u64,
        n_left: u64,
        sq_right: u64,
        n_right: u64,
    ) -> Self {
        Candidate {
            feature,
            threshold,
            num: u128::from(sq_left) * u128::from(n_right)
                + u128::from(sq_right) * u128::from(n_left),
            den: u128::from(n_left) * u128::from(n_right),
        }
    }

    fn cmp_score(&self, other: &Candidate) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    /// Better score first, then lower feature, then smaller threshold.
    fn beats(&self, other: &Candidate) -> bool {
        match self.cmp_score(other) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                (self.feature, self.threshold).partial_cmp(&(other.feature, other.threshold))
                    == Some(Ordering::Less)
            }
        }
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m >= lo && m < hi {
        m
    } else {
        lo
    }
}

/// Internal fitting state shared by the plain tree and forest members.
pub(crate) struct Builder<'a> {
    x: &'a FeatureMatrix,
    /// Dense class index per row.
    y: Vec<usize>,
    classes: Vec<Label>,
    params: TreeParams,
    max_features: Option<usize>,
}

impl<'a> Builder<'a> {
    pub(crate) fn new(
        x: &'a FeatureMatrix,
        y: &[Label],
        params: TreeParams,
        max_features: Option<usize>,
    ) -> Result<Self> {
        check_training_set(x, y)?;
        if params.min_samples_split < 2 {
            return Err(Error::InvalidParam(
                "min_samples_split must be at least 2".into(),
            ));
        }
        let mut classes = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let y = y
            .iter()
            .map(|l| classes.binary_search(l).expect("label present"))
            .collect();
        Ok(Builder {
            x,
            y,
            classes,
            params,
            max_features,
        })
    }

    /// Grows a tree on `sample` (row indices, duplicates allowed).
    pub(crate) fn grow(&self, sample: Vec<usize>, mut rng: Option<&mut ChaCha8Rng>) -> TreeModel {
        let mut nodes = vec![Node::Leaf { label: 0 }];
        let mut stack = vec![(0usize, sample, 0usize)];
        while let Some((id, rows, depth)) = stack.pop() {
            let counts = self.class_counts(&rows);
            let label = self.classes[majority_index(&counts)];
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
            if pure || depth_capped || rows.len() < self.params.min_samples_split {
                nodes[id] = Node::Leaf { label };
                continue;
            }
            let Some(best) = self.best_split(&rows, &counts, rng.as_deref_mut()) else {
                nodes[id] = Node::Leaf { label };
                continue;
            };
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { label });
            nodes.push(Node::Leaf { label });
            nodes[id] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right,
            };
            // Right first so the left subtree is expanded first.
            stack.push((right, right_rows, depth + 1));
            stack.push((left, left_rows, depth + 1));
        }
        TreeModel {
            params: self.params,
            n_features: self.x.n_features(),
            nodes,
        }
    }

    fn class_counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.classes.len()];
        for &i in rows {
            counts[self.y[i]] += 1;
        }
        counts
    }

    fn best_split(
        &self,
        rows: &[usize],
        counts: &[u64],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Option<Candidate> {
        let d = self.x.n_features();
        let mut order: Vec<usize> = (0..d).collect();
        let budget = match (self.max_features, rng) {
            (Some(k), Some(rng)) => {
                order.shuffle(rng);
                k
            }
            _ => d,
        };

        let mut best: Option<Candidate> = None;
        let mut visited = 0;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for feature in order {
            if visited >= budget {
                break;
            }
            pairs.clear();
            pairs.extend(rows.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                // Constant features do not count towards the budget.
                continue;
            }
            visited += 1;
            if let Some(c) = best_threshold(feature, &pairs, counts) {
                if best.is_none_or(|b| c.beats(&b)) {
                    best = Some(c);
                }
            }
        }

        // Only accept splits that strictly lower the impurity:
        // score > Σc²/n.
        let n = rows.len() as u64;
        let sq: u64 = counts.iter().map(|c| c * c).sum();
        let parent = Candidate {
            feature: usize::MAX,
            threshold: f64::NAN,
            num: u128::from(sq),
            den: u128::from(n),
        };
        best.filter(|b| b.cmp_score(&parent) == Ordering::Greater)
    }
}

fn majority_index(counts: &[u64]) -> usize {
    let mut best = 0;
    for (c, &k) in counts.iter().enumerate() {
        if k > counts[best] {
            best = c;
        }
    }
    best
}

/// Sweeps the midpoints between consecutive distinct sorted values.
fn best_threshold(feature: usize, pairs: &[(f64, usize)], counts: &[u64]) -> Option<Candidate> {
    let n = pairs.len() as u64;
    let mut left = vec![0u64; counts.len()];
    let mut right = counts.to_vec();
    let mut sq_left = 0u64;
    let mut sq_right: u64 = counts.iter().map(|c| c * c).sum();
    let mut best: Option<Candidate> = None;
    for (pos, window) in pairs.windows(2).enumerate() {
        let class = window[0].1;
        sq_left += 2 * left[class] + 1;
        left[class] += 1;
        sq_right -= 2 * right[class] - 1;
        right[class] -= 1;
        let (lo, hi) = (window[0].0, window[1].0);
        if lo == hi {
            continue;
        }
        let n_left = pos as u64 + 1;
        let c = Candidate::new(
            feature,
            midpoint(lo, hi),
            sq_left,
            n_left,
            sq_right,
            n - n_left,
        );
        if best.is_none_or(|b| c.beats(&b)) {
            best = Some(c);
        }
    }
    best
}

pub fn fit_decision_tree(x: &FeatureMatrix, y: &[Label], params: TreeParams) -> Result<TreeModel> {
    let builder = Builder::new(x, y, params, None)?;
    Ok(builder.grow((0..y.len()).collect(), None))
}

pub fn predict_tree(m: &TreeModel, x: &FeatureMatrix) -> Result<Vec<Label>> {
    m.predict(x)
}

/// Gini impurity of a label multiset: 1 - Σ p².
pub fn gini(labels: &[Label]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let n = labels.len() as f64;
    let mut counts = std::collections::BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    1.0 - counts
        .values()
        .map(|&c| (c as f64 / n).powi(2))
        .sum::<f64>()
}
