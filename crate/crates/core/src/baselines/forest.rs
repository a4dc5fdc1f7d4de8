use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::ensemble::majority_vote;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

pub const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Class counts of the training samples that reached this leaf.
    Leaf { votes: Vec<usize> },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { votes } => return crate::nn::argmax_row(votes.iter().copied()),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Node>,
    /// Bootstrap and feature-sampling seed of each tree.
    pub tree_seeds: Vec<u64>,
    pub feature_dim: usize,
    pub class_count: usize,
}

impl ForestModel {
    /// Majority vote over trees; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let votes: Vec<usize> = self.trees.iter().map(|t| t.predict(x)).collect();
        let uniform = vec![vec![1.0 / self.class_count as f64; self.class_count]; votes.len()];
        majority_vote(&votes, &uniform)
    }
}

/// Column-major training data shared by every tree.
struct Data {
    columns: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

struct Grower<'a> {
    data: &'a Data,
    candidates: usize,
    rng: rng::Rng,
    /// A permutation of all feature indices; its prefix is reshuffled per node.
    order: Vec<usize>,
    buf: Vec<(f64, usize)>,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.data.classes];
        for &i in idx {
            c[self.data.labels[i]] += 1;
        }
        c
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> Node {
        let votes = self.counts(idx);
        let pure = votes.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= MAX_DEPTH || idx.len() < 2 {
            return Node::Leaf { votes };
        }
        let Some((feature, threshold)) = self.best_split(idx, &votes) else {
            return Node::Leaf { votes };
        };
        let col = &self.data.columns[feature];
        let mut split = 0;
        for k in 0..idx.len() {
            if col[idx[k]] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }

    /// Examines features in random order until `candidates` non-constant ones
    /// have been scored. Returns the lowest weighted Gini split among them.
    fn best_split(&mut self, idx: &[usize], totals: &[usize]) -> Option<(usize, f64)> {
        let p = self.order.len();
        let n = idx.len() as f64;
        let total_sq: f64 = totals.iter().map(|&c| (c * c) as f64).sum();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut scored = 0;
        for k in 0..p {
            if scored == self.candidates {
                break;
            }
            let pick = self.rng.random_range(k..p);
            self.order.swap(k, pick);
            let feature = self.order[k];
            let col = &self.data.columns[feature];

            self.buf.clear();
            self.buf
                .extend(idx.iter().map(|&i| (col[i], self.data.labels[i])));
            let first = self.buf[0].0;
            if self.buf.iter().all(|&(v, _)| v == first) {
                continue;
            }
            scored += 1;
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            // Maximize Σ l²/n_l + Σ r²/n_r, which minimizes weighted Gini.
            let mut left = vec![0usize; totals.len()];
            let (mut l_sq, mut r_sq) = (0.0, total_sq);
            for j in 0..self.buf.len() - 1 {
                let c = self.buf[j].1;
                let right_c = totals[c] - left[c];
                l_sq += (2 * left[c] + 1) as f64;
                r_sq -= (2 * right_c - 1) as f64;
                left[c] += 1;
                let (a, b) = (self.buf[j].0, self.buf[j + 1].0);
                if a == b {
                    continue;
                }
                let n_l = (j + 1) as f64;
                let score = l_sq / n_l + r_sq / (n - n_l);
                if best.is_none_or(|(s, _, _)| score > s) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Bagged Gini trees with `√p` candidate features per node. Trees are
/// independent and trained in parallel on the current rayon pool.
pub fn train_forest(
    features: &[FeatureVector],
    labels: &[usize],
    tree_count: usize,
    seed: u64,
) -> Result<ForestModel> {
    assert_eq!(features.len(), labels.len());
    if features.is_empty() {
        return Err(Error::InvalidConfig("forest needs training data".into()));
    }
    let dim = features[0].values.len();
    let mut columns = vec![Vec::with_capacity(features.len()); dim];
    for f in features {
        if f.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.values.len(),
            });
        }
        for (col, &v) in columns.iter_mut().zip(&f.values) {
            col.push(v);
        }
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1).max(2);
    let data = Data {
        columns,
        labels: labels.to_vec(),
        classes,
    };
    let candidates = ((dim as f64).sqrt() as usize).max(1);

    let base = rng::derive_seed(seed, stream::TREE);
    let tree_seeds: Vec<u64> = (0..tree_count)
        .map(|t| rng::derive_seed(base, t as u64))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = rng::seeded(s);
            let n = data.labels.len();
            let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut order: Vec<usize> = (0..dim).collect();
            order.shuffle(&mut rng);
            let mut grower = Grower {
                data: &data,
                candidates,
                rng,
                order,
                buf: Vec::new(),
            };
            grower.grow(&mut idx, 0)
        })
        .collect();

    Ok(ForestModel {
        trees,
        tree_seeds,
        feature_dim: dim,
        class_count: classes,
    })
}
