//! Random forest misuse subsystem.
//!
//! Each tree is grown on a bootstrap sample the size of the training set,
//! with `features_per_split` candidate features drawn at every node, Gini
//! impurity as the split criterion and no pruning beyond a depth cap.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdd::{BinaryClass, Row};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    /// Candidate features per split; `None` means ⌈√width⌉.
    pub features_per_split: Option<usize>,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 20,
            features_per_split: None,
            max_depth: 32,
            min_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        intrusive: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> BinaryClass {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { intrusive } => return BinaryClass::from_intrusive(*intrusive),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    width: usize,
    features_per_split: usize,
    seed: u64,
}

pub fn train_forest(rows: &[Row], config: &ForestConfig) -> Result<Forest> {
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if config.trees == 0 {
        return Err(Error::InvalidArgument("forest needs at least one tree".into()));
    }
    let width = rows[0].features.len();
    let var = config
        .features_per_split
        .unwrap_or_else(|| (width as f64).sqrt().ceil() as usize);
    if var == 0 || var > width {
        return Err(Error::InvalidArgument(format!(
            "features per split must be in 1..={width}, got {var}"
        )));
    }
    let xs: Vec<&[f64]> = rows.iter().map(|r| r.features.as_slice()).collect();
    let ys: Vec<bool> = rows.iter().map(|r| r.truth.is_intrusive()).collect();

    let trees = (0..config.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(t as u64));
            rng.set_stream(t as u64);
            let sample: Vec<usize> = (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect();
            let mut builder = TreeBuilder {
                xs: &xs,
                ys: &ys,
                width,
                var,
                max_depth: config.max_depth,
                min_leaf: config.min_leaf.max(1),
                rng,
                nodes: Vec::new(),
            };
            builder.grow(sample, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();

    Ok(Forest {
        trees,
        width,
        features_per_split: var,
        seed: config.seed,
    })
}

struct TreeBuilder<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [bool],
    width: usize,
    var: usize,
    max_depth: usize,
    min_leaf: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let positives = idx.iter().filter(|&&i| self.ys[i]).count();
        let at = self.nodes.len();
        // A tie in the leaf majority counts as intrusive.
        self.nodes.push(Node::Leaf {
            intrusive: 2 * positives >= idx.len(),
        });
        if positives == 0 || positives == idx.len() || depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return at;
        }
        let Some(best) = self.best_split(&idx) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.xs[i][best.feature] <= best.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    /// Best split among `var` random features; when none of them can split
    /// the node the remaining features are tried in random order.
    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let mut features: Vec<usize> = (0..self.width).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<Candidate> = None;
        let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(idx.len());
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.var && best.is_some() {
                break;
            }
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.xs[i][f], self.ys[i])));
            if let Some(c) = best_threshold(&mut pairs, self.min_leaf) {
                if best.as_ref().is_none_or(|b| c.1 < b.impurity) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: c.0,
                        impurity: c.1,
                    });
                }
            }
        }
        best
    }
}

/// Lowest weighted Gini impurity over all thresholds of one feature.
/// Returns (threshold, impurity); `None` when the feature is constant.
fn best_threshold(pairs: &mut [(f64, bool)], min_leaf: usize) -> Option<(f64, f64)> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let total_pos = pairs.iter().filter(|p| p.1).count() as f64;
    let mut left_pos = 0.0;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n - 1 {
        left_pos += f64::from(u8::from(pairs[i].1));
        if pairs[i].0 == pairs[i + 1].0 {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = (n - i - 1) as f64;
        if (i + 1) < min_leaf || (n - i - 1) < min_leaf {
            continue;
        }
        let right_pos = total_pos - left_pos;
        let gini = |pos: f64, m: f64| {
            let p = pos / m;
            2.0 * p * (1.0 - p)
        };
        let impurity = (nl * gini(left_pos, nl) + nr * gini(right_pos, nr)) / n as f64;
        if best.is_none_or(|b| impurity < b.1) {
            let mid = pairs[i].0 + (pairs[i + 1].0 - pairs[i].0) / 2.0;
            best = Some((mid, impurity));
        }
    }
    best
}

impl Forest {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn features_per_split(&self) -> usize {
        self.features_per_split
    }

    /// Majority vote with the share of intrusive votes; an exact tie is
    /// Intrusive.
    pub fn classify(&self, x: &[f64]) -> Result<(BinaryClass, f64)> {
        if x.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                found: x.len(),
            });
        }
        let votes = self
            .trees
            .iter()
            .filter(|t| t.predict(x).is_intrusive())
            .count();
        let verdict = BinaryClass::from_intrusive(2 * votes >= self.trees.len());
        Ok((verdict, votes as f64 / self.trees.len() as f64))
    }
}
