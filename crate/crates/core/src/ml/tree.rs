//! Binary classification trees over binary features.
//!
//! Splits test one feature: samples where it is off go left, on go right.
//! The split with the largest Gini decrease wins, lowest feature index on
//! ties. Zero-decrease splits are taken when nothing better exists, so any
//! dataset without contradictory duplicates is fit exactly at unlimited
//! depth.

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::error::{Error, Result};

pub fn gini(labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptySet);
    }
    let pos = labels.iter().filter(|&&y| y).count();
    Ok(gini_counts(pos, labels.len()))
}

pub(crate) fn gini_counts(pos: usize, n: usize) -> f64 {
    let p1 = pos as f64 / n as f64;
    let p0 = 1.0 - p1;
    1.0 - p0 * p0 - p1 * p1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        /// Fraction of positive training samples in the leaf.
        prob: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        /// Child for samples with the feature off.
        left: usize,
        /// Child for samples with the feature on.
        right: usize,
        n_samples: usize,
        impurity_decrease: f64,
    },
}

/// Single-target tree. Node 0 is the root; nodes are stored in preorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTree {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

impl BinaryTree {
    pub fn leaf_for(&self, x: &FeatureVector) -> Result<&Node> {
        if x.dim() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.dim(),
            });
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                leaf @ Node::Leaf { .. } => return Ok(leaf),
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => i = if x.get(*feature) { *right } else { *left },
            }
        }
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        match self.leaf_for(x)? {
            Node::Leaf { prob, .. } => Ok(*prob),
            Node::Split { .. } => unreachable!("leaf_for returns leaves"),
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<bool> {
        Ok(self.predict_proba(x)? >= 0.5)
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Gini decrease of splitting `idx` on `feature`, or `None` when one side
/// would be empty.
pub(crate) fn split_decrease(
    x: &[FeatureVector],
    y: &[bool],
    idx: &[usize],
    feature: usize,
) -> Option<f64> {
    let (mut n_on, mut pos_on, mut pos) = (0usize, 0usize, 0usize);
    for &i in idx {
        if y[i] {
            pos += 1;
        }
        if x[i].get(feature) {
            n_on += 1;
            if y[i] {
                pos_on += 1;
            }
        }
    }
    let n = idx.len();
    let n_off = n - n_on;
    if n_on == 0 || n_off == 0 {
        return None;
    }
    let parent = gini_counts(pos, n);
    let weighted = (n_off as f64 / n as f64) * gini_counts(pos - pos_on, n_off)
        + (n_on as f64 / n as f64) * gini_counts(pos_on, n_on);
    Some(parent - weighted)
}

/// Supplies the features a node may split on. Returned indices need not be
/// sorted.
pub(crate) trait FeatureChooser {
    fn candidates(&mut self, x: &[FeatureVector], y: &[bool], idx: &[usize]) -> Vec<usize>;
}

pub(crate) struct AllFeatures(pub usize);

impl FeatureChooser for AllFeatures {
    fn candidates(&mut self, _: &[FeatureVector], _: &[bool], _: &[usize]) -> Vec<usize> {
        (0..self.0).collect()
    }
}

fn best_split(
    x: &[FeatureVector],
    y: &[bool],
    idx: &[usize],
    mut candidates: Vec<usize>,
) -> Option<(usize, f64)> {
    candidates.sort_unstable();
    let mut best: Option<(usize, f64)> = None;
    for f in candidates {
        if let Some(dec) = split_decrease(x, y, idx, f) {
            if best.is_none_or(|(_, b)| dec > b) {
                best = Some((f, dec));
            }
        }
    }
    best
}

struct Builder<'a, C> {
    x: &'a [FeatureVector],
    y: &'a [bool],
    params: TreeParams,
    chooser: C,
    nodes: Vec<Node>,
}

impl<C: FeatureChooser> Builder<'_, C> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let leaf = Node::Leaf {
            prob: pos as f64 / n as f64,
            n_samples: n,
        };
        self.nodes.push(leaf);

        let pure = pos == 0 || pos == n;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || n < self.params.min_samples_split {
            return id;
        }
        let candidates = self.chooser.candidates(self.x, self.y, &idx);
        let Some((feature, impurity_decrease)) = best_split(self.x, self.y, &idx, candidates)
        else {
            return id;
        };
        let (on, off): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[i].get(feature));
        let left = self.grow(off, depth + 1);
        let right = self.grow(on, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            left,
            right,
            n_samples: n,
            impurity_decrease,
        };
        id
    }
}

pub(crate) fn check_shape(x: &[FeatureVector], labels: usize) -> Result<usize> {
    if x.len() != labels || x.is_empty() {
        return Err(Error::ShapeMismatch {
            samples: x.len(),
            labels,
        });
    }
    let d = x[0].dim();
    if let Some(bad) = x.iter().find(|v| v.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    Ok(d)
}

pub(crate) fn grow_tree<C: FeatureChooser>(
    x: &[FeatureVector],
    y: &[bool],
    sample: Vec<usize>,
    params: TreeParams,
    chooser: C,
) -> BinaryTree {
    let n_features = x[0].dim();
    let mut b = Builder {
        x,
        y,
        params,
        chooser,
        nodes: Vec::new(),
    };
    b.grow(sample, 0);
    BinaryTree {
        n_features,
        nodes: b.nodes,
    }
}

pub fn fit_tree(x: &[FeatureVector], y: &[bool], params: TreeParams) -> Result<BinaryTree> {
    let d = check_shape(x, y.len())?;
    Ok(grow_tree(
        x,
        y,
        (0..x.len()).collect(),
        params,
        AllFeatures(d),
    ))
}
