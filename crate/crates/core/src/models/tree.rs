use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Columns considered per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 5,
            min_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: [usize; 2],
        impurity: f64,
    },
    Leaf {
        counts: [usize; 2],
        probability: f64,
    },
}

impl TreeNode {
    pub fn counts(&self) -> [usize; 2] {
        match self {
            TreeNode::Split { counts, .. } | TreeNode::Leaf { counts, .. } => *counts,
        }
    }

    /// Training rows reaching this node.
    pub fn cover(&self) -> usize {
        let c = self.counts();
        c[0] + c[1]
    }

    pub fn impurity(&self) -> f64 {
        match self {
            TreeNode::Split { impurity, .. } => *impurity,
            TreeNode::Leaf { counts, .. } => gini(*counts),
        }
    }
}

/// Gini impurity `1 − p₀² − p₁²` of a node with the given class counts.
pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Binary CART classifier. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub n_inputs: usize,
    pub max_depth: usize,
}

/// One step of a root-to-leaf traversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub node: usize,
    pub column: usize,
    pub threshold: f64,
    pub went_left: bool,
}

impl TreeModel {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let TreeNode::Split {
            column,
            threshold,
            left,
            right,
            ..
        } = self.nodes[i]
        {
            i = if x[column] <= threshold { left } else { right };
        }
        i
    }

    pub fn path(&self, x: &[f64]) -> (Vec<PathStep>, usize) {
        let mut steps = Vec::new();
        let mut i = 0;
        while let TreeNode::Split {
            column,
            threshold,
            left,
            right,
            ..
        } = self.nodes[i]
        {
            let went_left = x[column] <= threshold;
            steps.push(PathStep {
                node: i,
                column,
                threshold,
                went_left,
            });
            i = if went_left { left } else { right };
        }
        (steps, i)
    }

    pub fn depth(&self) -> usize {
        fn go(t: &TreeModel, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    /// Unnormalized per-column sum of coverage-weighted Gini decreases.
    pub fn raw_gini_importance(&self) -> Vec<f64> {
        let total = self.nodes[0].cover() as f64;
        let mut imp = vec![0.0; self.n_inputs];
        for node in &self.nodes {
            if let TreeNode::Split {
                column,
                left,
                right,
                counts,
                impurity,
                ..
            } = node
            {
                let n = (counts[0] + counts[1]) as f64;
                let (l, r) = (&self.nodes[*left], &self.nodes[*right]);
                let child = (l.cover() as f64 * l.impurity() + r.cover() as f64 * r.impurity()) / n;
                imp[*column] += n / total * (impurity - child);
            }
        }
        imp
    }
}

impl Classifier for TreeModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { probability, .. } => probability,
            TreeNode::Split { .. } => unreachable!("leaf_index ends at a leaf"),
        }
    }

    fn n_inputs(&self) -> usize {
        self.n_inputs
    }
}

pub fn train_tree(matrix: &FeatureMatrix, config: &TreeConfig) -> Result<TreeModel> {
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    grow(matrix, &rows, config, &mut ChaCha8Rng::seed_from_u64(0))
}

/// Grows a tree on `rows` (which may repeat, as in a bootstrap sample).
pub(crate) fn grow<R: Rng>(matrix: &FeatureMatrix, rows: &[usize], config: &TreeConfig, rng: &mut R) -> Result<TreeModel> {
    if rows.is_empty() {
        return Err(Error::DegenerateFit("cannot grow a tree on zero rows".into()));
    }
    if config.min_leaf == 0 {
        return Err(Error::Config("min_leaf must be at least 1".into()));
    }
    let mut tree = TreeModel {
        nodes: Vec::new(),
        n_inputs: matrix.n_cols(),
        max_depth: config.max_depth,
    };
    let mut work = rows.to_vec();
    build(&mut tree, matrix, &mut work, 0, config, rng);
    Ok(tree)
}

fn counts_of(matrix: &FeatureMatrix, rows: &[usize]) -> [usize; 2] {
    let pos = rows.iter().filter(|&&i| matrix.label(i) == 1).count();
    [rows.len() - pos, pos]
}

fn build<R: Rng>(
    tree: &mut TreeModel,
    matrix: &FeatureMatrix,
    rows: &mut [usize],
    depth: usize,
    config: &TreeConfig,
    rng: &mut R,
) -> usize {
    let counts = counts_of(matrix, rows);
    let id = tree.nodes.len();
    let leaf = TreeNode::Leaf {
        counts,
        probability: counts[1] as f64 / rows.len() as f64,
    };
    tree.nodes.push(leaf.clone());
    if depth >= config.max_depth || counts[0] == 0 || counts[1] == 0 || rows.len() < 2 * config.min_leaf {
        return id;
    }
    let Some((column, threshold)) = best_split(matrix, rows, counts, config, rng) else {
        return id;
    };
    // Stable partition keeps row order deterministic.
    let (mut l, mut r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| matrix.get(i, column) <= threshold);
    let n_left = l.len();
    let left = build(tree, matrix, &mut l, depth + 1, config, rng);
    let right = build(tree, matrix, &mut r, depth + 1, config, rng);
    debug_assert!(n_left > 0);
    tree.nodes[id] = TreeNode::Split {
        column,
        threshold,
        left,
        right,
        counts,
        impurity: gini(counts),
    };
    id
}

fn best_split<R: Rng>(
    matrix: &FeatureMatrix,
    rows: &[usize],
    counts: [usize; 2],
    config: &TreeConfig,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let p = matrix.n_cols();
    let mut columns: Vec<usize> = match config.max_features {
        Some(m) if m < p => sample(rng, p, m.max(1)).into_vec(),
        _ => (0..p).collect(),
    };
    columns.sort_unstable();

    let n = rows.len() as f64;
    let parent = n * gini(counts);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut vals: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
    for &j in &columns {
        vals.clear();
        vals.extend(rows.iter().map(|&i| (matrix.get(i, j), matrix.label(i))));
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0usize; 2];
        for s in 0..vals.len() - 1 {
            left[usize::from(vals[s].1)] += 1;
            if vals[s].0 == vals[s + 1].0 {
                continue;
            }
            let nl = s + 1;
            let nr = vals.len() - nl;
            if nl < config.min_leaf || nr < config.min_leaf {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let gain = parent - nl as f64 * gini(left) - nr as f64 * gini(right);
            let threshold = 0.5 * (vals[s].0 + vals[s + 1].0);
            let better = match best {
                None => gain >= -1e-12,
                Some((g, _, _)) => gain > g + 1e-12,
            };
            if better {
                best = Some((gain, j, threshold));
            }
        }
    }
    best.map(|(_, j, t)| (j, t))
}
