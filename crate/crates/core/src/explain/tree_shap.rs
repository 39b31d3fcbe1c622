use super::shapley::CoalitionValue;
use super::{Attribution, ExplainMode, Players};
use crate::error::{Error, Result};
use crate::models::{ForestModel, TreeModel, TreeNode};

/// Tree-structured value function: features outside the coalition are
/// marginalized by descending both children weighted by training coverage.
pub struct PathDependentValue<'a> {
    pub tree: &'a TreeModel,
    pub row: &'a [f64],
}

impl PathDependentValue<'_> {
    fn eval(&self, node: usize, coalition: &[bool]) -> f64 {
        match &self.tree.nodes[node] {
            TreeNode::Leaf { probability, .. } => *probability,
            TreeNode::Split {
                column,
                threshold,
                left,
                right,
                ..
            } => {
                if coalition[*column] {
                    let next = if self.row[*column] <= *threshold { *left } else { *right };
                    self.eval(next, coalition)
                } else {
                    let n = self.tree.nodes[node].cover() as f64;
                    let (l, r) = (self.tree.nodes[*left].cover() as f64, self.tree.nodes[*right].cover() as f64);
                    (l * self.eval(*left, coalition) + r * self.eval(*right, coalition)) / n
                }
            }
        }
    }
}

impl CoalitionValue for PathDependentValue<'_> {
    fn n_players(&self) -> usize {
        self.tree.n_inputs
    }

    fn value(&self, coalition: &[bool]) -> f64 {
        self.eval(0, coalition)
    }
}

#[derive(Clone, Copy)]
struct PathElement {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: usize) {
    let d = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        weight: if d == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..d).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (d + 1) as f64;
        path[i].weight = zero * path[i].weight * (d - i) as f64 / (d + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let d = path.len() - 1;
    let PathElement { zero, one, .. } = path[index];
    let mut next = path[d].weight;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * (d + 1) as f64 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (d - i) as f64 / (d + 1) as f64;
        } else {
            path[i].weight = path[i].weight * (d + 1) as f64 / (zero * (d - i) as f64);
        }
    }
    for i in index..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let d = path.len() - 1;
    let PathElement { zero, one, .. } = path[index];
    let mut next = path[d].weight;
    let mut total = 0.0;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = next * (d + 1) as f64 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i) as f64 / (d + 1) as f64;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((d - i) as f64 / (d + 1) as f64);
        }
    }
    total
}

fn recurse(
    tree: &TreeModel,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElement>,
    zero: f64,
    one: f64,
    feature: usize,
) {
    extend(&mut path, zero, one, feature);
    match &tree.nodes[node] {
        TreeNode::Leaf { probability, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                phi[el.feature] += w * (el.one - el.zero) * probability;
            }
        }
        TreeNode::Split {
            column,
            threshold,
            left,
            right,
            ..
        } => {
            let (hot, cold) = if x[*column] <= *threshold { (*left, *right) } else { (*right, *left) };
            let cover = tree.nodes[node].cover() as f64;
            let hot_zero = tree.nodes[hot].cover() as f64 / cover;
            let cold_zero = tree.nodes[cold].cover() as f64 / cover;
            let (mut in_zero, mut in_one) = (1.0, 1.0);
            if let Some(k) = path.iter().position(|e| e.feature == *column) {
                in_zero = path[k].zero;
                in_one = path[k].one;
                unwind(&mut path, k);
            }
            recurse(tree, x, phi, hot, path.clone(), hot_zero * in_zero, in_one, *column);
            recurse(tree, x, phi, cold, path, cold_zero * in_zero, 0.0, *column);
        }
    }
}

/// Coverage-weighted mean leaf probability: the prediction with no features known.
pub fn tree_base_value(tree: &TreeModel) -> f64 {
    let total = tree.nodes[0].cover() as f64;
    tree.nodes
        .iter()
        .filter_map(|n| match n {
            TreeNode::Leaf { probability, counts } => Some((counts[0] + counts[1]) as f64 / total * probability),
            TreeNode::Split { .. } => None,
        })
        .sum()
}

/// Path-dependent Shapley values of one tree, one entry per column.
pub fn tree_phi(tree: &TreeModel, x: &[f64]) -> Vec<f64> {
    let mut phi = vec![0.0; tree.n_inputs];
    recurse(tree, x, &mut phi, 0, Vec::with_capacity(tree.max_depth + 2), 1.0, 1.0, NO_FEATURE);
    phi
}

/// Tree or forest whose Shapley values can be computed along tree paths.
#[derive(Debug, Clone, Copy)]
pub enum TreeEnsemble<'a> {
    Tree(&'a TreeModel),
    Forest(&'a ForestModel),
}

impl TreeEnsemble<'_> {
    fn trees(&self) -> &[TreeModel] {
        match self {
            TreeEnsemble::Tree(t) => std::slice::from_ref(*t),
            TreeEnsemble::Forest(f) => &f.trees,
        }
    }
}

/// Column-level path-dependent Shapley attribution; forests average their trees.
pub fn tree_shapley(model: TreeEnsemble<'_>, row: &[f64]) -> Result<Attribution> {
    let trees = model.trees();
    let p = trees[0].n_inputs;
    if row.len() != p {
        return Err(Error::ColumnMismatch(format!("row has {} values, trees expect {p}", row.len())));
    }
    let n = trees.len() as f64;
    let mut phi = vec![0.0; p];
    let mut base = 0.0;
    let mut prediction = 0.0;
    for t in trees {
        for (a, b) in phi.iter_mut().zip(tree_phi(t, row)) {
            *a += b / n;
        }
        base += tree_base_value(t) / n;
        prediction += crate::models::Classifier::predict_row(t, row) / n;
    }
    Ok(Attribution::new(&Players::singletons(p), base, phi, prediction, ExplainMode::Tree, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::shapley::exact_game;
    use crate::models::{train_tree, Classifier, TreeConfig};
    use crate::preprocess::FeatureMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn depth_one_tree_credits_the_split_feature() {
        let m = FeatureMatrix::from_rows(&[vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]], &[0, 0, 0, 1])
            .unwrap();
        let t = train_tree(
            &m,
            &TreeConfig {
                max_depth: 1,
                ..TreeConfig::default()
            },
        )
        .unwrap();
        let a = tree_shapley(TreeEnsemble::Tree(&t), &[3.0, 5.0]).unwrap();
        assert!((a.base_value - 0.25).abs() < 1e-15);
        assert!((a.phi[0] - (t.predict_row(&[3.0, 5.0]) - 0.25)).abs() < 1e-12);
        assert_eq!(a.phi[1], 0.0);
    }

    #[test]
    fn polynomial_algorithm_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + r[1] * r[2] + 0.3 * rng.random::<f64>() > 0.8)).collect();
        let m = FeatureMatrix::from_rows(&rows, &labels).unwrap();
        let t = train_tree(&m, &TreeConfig::default()).unwrap();
        for x in rows.iter().take(20) {
            let game = PathDependentValue { tree: &t, row: x };
            let (base, full, oracle) = exact_game(&game).unwrap();
            let fast = tree_phi(&t, x);
            for (a, b) in fast.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{fast:?} vs {oracle:?}");
            }
            assert!((base - tree_base_value(&t)).abs() < 1e-12);
            assert!((full - t.predict_row(x)).abs() < 1e-12);
        }
    }
}
