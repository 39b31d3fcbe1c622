use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, TreeConfig, TreeModel};
use super::Classifier;
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Columns per split; `None` means `round(√p)`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 5,
            min_leaf: 1,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub tree_seeds: Vec<u64>,
    pub max_features: usize,
}

impl ForestModel {
    /// Mean of per-tree unnormalized Gini importances.
    pub fn raw_gini_importance(&self) -> Vec<f64> {
        let p = self.n_inputs();
        let mut imp = vec![0.0; p];
        for t in &self.trees {
            for (a, b) in imp.iter_mut().zip(t.raw_gini_importance()) {
                *a += b;
            }
        }
        imp.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        imp
    }
}

impl Classifier for ForestModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }

    fn n_inputs(&self) -> usize {
        self.trees[0].n_inputs
    }
}

pub fn train_forest(matrix: &FeatureMatrix, config: &ForestConfig) -> Result<ForestModel> {
    if config.n_trees < 1 {
        return Err(Error::Config("a forest needs at least one tree".into()));
    }
    let p = matrix.n_cols();
    let max_features = config
        .max_features
        .unwrap_or_else(|| ((p as f64).sqrt().round() as usize).max(1))
        .min(p);
    let tree_cfg = TreeConfig {
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
        max_features: Some(max_features),
    };
    let n = matrix.n_rows();
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut tree_seeds = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let seed = config.seed.wrapping_add(t as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<usize> = if config.bootstrap {
            let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        trees.push(grow(matrix, &rows, &tree_cfg, &mut rng)?);
        tree_seeds.push(seed);
    }
    Ok(ForestModel {
        trees,
        tree_seeds,
        max_features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::train_tree;

    fn noisy(n: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.5 * r[1] + 0.3 * rng.random::<f64>() > 0.9))
            .collect();
        FeatureMatrix::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn forest_of_one_matches_tree() {
        let m = noisy(200, 1);
        let f = train_forest(
            &m,
            &ForestConfig {
                n_trees: 1,
                bootstrap: false,
                max_features: Some(4),
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let t = train_tree(&m, &TreeConfig::default()).unwrap();
        let probe = noisy(100, 2);
        for x in probe.rows() {
            assert_eq!(f.predict_row(x), t.predict_row(x));
        }
    }

    #[test]
    fn mean_lies_between_tree_extremes() {
        let m = noisy(200, 3);
        let f = train_forest(
            &m,
            &ForestConfig {
                n_trees: 15,
                seed: 4,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        for x in noisy(50, 5).rows() {
            let ps: Vec<f64> = f.trees.iter().map(|t| t.predict_row(x)).collect();
            let p = f.predict_row(x);
            assert!(p >= ps.iter().cloned().fold(1.0, f64::min) - 1e-15);
            assert!(p <= ps.iter().cloned().fold(0.0, f64::max) + 1e-15);
        }
    }

    #[test]
    fn seeded_forests_are_identical() {
        let m = noisy(150, 6);
        let cfg = ForestConfig {
            n_trees: 5,
            seed: 11,
            ..ForestConfig::default()
        };
        assert_eq!(train_forest(&m, &cfg).unwrap(), train_forest(&m, &cfg).unwrap());
        assert!(train_forest(
            &m,
            &ForestConfig {
                n_trees: 0,
                ..cfg
            }
        )
        .is_err());
    }
}
