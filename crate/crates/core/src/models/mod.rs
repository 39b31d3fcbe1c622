//! The five classifier families behind one probability contract.

mod artifact;
mod forest;
mod knn;
mod logistic;
mod mlp;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use artifact::{load_model, save_model, TrainedModel, FORMAT_VERSION};
pub use forest::{train_forest, ForestConfig, ForestModel};
pub use knn::{train_knn, KnnConfig, KnnModel};
pub use logistic::{
    lambda_max, logistic_loss, train_logistic, train_logistic_traced, LogisticConfig, LogisticModel,
};
pub use mlp::{param_count, train_mlp, MlpConfig, MlpModel};
pub use tree::{gini, train_tree, PathStep, TreeConfig, TreeModel, TreeNode};

use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

/// Probability of the positive class for an encoded, standardized row.
pub trait Classifier {
    fn predict_row(&self, x: &[f64]) -> f64;

    fn n_inputs(&self) -> usize;

    fn predict_proba(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        matrix.rows().map(|x| self.predict_row(x)).collect()
    }
}

impl<F: Fn(&[f64]) -> f64> Classifier for (usize, F) {
    fn predict_row(&self, x: &[f64]) -> f64 {
        (self.1)(x)
    }

    fn n_inputs(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lr,
    Dt,
    Rf,
    Knn,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Lr, Family::Dt, Family::Rf, Family::Knn, Family::Mlp];

    pub fn tag(self) -> &'static str {
        match self {
            Family::Lr => "lr",
            Family::Dt => "dt",
            Family::Rf => "rf",
            Family::Knn => "knn",
            Family::Mlp => "mlp",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Family::Lr => "Logistic Regression",
            Family::Dt => "Decision Tree",
            Family::Rf => "Random Forest",
            Family::Knn => "k-Nearest Neighbors",
            Family::Mlp => "Multilayer Perceptron",
        }
    }

    /// Hyperparameter names accepted by [`fit`].
    pub fn hyperparameter_names(self) -> &'static [&'static str] {
        match self {
            Family::Lr => &["lambda", "max_epochs"],
            Family::Dt => &["max_depth", "min_leaf"],
            Family::Rf => &["n_trees", "max_depth", "min_leaf", "max_features"],
            Family::Knn => &["k", "uniform"],
            Family::Mlp => &["hidden", "hidden2", "learning_rate", "epochs", "batch_size", "l2"],
        }
    }

    pub fn default_hyperparameters(self) -> Hyperparams {
        let pairs: &[(&str, f64)] = match self {
            Family::Lr => &[("lambda", 0.0)],
            Family::Dt => &[("max_depth", 5.0), ("min_leaf", 1.0)],
            Family::Rf => &[("n_trees", 100.0), ("max_depth", 5.0), ("min_leaf", 1.0)],
            Family::Knn => &[("k", 16.0)],
            Family::Mlp => &[
                ("hidden", 32.0),
                ("learning_rate", 1e-3),
                ("epochs", 50.0),
                ("batch_size", 64.0),
                ("l2", 1e-4),
            ],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown model family `{s}`; expected one of lr, dt, rf, knn, mlp")))
    }
}

pub type Hyperparams = BTreeMap<String, f64>;

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelParams {
    Logistic(LogisticModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Knn(KnnModel),
    Mlp(MlpModel),
}

impl ModelParams {
    pub fn from_value(family: Family, value: serde_json::Value) -> Result<Self> {
        Ok(match family {
            Family::Lr => ModelParams::Logistic(serde_json::from_value(value)?),
            Family::Dt => ModelParams::Tree(serde_json::from_value(value)?),
            Family::Rf => ModelParams::Forest(serde_json::from_value(value)?),
            Family::Knn => ModelParams::Knn(serde_json::from_value(value)?),
            Family::Mlp => ModelParams::Mlp(serde_json::from_value(value)?),
        })
    }

    pub fn family(&self) -> Family {
        match self {
            ModelParams::Logistic(_) => Family::Lr,
            ModelParams::Tree(_) => Family::Dt,
            ModelParams::Forest(_) => Family::Rf,
            ModelParams::Knn(_) => Family::Knn,
            ModelParams::Mlp(_) => Family::Mlp,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            ModelParams::Logistic(m) => m,
            ModelParams::Tree(m) => m,
            ModelParams::Forest(m) => m,
            ModelParams::Knn(m) => m,
            ModelParams::Mlp(m) => m,
        }
    }
}

impl Classifier for ModelParams {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self.inner().predict_row(x)
    }

    fn n_inputs(&self) -> usize {
        self.inner().n_inputs()
    }
}

fn get(h: &Hyperparams, family: Family, key: &str) -> Option<f64> {
    h.get(key)
        .copied()
        .or_else(|| family.default_hyperparameters().get(key).copied())
}

fn get_usize(h: &Hyperparams, family: Family, key: &str, fallback: usize) -> Result<usize> {
    match get(h, family, key) {
        None => Ok(fallback),
        Some(v) if v >= 0.0 && v.fract() == 0.0 && v.is_finite() => Ok(v as usize),
        Some(v) => Err(Error::Config(format!("{family} hyperparameter `{key}` must be a whole number, got {v}"))),
    }
}

/// Fits a model of `family` from a hyperparameter map. Missing keys take
/// family defaults; unknown keys are rejected. `knn_weights` supplies the
/// k-NN column weights (usually forest Gini importances); when absent and
/// `uniform` is not set, a default forest is fitted to derive them.
pub fn fit(
    family: Family,
    hyper: &Hyperparams,
    train: &FeatureMatrix,
    seed: u64,
    knn_weights: Option<&[f64]>,
) -> Result<ModelParams> {
    let allowed = family.hyperparameter_names();
    if let Some(k) = hyper.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Config(format!(
            "unknown {family} hyperparameter `{k}`; accepted: {}",
            allowed.join(", ")
        )));
    }
    Ok(match family {
        Family::Lr => ModelParams::Logistic(train_logistic(
            train,
            &LogisticConfig {
                l1_lambda: get(hyper, family, "lambda").unwrap_or(0.0),
                max_epochs: get_usize(hyper, family, "max_epochs", LogisticConfig::default().max_epochs)?,
                ..LogisticConfig::default()
            },
        )?),
        Family::Dt => ModelParams::Tree(train_tree(
            train,
            &TreeConfig {
                max_depth: get_usize(hyper, family, "max_depth", 5)?,
                min_leaf: get_usize(hyper, family, "min_leaf", 1)?,
                max_features: None,
            },
        )?),
        Family::Rf => ModelParams::Forest(train_forest(train, &forest_config(hyper, seed)?)?),
        Family::Knn => {
            let uniform = get(hyper, family, "uniform").unwrap_or(0.0) != 0.0;
            let weights = if uniform {
                None
            } else if let Some(w) = knn_weights {
                Some(w.to_vec())
            } else {
                let forest = train_forest(train, &forest_config(&Hyperparams::new(), seed)?)?;
                Some(forest.raw_gini_importance())
            };
            ModelParams::Knn(train_knn(
                train,
                &KnnConfig {
                    k: get_usize(hyper, family, "k", 16)?,
                    weights,
                },
            )?)
        }
        Family::Mlp => {
            let mut hidden = vec![get_usize(hyper, family, "hidden", 32)?];
            if let Some(h2) = hyper.get("hidden2") {
                if *h2 > 0.0 {
                    hidden.push(get_usize(hyper, family, "hidden2", 0)?);
                }
            }
            ModelParams::Mlp(train_mlp(
                train,
                &MlpConfig {
                    hidden,
                    learning_rate: get(hyper, family, "learning_rate").unwrap_or(1e-3),
                    epochs: get_usize(hyper, family, "epochs", 50)?,
                    batch_size: get_usize(hyper, family, "batch_size", 64)?,
                    l2: get(hyper, family, "l2").unwrap_or(0.0),
                    seed,
                },
            )?)
        }
    })
}

fn forest_config(hyper: &Hyperparams, seed: u64) -> Result<ForestConfig> {
    let f = Family::Rf;
    let mf = get_usize(hyper, f, "max_features", 0)?;
    Ok(ForestConfig {
        n_trees: get_usize(hyper, f, "n_trees", 100)?,
        max_depth: get_usize(hyper, f, "max_depth", 5)?,
        min_leaf: get_usize(hyper, f, "min_leaf", 1)?,
        max_features: (mf > 0).then_some(mf),
        bootstrap: true,
        seed,
    })
}
