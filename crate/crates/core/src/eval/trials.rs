use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cv::CvOptions;
use super::metrics::{Metrics, METRIC_NAMES};
use super::search::{search, SearchSpace};
use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::models::{fit, train_forest, Classifier, Family, ForestConfig, Hyperparams, ModelParams};
use crate::preprocess::{encode, split_indices, FeatureMatrix, StandardizerState};
use crate::resample::{smote_nc, SmoteConfig};
use crate::stats::MeanStd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub families: Vec<Family>,
    pub n_trials: usize,
    pub base_seed: u64,
    pub test_fraction: f64,
    pub cv_folds: usize,
    /// `None` disables oversampling (ablation).
    pub smote: Option<SmoteConfig>,
    pub spaces: BTreeMap<Family, SearchSpace>,
    pub threshold: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            families: Family::ALL.to_vec(),
            n_trials: 30,
            base_seed: 0,
            test_fraction: 0.25,
            cv_folds: 5,
            smote: Some(SmoteConfig::default()),
            spaces: default_spaces(),
            threshold: 0.5,
        }
    }
}

/// Compact per-family search spaces sized for single-core runs.
pub fn default_spaces() -> BTreeMap<Family, SearchSpace> {
    BTreeMap::from([
        (Family::Lr, SearchSpace::grid([("lambda", vec![60.0, 120.0, 200.0, 300.0])])),
        (
            Family::Dt,
            SearchSpace::grid([("max_depth", vec![5.0]), ("min_leaf", vec![5.0, 50.0])]),
        ),
        (
            Family::Rf,
            SearchSpace::grid([("n_trees", vec![50.0]), ("max_depth", vec![5.0, 8.0])]),
        ),
        (Family::Knn, SearchSpace::grid([("k", vec![16.0])])),
        (
            Family::Mlp,
            SearchSpace::grid([
                ("hidden", vec![16.0]),
                ("epochs", vec![20.0]),
                ("learning_rate", vec![1e-3]),
                ("batch_size", vec![64.0]),
                ("l2", vec![1e-3]),
            ]),
        ),
    ])
}

/// One trial's data after split, standardization and oversampling.
#[derive(Debug, Clone)]
pub struct PreparedTrial {
    pub seed: u64,
    pub standardizer: StandardizerState,
    /// Standardized training partition before oversampling.
    pub train: FeatureMatrix,
    pub train_balanced: FeatureMatrix,
    pub test: FeatureMatrix,
}

pub fn prepare_trial(matrix: &FeatureMatrix, config: &ProtocolConfig, seed: u64) -> Result<PreparedTrial> {
    let idx = split_indices(matrix.labels(), config.test_fraction, true, seed)?;
    let raw_train = matrix.select_rows(&idx.train);
    let standardizer = StandardizerState::fit(&raw_train);
    let train = standardizer.apply(&raw_train)?;
    let test = standardizer.apply(&matrix.select_rows(&idx.test))?;
    let train_balanced = match &config.smote {
        Some(s) => smote_nc(&train, &SmoteConfig { seed, ..*s })?,
        None => train.clone(),
    };
    Ok(PreparedTrial {
        seed,
        standardizer,
        train,
        train_balanced,
        test,
    })
}

/// A fitted family within one trial.
#[derive(Debug, Clone)]
pub struct FittedFamily {
    pub family: Family,
    pub hyperparameters: Hyperparams,
    pub model: ModelParams,
    pub metrics: Metrics,
}

/// Tunes (when the space has more than one point) and fits every configured
/// family on one prepared trial. The forest is fitted before k-NN so its
/// Gini importances can serve as the k-NN distance weights.
pub fn fit_trial(prepared: &PreparedTrial, config: &ProtocolConfig) -> Result<Vec<FittedFamily>> {
    let mut order = config.families.clone();
    order.sort_by_key(|f| u8::from(*f == Family::Knn));
    let mut knn_weights: Option<Vec<f64>> = None;
    let mut fitted = Vec::new();
    for family in order {
        if family == Family::Knn && knn_weights.is_none() {
            let forest = train_forest(
                &prepared.train_balanced,
                &ForestConfig {
                    n_trees: 50,
                    seed: prepared.seed,
                    ..ForestConfig::default()
                },
            )?;
            knn_weights = Some(normalized_weights(&forest.raw_gini_importance()));
        }
        let space = config
            .spaces
            .get(&family)
            .cloned()
            .unwrap_or_else(|| SearchSpace::single(&family.default_hyperparameters()));
        let hyper = if space.n_candidates() == 1 {
            space.candidates(prepared.seed)?.remove(0)
        } else {
            let opts = CvOptions {
                k: config.cv_folds,
                seed: prepared.seed,
                smote: config.smote.map(|s| SmoteConfig {
                    seed: prepared.seed,
                    ..s
                }),
                knn_weights: knn_weights.clone(),
                threshold: config.threshold,
            };
            search(family, &space, &prepared.train, &opts)?.best
        };
        let model = fit(
            family,
            &hyper,
            &prepared.train_balanced,
            prepared.seed,
            knn_weights.as_deref(),
        )?;
        if let ModelParams::Forest(f) = &model {
            knn_weights = Some(normalized_weights(&f.raw_gini_importance()));
        }
        let scores = model.predict_proba(&prepared.test);
        fitted.push(FittedFamily {
            family,
            hyperparameters: hyper,
            metrics: Metrics::compute(&scores, prepared.test.labels(), config.threshold)?,
            model,
        });
    }
    fitted.sort_by_key(|f| config.families.iter().position(|x| *x == f.family));
    Ok(fitted)
}

fn normalized_weights(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![1.0; raw.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub family: Family,
    pub metrics: Metrics,
    pub hyperparameters: Hyperparams,
    /// Logistic feature weights, kept for L1 survival analysis.
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub auc: MeanStd,
    pub acc: MeanStd,
    pub rec: MeanStd,
}

impl FamilySummary {
    pub fn get(&self, metric: &str) -> Option<MeanStd> {
        match metric {
            "auc" => Some(self.auc),
            "acc" => Some(self.acc),
            "rec" => Some(self.rec),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub n_trials: usize,
    pub base_seed: u64,
    pub families: Vec<Family>,
    pub columns: Vec<String>,
    pub trials: Vec<TrialOutcome>,
    pub summary: BTreeMap<Family, FamilySummary>,
}

pub fn run_trials(table: &CohortTable, config: &ProtocolConfig) -> Result<TrialReport> {
    run_trials_with(table, config, |_, _| {})
}

/// As [`run_trials`], calling `on_trial` after each trial with its fits.
pub fn run_trials_with<F>(table: &CohortTable, config: &ProtocolConfig, mut on_trial: F) -> Result<TrialReport>
where
    F: FnMut(&PreparedTrial, &[FittedFamily]),
{
    if config.n_trials < 1 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    if config.families.is_empty() {
        return Err(Error::Config("no model families selected".into()));
    }
    let matrix = encode(table)?;
    let mut trials = Vec::new();
    for t in 0..config.n_trials {
        let seed = config.base_seed.wrapping_add(t as u64);
        let prepared = prepare_trial(&matrix, config, seed)?;
        let fitted = fit_trial(&prepared, config)?;
        on_trial(&prepared, &fitted);
        for f in fitted {
            let coefficients = match &f.model {
                ModelParams::Logistic(m) => Some(m.weights.clone()),
                _ => None,
            };
            trials.push(TrialOutcome {
                trial: t,
                seed,
                family: f.family,
                metrics: f.metrics,
                hyperparameters: f.hyperparameters,
                coefficients,
            });
        }
    }
    let mut summary = BTreeMap::new();
    for &family in &config.families {
        let of = |get: fn(&Metrics) -> f64| {
            MeanStd::of(
                &trials
                    .iter()
                    .filter(|o| o.family == family)
                    .map(|o| get(&o.metrics))
                    .collect::<Vec<_>>(),
            )
        };
        summary.insert(
            family,
            FamilySummary {
                auc: of(|m| m.auc),
                acc: of(|m| m.acc),
                rec: of(|m| m.rec),
            },
        );
    }
    Ok(TrialReport {
        n_trials: config.n_trials,
        base_seed: config.base_seed,
        families: config.families.clone(),
        columns: matrix.column_names(),
        trials,
        summary,
    })
}

impl TrialReport {
    /// Logistic coefficient vectors, one per trial.
    pub fn lr_coefficients(&self) -> Vec<Vec<f64>> {
        self.trials.iter().filter_map(|t| t.coefficients.clone()).collect()
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("family,metric,mean,std\n");
        for f in &self.families {
            let s = &self.summary[f];
            for m in METRIC_NAMES {
                let v = s.get(m).expect("known metric");
                let _ = writeln!(out, "{},{m},{:.6},{:.6}", f.tag(), v.mean, v.std);
            }
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "Performance on predicting 28-day mortality ({} trials, base seed {})\n",
            self.n_trials, self.base_seed
        );
        let _ = writeln!(out, "{:<24}{:>16}{:>16}{:>16}", "Model", "AUC", "ACC", "REC");
        for f in &self.families {
            let s = &self.summary[f];
            let _ = writeln!(
                out,
                "{:<24}{:>16}{:>16}{:>16}",
                f.display_name(),
                s.auc.to_string(),
                s.acc.to_string(),
                s.rec.to_string()
            );
        }
        out
    }
}
