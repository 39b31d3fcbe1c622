//! Raw cohort to scoring-ready model artifact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::eval::{default_spaces, fit_trial, prepare_trial, Metrics, ProtocolConfig, SearchSpace, METRIC_NAMES};
use crate::explain::BackgroundSet;
use crate::models::{Family, Hyperparams, TrainedModel};
use crate::preprocess::{clean_cohort, encode, fit_bmi_regression, BmiRegression, CleaningReport};
use crate::resample::SmoteConfig;
use crate::stats::MeanStd;

/// Background rows kept for k-NN artifacts, whose predictions are costly.
pub const KNN_BACKGROUND_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub family: Family,
    /// Fixed hyperparameters; skips the search when set.
    pub hyperparameters: Option<Hyperparams>,
    /// Search space; defaults to the protocol space for the family.
    pub space: Option<SearchSpace>,
    pub seed: u64,
    pub test_fraction: f64,
    pub cv_folds: usize,
    pub smote: Option<SmoteConfig>,
    pub threshold: f64,
    /// Run the cleaning steps before encoding. Turn off for already-cleaned input.
    pub clean: bool,
    /// Height imputation line embedded in the artifact; fitted on the
    /// cohort when absent.
    pub regression: Option<BmiRegression>,
    /// Background rows stored for Shapley explanations (family default when absent).
    pub background_size: Option<usize>,
}

impl TrainOptions {
    pub fn new(family: Family) -> Self {
        TrainOptions {
            family,
            hyperparameters: None,
            space: None,
            seed: 0,
            test_fraction: 0.25,
            cv_folds: 5,
            smote: Some(SmoteConfig::default()),
            threshold: 0.5,
            clean: true,
            regression: None,
            background_size: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: TrainedModel,
    pub test_metrics: Metrics,
    pub cleaning: Option<CleaningReport>,
}

/// Cleans, splits, balances and fits one family, returning an artifact that
/// scores raw records. Metrics are measured on the held-out partition.
pub fn train_artifact(table: &CohortTable, opts: &TrainOptions) -> Result<TrainOutput> {
    let (table, cleaning) = if opts.clean {
        let (t, report) = clean_cohort(table, opts.regression)?;
        (t, Some(report))
    } else {
        (table.clone(), None)
    };
    if table.is_empty() {
        return Err(Error::Config("no records left to train on".into()));
    }
    let regression = match (&cleaning, opts.regression) {
        (Some(r), _) => r.regression,
        (None, Some(r)) => r,
        (None, None) => fit_bmi_regression(&table)?,
    };
    let space = match (&opts.hyperparameters, &opts.space) {
        (Some(h), _) => SearchSpace::single(h),
        (None, Some(s)) => s.clone(),
        (None, None) => default_spaces().remove(&opts.family).expect("every family has a space"),
    };
    space.validate()?;
    let config = ProtocolConfig {
        families: vec![opts.family],
        n_trials: 1,
        base_seed: opts.seed,
        test_fraction: opts.test_fraction,
        cv_folds: opts.cv_folds,
        smote: opts.smote,
        spaces: BTreeMap::from([(opts.family, space)]),
        threshold: opts.threshold,
    };
    let matrix = encode(&table)?;
    let prepared = prepare_trial(&matrix, &config, opts.seed)?;
    let fitted = fit_trial(&prepared, &config)?.remove(0);
    let size = opts.background_size.unwrap_or(match opts.family {
        Family::Knn => KNN_BACKGROUND_SIZE,
        _ => BackgroundSet::DEFAULT_SIZE,
    });
    let background = BackgroundSet::sample(&prepared.train, size, opts.seed);
    let metrics = METRIC_NAMES
        .iter()
        .map(|m| (m.to_string(), MeanStd::of(&[fitted.metrics.get(m).expect("known metric")])))
        .collect();
    let model = TrainedModel {
        family: opts.family,
        schema: table.schema.clone(),
        columns: matrix.columns.clone(),
        standardizer: prepared.standardizer,
        bmi_regression: Some(regression),
        params: fitted.model,
        background: background.rows,
        hyperparameters: fitted.hyperparameters,
        metrics,
    };
    model.validate()?;
    Ok(TrainOutput {
        model,
        test_metrics: fitted.metrics,
        cleaning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{generate_synthetic_cohort, record_from_map, record_to_map, GeneratorConfig};
    use crate::explain::{explain_record, ExplainMode, ExplainRequest};

    #[test]
    fn artifact_scores_raw_records_and_round_trips() {
        let t = generate_synthetic_cohort(&GeneratorConfig {
            n: 600,
            seed: 3,
            prevalence: 0.2,
            ..Default::default()
        })
        .unwrap();
        let mut opts = TrainOptions::new(Family::Dt);
        opts.hyperparameters = Some(Hyperparams::from([("max_depth".into(), 3.0)]));
        let out = train_artifact(&t, &opts).unwrap();
        assert_eq!(out.model.background.len(), 100);
        assert!(out.test_metrics.auc > 0.5);
        let back = TrainedModel::from_json(&out.model.to_json().unwrap()).unwrap();
        assert_eq!(back, out.model);

        // A record with its height removed is imputed, not rejected.
        let mut map = record_to_map(&t.schema, &t.records[1]);
        map.remove("height");
        map.remove("bmi");
        let rec = record_from_map(&t.schema, &map).unwrap();
        let p = out.model.predict_proba(&rec).unwrap();
        let e = explain_record(&out.model, &rec, &ExplainRequest::default()).unwrap();
        assert_eq!(e.force.mode, ExplainMode::Tree);
        assert_eq!(e.prediction, p);
        assert!((e.force.base + e.force.phi_sum() - p).abs() < 1e-9);
        assert!(!e.decision_path.unwrap().rules.is_empty());
    }
}
