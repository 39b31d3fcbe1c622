use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::local::{decision_path, force_plot_data, knn_neighbors, DecisionPath, ForceExplanation, NeighborSet};
use super::shapley::{shapley_exact, shapley_sampled, BackgroundSet, MAX_EXACT_PLAYERS};
use super::tree_shap::{tree_shapley, TreeEnsemble};
use super::{Attribution, ExplainMode, Players};
use crate::cohort::{FeatureValue, PatientRecord};
use crate::error::{Error, Result};
use crate::models::{Classifier, Family, ModelParams, TrainedModel};

pub const DEFAULT_PERMUTATIONS: usize = 64;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplainRequest {
    #[serde(default)]
    pub mode: Option<ExplainMode>,
    #[serde(default)]
    pub n_permutations: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExplanation {
    pub family: Family,
    pub prediction: f64,
    pub force: ForceExplanation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_path: Option<DecisionPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<NeighborSet>,
}

/// Tree models use path-dependent values; other families enumerate when
/// the game is small enough and sample permutations otherwise.
pub fn default_mode(family: Family, n_players: usize) -> ExplainMode {
    match family {
        Family::Dt | Family::Rf => ExplainMode::Tree,
        _ if n_players <= MAX_EXACT_PLAYERS => ExplainMode::Exact,
        _ => ExplainMode::Sampled,
    }
}

/// Raw per-feature values shown next to attributions: numbers for
/// continuous features (after height imputation), category labels otherwise.
pub fn display_values(model: &TrainedModel, record: &PatientRecord) -> Result<Vec<Value>> {
    let rec = model.complete_record(record)?;
    model
        .schema
        .features
        .iter()
        .zip(&rec.values)
        .map(|(f, v)| match *v {
            FeatureValue::Continuous(Some(x)) => Ok(json!(x)),
            FeatureValue::Continuous(None) => Err(Error::MissingValue {
                record: 0,
                feature: f.name.clone(),
            }),
            FeatureValue::Categorical(c) => Ok(json!(f.categories[c])),
        })
        .collect()
}

fn attribute(model: &TrainedModel, x: &[f64], players: &Players, mode: ExplainMode, req: &ExplainRequest) -> Result<Attribution> {
    if mode == ExplainMode::Tree {
        let ensemble = match &model.params {
            ModelParams::Tree(t) => TreeEnsemble::Tree(t),
            ModelParams::Forest(f) => TreeEnsemble::Forest(f),
            _ => {
                return Err(Error::Config(format!(
                    "tree mode needs a dt or rf model, not {}",
                    model.family.tag()
                )))
            }
        };
        return Ok(tree_shapley(ensemble, x)?.grouped(players));
    }
    if model.background.is_empty() {
        return Err(Error::Config("model artifact carries no background rows".into()));
    }
    let background = BackgroundSet::from_rows(model.background.clone());
    match mode {
        ExplainMode::Exact => shapley_exact(&model.params, x, &background, players),
        _ => shapley_sampled(
            &model.params,
            x,
            &background,
            players,
            req.n_permutations.unwrap_or(DEFAULT_PERMUTATIONS),
            req.seed,
        ),
    }
}

/// Attribution over source features plus the family-specific view:
/// the decision path for trees, the neighbor set for k-NN.
pub fn explain_record(model: &TrainedModel, record: &PatientRecord, req: &ExplainRequest) -> Result<ModelExplanation> {
    let x = model.prepare(record)?;
    let players = Players::features(&model.columns);
    let mode = req.mode.unwrap_or_else(|| default_mode(model.family, players.len()));
    let attribution = attribute(model, &x, &players, mode, req)?;
    let force = force_plot_data(&attribution, &display_values(model, record)?)?;
    let decision_path = match &model.params {
        ModelParams::Tree(t) => Some(decision_path(t, &x, &model.standardizer, &model.columns)?),
        _ => None,
    };
    let neighbors = match &model.params {
        ModelParams::Knn(k) => Some(knn_neighbors(k, &x, &model.standardizer)?),
        _ => None,
    };
    Ok(ModelExplanation {
        family: model.family,
        prediction: model.params.predict_row(&x),
        force,
        decision_path,
        neighbors,
    })
}
