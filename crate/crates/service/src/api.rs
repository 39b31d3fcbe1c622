use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use mortrisk::cohort::{parse_feature_value, record_from_map, FeatureKind, PatientRecord, TARGET_NAME};
use mortrisk::cohort::{FeatureSchema, GeneratorConfig};
use mortrisk::explain::{explain_record, DecisionPath, ExplainMode, ExplainRequest, ForceExplanation, NeighborSet};
use mortrisk::models::TrainedModel;
use mortrisk::stats::MeanStd;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::registry::{ModelRegistry, RegistryEntry};
use crate::ServiceError;

/// Largest what-if batch accepted in one request.
pub const MAX_PERTURBATIONS: usize = 64;

pub struct AppState {
    pub registry: ModelRegistry,
    /// Schema served when the registry is empty.
    pub fallback_schema: FeatureSchema,
}

pub fn routes(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/schema", get(handle_schema))
        .route("/api/v1/models", get(handle_models))
        .route("/api/v1/predict", post(handle_predict))
        .route("/api/v1/explain", post(handle_explain))
        .route("/api/v1/whatif", post(handle_whatif))
        .with_state(state)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DisplayRange {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeatureDocument {
    pub name: String,
    /// `continuous`, `categorical`, or `target`.
    pub kind: String,
    pub unit: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<DisplayRange>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SchemaDocument {
    pub target: String,
    pub features: Vec<FeatureDocument>,
}

pub fn schema_document(schema: &FeatureSchema) -> SchemaDocument {
    let population = GeneratorConfig::default().continuous;
    let mut features: Vec<FeatureDocument> = schema
        .features
        .iter()
        .map(|f| FeatureDocument {
            name: f.name.clone(),
            kind: match f.kind {
                FeatureKind::Continuous => "continuous".into(),
                FeatureKind::Categorical => "categorical".into(),
            },
            unit: f.unit.clone(),
            categories: f.categories.clone(),
            required: !mortrisk::cohort::OPTIONAL_FEATURES.contains(&f.name.as_str()),
            display: population.get(&f.name).map(|d| DisplayRange {
                mean: d.mean,
                sd: d.sd,
                min: d.min,
                max: d.max,
                text: format!("{} ± {}", d.mean, d.sd),
            }),
        })
        .collect();
    features.push(FeatureDocument {
        name: TARGET_NAME.into(),
        kind: "target".into(),
        unit: String::new(),
        categories: vec!["0".into(), "1".into()],
        required: false,
        display: None,
    });
    SchemaDocument {
        target: TARGET_NAME.into(),
        features,
    }
}

async fn handle_schema(State(state): State<Arc<AppState>>) -> Json<SchemaDocument> {
    let schema = state.registry.schema().unwrap_or(&state.fallback_schema);
    Json(schema_document(schema))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelSummary {
    pub tag: String,
    pub family: String,
    pub trained_at: Option<String>,
    pub metrics: BTreeMap<String, MeanStd>,
    pub hyperparameters: BTreeMap<String, f64>,
}

async fn handle_models(State(state): State<Arc<AppState>>) -> Json<Vec<ModelSummary>> {
    Json(
        state
            .registry
            .entries()
            .map(|(tag, e)| ModelSummary {
                tag: tag.clone(),
                family: e.model.family.display_name().into(),
                trained_at: e.trained_at.clone(),
                metrics: e.model.metrics.clone(),
                hyperparameters: e.model.hyperparameters.clone(),
            })
            .collect(),
    )
}

fn parse_body(body: &Bytes) -> Result<Map<String, Value>, ServiceError> {
    let v: Value =
        serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("body is not valid JSON: {e}")))?;
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(ServiceError::invalid("body", "expected a JSON object")),
    }
}

fn model_entry<'a>(state: &'a AppState, body: &Map<String, Value>) -> Result<&'a RegistryEntry, ServiceError> {
    let tag = body
        .get("model")
        .and_then(Value::as_str)
        .ok_or_else(|| ServiceError::invalid("model", "a model tag string is required"))?;
    state
        .registry
        .get(tag)
        .ok_or_else(|| ServiceError::UnknownModel(tag.to_string()))
}

fn features(body: &Map<String, Value>) -> Result<&Map<String, Value>, ServiceError> {
    body.get("features")
        .and_then(Value::as_object)
        .ok_or_else(|| ServiceError::invalid("features", "an object mapping feature names to values is required"))
}

fn explain_options(body: &Map<String, Value>) -> Result<ExplainRequest, ServiceError> {
    let mode = match body.get("mode") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            serde_json::from_value::<ExplainMode>(v.clone())
                .map_err(|_| ServiceError::invalid("mode", "expected one of exact, sampled, tree"))?,
        ),
    };
    let n_permutations = match body.get("n_permutations") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(n) if (1..=10_000).contains(&n) => Some(n as usize),
            _ => return Err(ServiceError::invalid("n_permutations", "expected an integer in 1..=10000")),
        },
    };
    let seed = match body.get("seed") {
        None | Some(Value::Null) => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ServiceError::invalid("seed", "expected a non-negative integer"))?,
    };
    Ok(ExplainRequest {
        mode,
        n_permutations,
        seed,
    })
}

fn threshold(body: &Map<String, Value>) -> Result<f64, ServiceError> {
    match body.get("threshold") {
        None | Some(Value::Null) => Ok(0.5),
        Some(v) => match v.as_f64() {
            Some(t) if (0.0..=1.0).contains(&t) => Ok(t),
            _ => Err(ServiceError::invalid("threshold", "expected a number in [0, 1]")),
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredictResponse {
    pub model: String,
    pub probability: f64,
    pub label: u8,
    pub threshold: f64,
}

async fn handle_predict(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<PredictResponse>, ServiceError> {
    let body = parse_body(&body)?;
    let entry = model_entry(&state, &body)?;
    let record = record_from_map(&entry.model.schema, features(&body)?)?;
    let threshold = threshold(&body)?;
    let probability = entry.model.predict_proba(&record)?;
    Ok(Json(PredictResponse {
        model: entry.model.family.tag().into(),
        probability,
        label: u8::from(probability >= threshold),
        threshold,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExplainResponse {
    pub model: String,
    #[serde(flatten)]
    pub force: ForceExplanation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_path: Option<DecisionPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<NeighborSet>,
}

fn explain(model: &TrainedModel, record: &PatientRecord, req: &ExplainRequest) -> Result<ExplainResponse, ServiceError> {
    let e = explain_record(model, record, req)?;
    Ok(ExplainResponse {
        model: model.family.tag().into(),
        force: e.force,
        decision_path: e.decision_path,
        neighbors: e.neighbors,
    })
}

/// Runs CPU-heavy work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn handle_explain(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<ExplainResponse>, ServiceError> {
    let body = parse_body(&body)?;
    let entry = model_entry(&state, &body)?;
    let record = record_from_map(&entry.model.schema, features(&body)?)?;
    let req = explain_options(&body)?;
    let tag = entry.model.family.tag().to_string();
    let state = Arc::clone(&state);
    blocking(move || {
        let model = &state.registry.get(&tag).expect("entry exists").model;
        explain(model, &record, &req)
    })
    .await
    .map(Json)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Perturbation {
    pub feature: String,
    pub value: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WhatIfResult {
    pub perturbation: Perturbation,
    pub probability: f64,
    pub delta_vs_base: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<ExplainResponse>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WhatIfResponse {
    pub model: String,
    pub base_probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_explanation: Option<ExplainResponse>,
    pub results: Vec<WhatIfResult>,
}

fn perturbations(body: &Map<String, Value>, schema: &FeatureSchema) -> Result<Vec<Perturbation>, ServiceError> {
    let list = match body.get("perturbations") {
        None | Some(Value::Null) => return Ok(Vec::new()),
        Some(Value::Array(a)) => a,
        Some(_) => return Err(ServiceError::invalid("perturbations", "expected an array")),
    };
    if list.len() > MAX_PERTURBATIONS {
        return Err(ServiceError::OverBudget {
            requested: list.len(),
            max: MAX_PERTURBATIONS,
        });
    }
    list.iter()
        .enumerate()
        .map(|(i, p)| {
            let p: Perturbation = serde_json::from_value(p.clone()).map_err(|_| {
                ServiceError::invalid(format!("perturbations[{i}]"), "expected {\"feature\": name, \"value\": raw value}")
            })?;
            if schema.index_of(&p.feature).is_none() {
                return Err(ServiceError::invalid(
                    format!("perturbations[{i}].feature"),
                    format!("`{}` is not a feature of the schema", p.feature),
                ));
            }
            parse_feature_value(schema, &p.feature, &p.value).map_err(|e| {
                ServiceError::invalid(format!("perturbations[{i}].value"), e.to_string())
            })?;
            Ok(p)
        })
        .collect()
}

async fn handle_whatif(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<WhatIfResponse>, ServiceError> {
    let body = parse_body(&body)?;
    let entry = model_entry(&state, &body)?;
    let schema = &entry.model.schema;
    let perturbations = perturbations(&body, schema)?;
    let base_features = features(&body)?.clone();
    let base = record_from_map(schema, &base_features)?;
    let with_explanations = match body.get("explain") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(ServiceError::invalid("explain", "expected a boolean")),
    };
    let req = explain_options(&body)?;
    let mut records = Vec::with_capacity(perturbations.len());
    for (i, p) in perturbations.iter().enumerate() {
        let mut f = base_features.clone();
        f.insert(p.feature.clone(), p.value.clone());
        // A derived value left implicit in the base follows its inputs.
        records.push(record_from_map(schema, &f).map_err(|e| match ServiceError::from(e) {
            ServiceError::Invalid { detail, .. } => ServiceError::invalid(format!("perturbations[{i}]"), detail),
            other => other,
        })?);
    }
    let tag = entry.model.family.tag().to_string();
    let state = Arc::clone(&state);
    blocking(move || {
        let model = &state.registry.get(&tag).expect("entry exists").model;
        let base_probability = model.predict_proba(&base)?;
        let base_explanation = if with_explanations {
            Some(explain(model, &base, &req)?)
        } else {
            None
        };
        let results = perturbations
            .into_iter()
            .zip(&records)
            .map(|(p, rec)| {
                let probability = model.predict_proba(rec)?;
                Ok(WhatIfResult {
                    perturbation: p,
                    probability,
                    delta_vs_base: probability - base_probability,
                    explanation: if with_explanations {
                        Some(explain(model, rec, &req)?)
                    } else {
                        None
                    },
                })
            })
            .collect::<Result<Vec<_>, ServiceError>>()?;
        Ok(WhatIfResponse {
            model: tag,
            base_probability,
            base_explanation,
            results,
        })
    })
    .await
    .map(Json)
}
