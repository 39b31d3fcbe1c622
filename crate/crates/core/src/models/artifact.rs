use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, Family, Hyperparams, ModelParams};
use crate::cohort::{CohortTable, FeatureSchema, PatientRecord};
use crate::error::{Error, Result};
use crate::preprocess::{columns_for, encode_record, impute_heights, BmiRegression, ColumnMeta, FeatureMatrix, StandardizerState};
use crate::stats::MeanStd;

pub const FORMAT_VERSION: u32 = 1;

/// A fitted model bundled with everything needed to score raw records.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub family: Family,
    pub schema: FeatureSchema,
    pub columns: Vec<ColumnMeta>,
    pub standardizer: StandardizerState,
    pub bmi_regression: Option<BmiRegression>,
    pub params: ModelParams,
    /// Standardized training rows used to marginalize absent features.
    pub background: Vec<Vec<f64>>,
    pub hyperparameters: Hyperparams,
    pub metrics: BTreeMap<String, MeanStd>,
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    format_version: u32,
    family: Family,
    schema: &'a FeatureSchema,
    columns: &'a [ColumnMeta],
    standardizer: &'a StandardizerState,
    bmi_regression: &'a Option<BmiRegression>,
    parameters: &'a ModelParams,
    background: &'a [Vec<f64>],
    hyperparameters: &'a Hyperparams,
    metrics: &'a BTreeMap<String, MeanStd>,
}

#[derive(Deserialize)]
struct Document {
    family: Family,
    schema: FeatureSchema,
    columns: Vec<ColumnMeta>,
    standardizer: StandardizerState,
    #[serde(default)]
    bmi_regression: Option<BmiRegression>,
    parameters: serde_json::Value,
    #[serde(default)]
    background: Vec<Vec<f64>>,
    #[serde(default)]
    hyperparameters: Hyperparams,
    #[serde(default)]
    metrics: BTreeMap<String, MeanStd>,
}

impl TrainedModel {
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Fills a missing height from weight with the embedded regression.
    pub fn complete_record(&self, record: &PatientRecord) -> Result<PatientRecord> {
        let Some(reg) = &self.bmi_regression else {
            return Ok(record.clone());
        };
        if !record.values.iter().any(|v| v.is_missing()) {
            return Ok(record.clone());
        }
        let table = CohortTable {
            schema: self.schema.clone(),
            records: vec![record.clone()],
        };
        let (done, _) = impute_heights(&table, reg)?;
        done.records.into_iter().next().ok_or_else(|| Error::MissingValue {
            record: 0,
            feature: "weight".into(),
        })
    }

    /// One-hot encoded row in raw units.
    pub fn encode_raw(&self, record: &PatientRecord) -> Result<Vec<f64>> {
        let rec = self.complete_record(record)?;
        encode_record(&self.schema, &rec, 0)
    }

    pub fn standardize_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.n_columns() {
            return Err(Error::ColumnMismatch(format!(
                "row has {} values, model expects {}",
                raw.len(),
                self.n_columns()
            )));
        }
        let mut x = raw.to_vec();
        self.standardizer.transform_row(&mut x);
        Ok(x)
    }

    /// Standardized model input for a raw record.
    pub fn prepare(&self, record: &PatientRecord) -> Result<Vec<f64>> {
        self.standardize_row(&self.encode_raw(record)?)
    }

    pub fn predict_proba(&self, record: &PatientRecord) -> Result<f64> {
        Ok(self.params.predict_row(&self.prepare(record)?))
    }

    pub fn predict_label(&self, record: &PatientRecord, threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict_proba(record)? >= threshold))
    }

    /// Probability for a row already standardized with the embedded state.
    pub fn predict_standardized(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_columns() {
            return Err(Error::ColumnMismatch(format!(
                "row has {} values, model expects {}",
                x.len(),
                self.n_columns()
            )));
        }
        Ok(self.params.predict_row(x))
    }

    pub fn background_matrix(&self) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(self.columns.clone(), Vec::new(), Vec::new()).expect("empty matrix");
        for row in &self.background {
            m.push_row(row, 0);
        }
        m.standardized = true;
        m
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DocumentRef {
            format_version: FORMAT_VERSION,
            family: self.family,
            schema: &self.schema,
            columns: &self.columns,
            standardizer: &self.standardizer,
            bmi_regression: &self.bmi_regression,
            parameters: &self.params,
            background: &self.background,
            hyperparameters: &self.hyperparameters,
            metrics: &self.metrics,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Format("missing `format_version`".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::VersionMismatch {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let doc: Document = serde_json::from_value(value)?;
        let params = ModelParams::from_value(doc.family, doc.parameters)?;
        let model = TrainedModel {
            family: doc.family,
            schema: doc.schema,
            columns: doc.columns,
            standardizer: doc.standardizer,
            bmi_regression: doc.bmi_regression,
            params,
            background: doc.background,
            hyperparameters: doc.hyperparameters,
            metrics: doc.metrics,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        if self.columns != columns_for(&self.schema) {
            return Err(Error::Format("column metadata does not match the embedded schema".into()));
        }
        let p = self.n_columns();
        if self.standardizer.columns != self.column_names() {
            return Err(Error::Format("standardizer columns do not match the model columns".into()));
        }
        if self.params.n_inputs() != p {
            return Err(Error::Format(format!(
                "{} parameters expect {} inputs, model has {p} columns",
                self.family,
                self.params.n_inputs()
            )));
        }
        if self.params.family() != self.family {
            return Err(Error::Format("family tag does not match parameters".into()));
        }
        if self.background.iter().any(|r| r.len() != p) {
            return Err(Error::Format("background rows have the wrong width".into()));
        }
        Ok(())
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, model.to_json()? + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainedModel::from_json(&text)
}
