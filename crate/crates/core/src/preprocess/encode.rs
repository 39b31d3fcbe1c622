use serde::{Deserialize, Serialize};

use crate::cohort::{CohortTable, FeatureKind, FeatureSchema, FeatureValue, PatientRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Indicator { category: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    /// Display name: the feature name, or `feature=CATEGORY` for indicators.
    pub name: String,
    pub source: String,
    pub source_index: usize,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnMeta {
    pub fn is_continuous(&self) -> bool {
        self.kind == ColumnKind::Continuous
    }
}

pub fn columns_for(schema: &FeatureSchema) -> Vec<ColumnMeta> {
    let mut cols = Vec::new();
    for (i, f) in schema.features.iter().enumerate() {
        match f.kind {
            FeatureKind::Continuous => cols.push(ColumnMeta {
                name: f.name.clone(),
                source: f.name.clone(),
                source_index: i,
                kind: ColumnKind::Continuous,
            }),
            FeatureKind::Categorical => {
                for c in &f.categories {
                    cols.push(ColumnMeta {
                        name: format!("{}={c}", f.name),
                        source: f.name.clone(),
                        source_index: i,
                        kind: ColumnKind::Indicator { category: c.clone() },
                    });
                }
            }
        }
    }
    cols
}

/// Dense row-major design matrix with per-column metadata and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<ColumnMeta>,
    data: Vec<f64>,
    labels: Vec<u8>,
    pub standardized: bool,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<ColumnMeta>, data: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let p = columns.len();
        if (p == 0 && !data.is_empty()) || (p > 0 && data.len() != labels.len() * p) {
            return Err(Error::ColumnMismatch(format!(
                "{} values do not fill {} rows of {p} columns",
                data.len(),
                labels.len()
            )));
        }
        Ok(FeatureMatrix {
            columns,
            data,
            labels,
            standardized: false,
        })
    }

    /// Unlabelled-by-schema matrix with anonymous continuous columns `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let columns = (0..p)
            .map(|j| ColumnMeta {
                name: format!("x{j}"),
                source: format!("x{j}"),
                source_index: j,
                kind: ColumnKind::Continuous,
            })
            .collect();
        if rows.iter().any(|r| r.len() != p) || rows.len() != labels.len() {
            return Err(Error::ColumnMismatch("ragged rows or label count".into()));
        }
        FeatureMatrix::new(columns, rows.concat(), labels.to_vec())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let p = self.n_cols();
        &mut self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn column_values(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn push_row(&mut self, row: &[f64], label: u8) {
        assert_eq!(row.len(), self.n_cols(), "row width");
        self.data.extend_from_slice(row);
        self.labels.push(label);
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            data,
            labels,
            standardized: self.standardized,
        }
    }

    pub fn continuous_columns(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| self.columns[j].is_continuous()).collect()
    }

    /// Indicator column indices grouped by source feature, in column order.
    pub fn categorical_blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut last: Option<usize> = None;
        for (j, c) in self.columns.iter().enumerate() {
            if c.is_continuous() {
                last = None;
                continue;
            }
            if last == Some(c.source_index) {
                blocks.last_mut().expect("open block").push(j);
            } else {
                blocks.push(vec![j]);
                last = Some(c.source_index);
            }
        }
        blocks
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

pub fn encode_record(schema: &FeatureSchema, record: &PatientRecord, record_idx: usize) -> Result<Vec<f64>> {
    let mut row = Vec::new();
    for (f, v) in schema.features.iter().zip(&record.values) {
        match (f.kind, v) {
            (FeatureKind::Continuous, FeatureValue::Continuous(Some(x))) => row.push(*x),
            (FeatureKind::Continuous, FeatureValue::Continuous(None)) => {
                return Err(Error::MissingValue {
                    record: record_idx,
                    feature: f.name.clone(),
                })
            }
            (FeatureKind::Categorical, FeatureValue::Categorical(c)) => {
                row.extend((0..f.categories.len()).map(|k| if k == *c { 1.0 } else { 0.0 }));
            }
            _ => {
                return Err(Error::Validation {
                    row: record_idx + 1,
                    feature: f.name.clone(),
                    value: format!("{v:?}"),
                })
            }
        }
    }
    Ok(row)
}

/// Copies continuous features and one-hot encodes categorical ones in schema category order.
pub fn encode(table: &CohortTable) -> Result<FeatureMatrix> {
    let columns = columns_for(&table.schema);
    let mut data = Vec::with_capacity(table.len() * columns.len());
    for (i, rec) in table.records.iter().enumerate() {
        data.extend(encode_record(&table.schema, rec, i)?);
    }
    let labels = table.records.iter().map(|r| r.label).collect();
    FeatureMatrix::new(columns, data, labels)
}
