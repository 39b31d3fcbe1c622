//! Patient schema, cohort tables and their CSV form, and the synthetic cohort generator.

mod features;
mod io;
mod schema;
mod synth;

pub use features::{derive_egfr, parse_feature_value, record_from_map, record_to_map, OPTIONAL_FEATURES};
pub use io::{format_sig6, load_cohort, read_cohort, save_cohort, write_cohort};
pub use schema::{
    default_schema, FeatureDescriptor, FeatureKind, FeatureSchema, ETHNICITIES, GENDERS,
    SERVICE_UNITS, TARGET_NAME,
};
pub use synth::{generate_synthetic_cohort, FeatureDistribution, GeneratorConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Continuous(Option<f64>),
    /// Index into the descriptor's category list.
    Categorical(usize),
}

impl FeatureValue {
    pub fn number(&self) -> Option<f64> {
        match *self {
            FeatureValue::Continuous(v) => v,
            FeatureValue::Categorical(_) => None,
        }
    }

    pub fn category(&self) -> Option<usize> {
        match *self {
            FeatureValue::Categorical(c) => Some(c),
            FeatureValue::Continuous(_) => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Continuous(None))
    }
}

/// One ICU stay. `values` follows schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub values: Vec<FeatureValue>,
    pub label: u8,
}

impl PatientRecord {
    pub fn get(&self, idx: usize) -> FeatureValue {
        self.values[idx]
    }

    pub fn number(&self, idx: usize) -> Option<f64> {
        self.values[idx].number()
    }

    pub fn set_number(&mut self, idx: usize, value: Option<f64>) {
        self.values[idx] = FeatureValue::Continuous(value);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortTable {
    pub schema: FeatureSchema,
    pub records: Vec<PatientRecord>,
}

impl CohortTable {
    pub fn new(schema: FeatureSchema, records: Vec<PatientRecord>) -> Result<Self> {
        let table = CohortTable { schema, records };
        table.validate()?;
        Ok(table)
    }

    pub fn empty(schema: FeatureSchema) -> Self {
        CohortTable {
            schema,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.records.iter().filter(|r| r.label == 1).count()
    }

    /// Checks every record against the schema. Row numbers in errors are 1-based data rows.
    pub fn validate(&self) -> Result<()> {
        for (i, rec) in self.records.iter().enumerate() {
            if rec.values.len() != self.schema.len() {
                return Err(Error::Schema(format!(
                    "record {i} has {} values, schema has {}",
                    rec.values.len(),
                    self.schema.len()
                )));
            }
            if rec.label > 1 {
                return Err(Error::Validation {
                    row: i + 1,
                    feature: self.schema.target.clone(),
                    value: rec.label.to_string(),
                });
            }
            for (f, v) in self.schema.features.iter().zip(&rec.values) {
                let ok = match (f.kind, v) {
                    (FeatureKind::Categorical, FeatureValue::Categorical(c)) => {
                        *c < f.categories.len()
                    }
                    (FeatureKind::Continuous, FeatureValue::Continuous(x)) => {
                        x.is_none_or(|x| x.is_finite())
                    }
                    _ => false,
                };
                if !ok {
                    return Err(Error::Validation {
                        row: i + 1,
                        feature: f.name.clone(),
                        value: format!("{v:?}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Numeric column view with `None` for missing or categorical entries.
    pub fn column(&self, idx: usize) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.number(idx)).collect()
    }

    pub fn with_records(&self, records: Vec<PatientRecord>) -> Self {
        CohortTable {
            schema: self.schema.clone(),
            records,
        }
    }
}
