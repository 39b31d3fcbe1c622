use serde_json::{Map, Value};

use super::{FeatureSchema, FeatureValue, PatientRecord};
use crate::error::{Error, Result};
use crate::preprocess::{compute_egfr, Sex};

/// Features a feature map may omit or send as null. Height and BMI are
/// filled from weight at scoring time; eGFR is derived from creatinine, age
/// and gender.
pub const OPTIONAL_FEATURES: [&str; 3] = ["height", "bmi", "egfr"];

fn field(name: &str, detail: impl Into<String>) -> Error {
    Error::Field {
        field: name.to_string(),
        detail: detail.into(),
    }
}

/// Parses one feature value for `name` from JSON. Categorical features take
/// the category label; continuous ones a finite number (null when optional).
pub fn parse_feature_value(schema: &FeatureSchema, name: &str, value: &Value) -> Result<FeatureValue> {
    let f = schema
        .feature(name)
        .ok_or_else(|| field(name, "not a feature of the schema"))?;
    if f.is_categorical() {
        let label = value
            .as_str()
            .ok_or_else(|| field(name, format!("expected one of {}", f.categories.join(", "))))?;
        let c = f
            .category_index(label)
            .ok_or_else(|| field(name, format!("`{label}` is not one of {}", f.categories.join(", "))))?;
        return Ok(FeatureValue::Categorical(c));
    }
    match value {
        Value::Null if OPTIONAL_FEATURES.contains(&name) => Ok(FeatureValue::Continuous(None)),
        Value::Number(n) => match n.as_f64() {
            Some(x) if x.is_finite() => Ok(FeatureValue::Continuous(Some(x))),
            _ => Err(field(name, "number out of range")),
        },
        _ => Err(field(name, format!("expected a number in {}", f.unit))),
    }
}

/// Builds a record from a `{feature: value}` map. Unknown keys and missing
/// required features are rejected with the offending field named.
pub fn record_from_map(schema: &FeatureSchema, map: &Map<String, Value>) -> Result<PatientRecord> {
    if let Some(k) = map.keys().find(|k| schema.index_of(k).is_none()) {
        return Err(field(k, "not a feature of the schema"));
    }
    let mut values = Vec::with_capacity(schema.len());
    for f in &schema.features {
        match map.get(&f.name) {
            Some(v) => values.push(parse_feature_value(schema, &f.name, v)?),
            None if OPTIONAL_FEATURES.contains(&f.name.as_str()) => values.push(FeatureValue::Continuous(None)),
            None => return Err(field(&f.name, "required feature is missing")),
        }
    }
    let mut record = PatientRecord { values, label: 0 };
    derive_egfr(schema, &mut record)?;
    Ok(record)
}

/// Fills a missing eGFR from creatinine, age and gender (no race coefficient).
pub fn derive_egfr(schema: &FeatureSchema, record: &mut PatientRecord) -> Result<()> {
    let Some(e) = schema.index_of("egfr") else {
        return Ok(());
    };
    if !record.values[e].is_missing() {
        return Ok(());
    }
    let get = |name: &str| schema.index_of(name).map(|i| record.values[i]);
    let (Some(FeatureValue::Continuous(Some(creat))), Some(FeatureValue::Continuous(Some(age))), Some(FeatureValue::Categorical(g))) =
        (get("creatinine"), get("age"), get("gender"))
    else {
        return Err(field("egfr", "missing, and cannot be derived without creatinine, age and gender"));
    };
    let sex = match schema.feature("gender").map(|f| f.categories[g].as_str()) {
        Some("F") => Sex::Female,
        _ => Sex::Male,
    };
    let v = compute_egfr(creat, age, sex, false).map_err(|err| field("egfr", err.to_string()))?;
    record.values[e] = FeatureValue::Continuous(Some(v));
    Ok(())
}

/// Inverse of [`record_from_map`]: category labels and numbers (null for missing).
pub fn record_to_map(schema: &FeatureSchema, record: &PatientRecord) -> Map<String, Value> {
    schema
        .features
        .iter()
        .zip(&record.values)
        .map(|(f, v)| {
            let value = match *v {
                FeatureValue::Categorical(c) => Value::from(f.categories[c].clone()),
                FeatureValue::Continuous(Some(x)) => Value::from(x),
                FeatureValue::Continuous(None) => Value::Null,
            };
            (f.name.clone(), value)
        })
        .collect()
}
