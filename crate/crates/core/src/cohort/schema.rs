use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TARGET_NAME: &str = "mortality_28d";

pub const SERVICE_UNITS: [&str; 5] = ["CCU", "CSRU", "MICU", "SICU", "TSICU"];
pub const GENDERS: [&str; 2] = ["M", "F"];
pub const ETHNICITIES: [&str; 5] = ["WHITE", "BLACK", "HISPANIC", "ASIAN", "OTHER"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    pub unit: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl FeatureDescriptor {
    pub fn continuous(name: &str, unit: &str) -> Self {
        FeatureDescriptor {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            unit: unit.to_string(),
            categories: Vec::new(),
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        FeatureDescriptor {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            unit: String::new(),
            categories: categories.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == FeatureKind::Categorical
    }

    pub fn category_index(&self, value: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == value)
    }
}

/// Ordered feature list plus the name of the binary target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDescriptor>,
    pub target: String,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        let schema = FeatureSchema {
            features,
            target: TARGET_NAME.to_string(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            match f.kind {
                FeatureKind::Categorical => {
                    if f.categories.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical feature `{}` has no categories",
                            f.name
                        )));
                    }
                    let mut cats = HashSet::new();
                    for c in &f.categories {
                        if !cats.insert(c.as_str()) {
                            return Err(Error::Schema(format!(
                                "feature `{}` lists category `{c}` twice",
                                f.name
                            )));
                        }
                    }
                }
                FeatureKind::Continuous => {
                    if !f.categories.is_empty() {
                        return Err(Error::Schema(format!(
                            "continuous feature `{}` must not list categories",
                            f.name
                        )));
                    }
                }
            }
        }
        if seen.contains(self.target.as_str()) {
            return Err(Error::Schema(format!(
                "target `{}` collides with a feature name",
                self.target
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureDescriptor> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }
}

/// The fixed schema: demographics, labs, severity scores and vitals.
pub fn default_schema() -> FeatureSchema {
    use FeatureDescriptor as F;
    let features = vec![
        F::categorical("service_unit", &SERVICE_UNITS),
        F::categorical("gender", &GENDERS),
        F::categorical("ethnicity", &ETHNICITIES),
        F::continuous("age", "years"),
        F::continuous("height", "m"),
        F::continuous("weight", "kg"),
        F::continuous("bmi", "kg/m²"),
        F::continuous("length_of_stay", "days"),
        F::continuous("bun", "mg/dL"),
        F::continuous("chloride", "mEq/L"),
        F::continuous("creatinine", "mg/dL"),
        F::continuous("hemoglobin", "g/dL"),
        F::continuous("platelet", "K/µL"),
        F::continuous("potassium", "mEq/L"),
        F::continuous("sodium", "mEq/L"),
        F::continuous("total_co2", "mEq/L"),
        F::continuous("wbc", "K/µL"),
        F::continuous("temperature", "°C"),
        F::continuous("heart_rate", "bpm"),
        F::continuous("spo2", "%"),
        F::continuous("sys_bp", "mmHg"),
        F::continuous("dias_bp", "mmHg"),
        F::continuous("map", "mmHg"),
        F::continuous("sofa", "points"),
        F::continuous("egfr", "mL/min/1.73m²"),
    ];
    FeatureSchema::new(features).expect("default schema is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_five_service_units() {
        let s = default_schema();
        let unit = s.feature("service_unit").unwrap();
        assert_eq!(unit.categories, vec!["CCU", "CSRU", "MICU", "SICU", "TSICU"]);
    }

    #[test]
    fn bun_is_in_mg_per_dl() {
        let s = default_schema();
        assert_eq!(s.feature("bun").unwrap().unit, "mg/dL");
        assert_eq!(s.len(), 25);
    }

    #[test]
    fn default_schema_is_deterministic() {
        assert_eq!(default_schema(), default_schema());
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = FeatureSchema::new(vec![
            FeatureDescriptor::continuous("age", "years"),
            FeatureDescriptor::continuous("age", "years"),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn duplicate_categories_rejected() {
        let err =
            FeatureSchema::new(vec![FeatureDescriptor::categorical("g", &["M", "M"])]).unwrap_err();
        assert!(err.to_string().contains("twice"));
        assert!(FeatureSchema::new(vec![FeatureDescriptor::categorical("g", &[])]).is_err());
    }
}
