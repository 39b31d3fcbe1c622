//! Cleaning, imputation, eGFR, encoding, standardization and splitting.

mod bmi;
mod egfr;
mod encode;
mod outliers;
mod split;
mod standardize;

pub use bmi::{fit_bmi_regression, impute_heights, BmiRegression, ImputationReport};
pub use egfr::{compute_egfr, Sex};
pub use encode::{columns_for, encode, encode_record, ColumnKind, ColumnMeta, FeatureMatrix};
pub use outliers::{remove_outliers, OutlierReport, IMPUTABLE, OUTLIER_SIGMAS};
pub use split::{split_indices, train_test_split, SplitIndices};
pub use standardize::{apply_standardizer, fit_standardizer, StandardizerState};

use serde::{Deserialize, Serialize};

use crate::cohort::CohortTable;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input: usize,
    pub missing: OutlierReport,
    pub regression: BmiRegression,
    pub imputation: ImputationReport,
    pub outliers: OutlierReport,
    pub retained: usize,
}

/// The cleaning chain: drop records with missing non-imputable values,
/// impute heights from weight, then apply the 3-sigma filter.
pub fn clean_cohort(table: &CohortTable, regression: Option<BmiRegression>) -> Result<(CohortTable, CleaningReport)> {
    let input = table.len();
    let (complete, missing) = drop_incomplete(table);
    let regression = match regression {
        Some(r) => r,
        None => fit_bmi_regression(&complete)?,
    };
    let (imputed, imputation) = impute_heights(&complete, &regression)?;
    let (clean, outliers) = remove_outliers(&imputed);
    let retained = clean.len();
    Ok((
        clean,
        CleaningReport {
            input,
            missing,
            regression,
            imputation,
            outliers,
            retained,
        },
    ))
}

/// Only the missing-value rule of [`remove_outliers`].
pub fn drop_incomplete(table: &CohortTable) -> (CohortTable, OutlierReport) {
    let mut report = OutlierReport {
        input: table.len(),
        ..OutlierReport::default()
    };
    let mut kept = Vec::new();
    'records: for rec in &table.records {
        for (i, f) in table.schema.features.iter().enumerate() {
            if rec.values[i].is_missing() && !IMPUTABLE.contains(&f.name.as_str()) {
                report.dropped_missing += 1;
                *report.missing_by_feature.entry(f.name.clone()).or_default() += 1;
                continue 'records;
            }
        }
        kept.push(rec.clone());
    }
    report.retained = kept.len();
    (table.with_records(kept), report)
}
