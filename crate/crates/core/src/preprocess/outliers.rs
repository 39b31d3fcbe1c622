use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortTable, FeatureKind};
use crate::stats;

/// Features allowed to be missing when the cleaning rules run: height is
/// imputed from weight and BMI follows from height and weight.
pub const IMPUTABLE: [&str; 3] = ["height", "weight", "bmi"];

pub const OUTLIER_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub input: usize,
    pub retained: usize,
    pub dropped_missing: usize,
    pub dropped_outlier: usize,
    /// Records attributed to each feature, under the first rule that fired.
    pub missing_by_feature: BTreeMap<String, usize>,
    pub outliers_by_feature: BTreeMap<String, usize>,
    /// The `[mean - 3 sd, mean + 3 sd]` band per continuous feature, computed on the input.
    pub bands: BTreeMap<String, (f64, f64)>,
}

impl OutlierReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped_missing + self.dropped_outlier
    }
}

/// Drops records missing any feature other than height, weight or BMI, then
/// records with any value outside its feature's 3-sigma band. Band statistics
/// come from the non-missing values of the input table in a single pass.
pub fn remove_outliers(table: &CohortTable) -> (CohortTable, OutlierReport) {
    let schema = &table.schema;
    let mut report = OutlierReport {
        input: table.len(),
        ..OutlierReport::default()
    };

    let mut bands: Vec<Option<(f64, f64)>> = vec![None; schema.len()];
    for (i, f) in schema.features.iter().enumerate() {
        if f.kind != FeatureKind::Continuous {
            continue;
        }
        let vals: Vec<f64> = table.column(i).into_iter().flatten().collect();
        if vals.is_empty() {
            continue;
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (m, sd) = (stats::mean(&vals), stats::std_dev(&vals));
        report
            .bands
            .insert(f.name.clone(), (m - OUTLIER_SIGMAS * sd, m + OUTLIER_SIGMAS * sd));
        // A constant column cannot hold an outlier; skip it so rounding in the
        // mean cannot push identical values out of a zero-width band.
        if lo < hi {
            bands[i] = Some((m - OUTLIER_SIGMAS * sd, m + OUTLIER_SIGMAS * sd));
        }
    }

    let mut kept = Vec::with_capacity(table.len());
    'records: for rec in &table.records {
        for (i, f) in schema.features.iter().enumerate() {
            if rec.values[i].is_missing() && !IMPUTABLE.contains(&f.name.as_str()) {
                report.dropped_missing += 1;
                *report.missing_by_feature.entry(f.name.clone()).or_default() += 1;
                continue 'records;
            }
        }
        for (i, f) in schema.features.iter().enumerate() {
            if let (Some(x), Some((lo, hi))) = (rec.number(i), bands[i]) {
                if x < lo || x > hi {
                    report.dropped_outlier += 1;
                    *report.outliers_by_feature.entry(f.name.clone()).or_default() += 1;
                    continue 'records;
                }
            }
        }
        kept.push(rec.clone());
    }
    report.retained = kept.len();
    (table.with_records(kept), report)
}
