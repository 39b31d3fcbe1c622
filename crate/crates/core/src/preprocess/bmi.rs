use serde::{Deserialize, Serialize};

use crate::cohort::CohortTable;
use crate::error::{Error, Result};

/// Ordinary least squares fit of BMI on weight, used to impute missing heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmiRegression {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub n_pairs: usize,
}

impl BmiRegression {
    /// Coefficients of the published full-cohort fit.
    pub const PUBLISHED: BmiRegression = BmiRegression {
        intercept: 5.6925,
        slope: 0.2769,
        r_squared: 0.737,
        n_pairs: 0,
    };

    pub fn predict(&self, weight: f64) -> f64 {
        self.intercept + self.slope * weight
    }
}

pub fn fit_bmi_regression(table: &CohortTable) -> Result<BmiRegression> {
    let (w_idx, b_idx) = weight_bmi_indices(table)?;
    let pairs: Vec<(f64, f64)> = table
        .records
        .iter()
        .filter_map(|r| Some((r.number(w_idx)?, r.number(b_idx)?)))
        .collect();
    ols(&pairs)
}

pub(crate) fn ols(pairs: &[(f64, f64)]) -> Result<BmiRegression> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 complete (weight, bmi) pairs, found {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("weight has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(BmiRegression {
        intercept,
        slope,
        r_squared,
        n_pairs: pairs.len(),
    })
}

fn weight_bmi_indices(table: &CohortTable) -> Result<(usize, usize)> {
    let w = table
        .schema
        .index_of("weight")
        .ok_or_else(|| Error::Schema("schema has no `weight` feature".into()))?;
    let b = table
        .schema
        .index_of("bmi")
        .ok_or_else(|| Error::Schema("schema has no `bmi` feature".into()))?;
    Ok((w, b))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub imputed: usize,
    pub dropped_missing_weight: usize,
    pub dropped_nonpositive_bmi: usize,
}

/// Fills missing heights from weight: BMI from the regression line, then
/// height = sqrt(weight / BMI). Records without weight are dropped; BMI is
/// recomputed for records that have height and weight but no BMI.
pub fn impute_heights(
    table: &CohortTable,
    model: &BmiRegression,
) -> Result<(CohortTable, ImputationReport)> {
    if !(model.intercept.is_finite() && model.slope.is_finite()) {
        return Err(Error::Config("BMI regression has non-finite coefficients".into()));
    }
    let (w_idx, b_idx) = weight_bmi_indices(table)?;
    let h_idx = table
        .schema
        .index_of("height")
        .ok_or_else(|| Error::Schema("schema has no `height` feature".into()))?;
    let mut report = ImputationReport::default();
    let mut out = Vec::with_capacity(table.len());
    for rec in &table.records {
        let Some(weight) = rec.number(w_idx) else {
            report.dropped_missing_weight += 1;
            continue;
        };
        let mut rec = rec.clone();
        match rec.number(h_idx) {
            None => {
                let bmi = model.predict(weight);
                if !(bmi > 0.0) || !(weight > 0.0) {
                    report.dropped_nonpositive_bmi += 1;
                    continue;
                }
                rec.set_number(b_idx, Some(bmi));
                rec.set_number(h_idx, Some((weight / bmi).sqrt()));
                report.imputed += 1;
            }
            Some(h) if rec.number(b_idx).is_none() && h > 0.0 => {
                rec.set_number(b_idx, Some(weight / (h * h)));
            }
            Some(_) => {}
        }
        out.push(rec);
    }
    Ok((table.with_records(out), report))
}
