use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

/// Estimated GFR (mL/min/1.73m²) from serum creatinine by the 2009 CKD-EPI
/// creatinine equation. `black` applies the 1.159 race coefficient.
pub fn compute_egfr(creatinine: f64, age: f64, sex: Sex, black: bool) -> Result<f64> {
    if !(creatinine > 0.0 && creatinine.is_finite()) {
        return Err(Error::Domain(format!("creatinine must be positive, got {creatinine}")));
    }
    if !(age > 0.0 && age.is_finite()) {
        return Err(Error::Domain(format!("age must be positive, got {age}")));
    }
    let (kappa, alpha, sex_factor) = match sex {
        Sex::Female => (0.7, -0.329, 1.018),
        Sex::Male => (0.9, -0.411, 1.0),
    };
    let ratio = creatinine / kappa;
    let race_factor = if black { 1.159 } else { 1.0 };
    Ok(141.0
        * ratio.min(1.0).powf(alpha)
        * ratio.max(1.0).powf(-1.209)
        * 0.993f64.powf(age)
        * sex_factor
        * race_factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reported_patient_values() {
        let a = compute_egfr(2.4, 73.7, Sex::Female, false).unwrap();
        assert!((a - 19.28).abs() < 0.05, "{a}");
        let b = compute_egfr(0.8, 52.2, Sex::Male, false).unwrap();
        assert!((b - 102.6).abs() < 0.1, "{b}");
    }

    #[test]
    fn young_female_at_kappa_approaches_ceiling() {
        let v = compute_egfr(0.7, 1e-9, Sex::Female, false).unwrap();
        assert!((v - 141.0 * 1.018).abs() < 1e-6);
    }

    #[test]
    fn race_coefficient_scales() {
        let a = compute_egfr(1.1, 60.0, Sex::Male, false).unwrap();
        let b = compute_egfr(1.1, 60.0, Sex::Male, true).unwrap();
        assert!((b / a - 1.159).abs() < 1e-12);
    }

    #[test]
    fn non_positive_inputs_rejected() {
        assert!(compute_egfr(0.0, 50.0, Sex::Male, false).is_err());
        assert!(compute_egfr(1.0, -3.0, Sex::Male, false).is_err());
        assert!(compute_egfr(f64::NAN, 3.0, Sex::Male, false).is_err());
    }
}
