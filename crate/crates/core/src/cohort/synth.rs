use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{default_schema, CohortTable, FeatureKind, FeatureValue, PatientRecord};
use crate::error::{Error, Result};
use crate::preprocess::{compute_egfr, Sex};
use crate::stats::sigmoid;

/// Population statistics for one continuous feature. Samples are drawn from a
/// normal truncated to `mean ± 3.5 sd`, intersected with `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureDistribution {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl FeatureDistribution {
    pub const fn new(mean: f64, sd: f64, min: f64, max: f64) -> Self {
        FeatureDistribution { mean, sd, min, max }
    }

    pub fn lower(&self) -> f64 {
        (self.mean - TRUNCATION * self.sd).max(self.min)
    }

    pub fn upper(&self) -> f64 {
        (self.mean + TRUNCATION * self.sd).min(self.max)
    }
}

const TRUNCATION: f64 = 3.5;
const CALIBRATION_STEPS: usize = 100;

/// Features computed from other features rather than sampled. Their
/// distribution entries only feed display ranges and signal standardization.
const DERIVED: [&str; 3] = ["height", "bmi", "egfr"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub prevalence: f64,
    pub continuous: BTreeMap<String, FeatureDistribution>,
    /// Category probabilities in schema category order.
    pub categorical: BTreeMap<String, Vec<f64>>,
    pub missing_height_rate: f64,
    pub missing_weight_rate: f64,
    /// Log-odds weight per standardized feature. Keys are feature names, or
    /// `feature=CATEGORY` for a category indicator.
    pub signal: BTreeMap<String, f64>,
    /// Slope of BMI on weight used to correlate the two.
    pub bmi_weight_slope: f64,
    /// Number of records that get one feature pushed to `mean + 6 sd`.
    pub outlier_injections: usize,
    /// Apply the eGFR race coefficient to records with ethnicity BLACK.
    pub egfr_race_adjustment: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let d = FeatureDistribution::new;
        let continuous: BTreeMap<String, FeatureDistribution> = [
            ("age", d(63.2, 16.2, 15.0, 110.0)),
            ("height", d(1.69, 0.10, 1.2, 2.2)),
            ("weight", d(81.0, 20.0, 30.0, 250.0)),
            ("bmi", d(28.1, 6.4, 12.0, 80.0)),
            ("length_of_stay", d(3.9, 6.4, 0.1, 100.0)),
            ("bun", d(22.4, 15.6, 2.0, 200.0)),
            ("chloride", d(104.0, 6.0, 70.0, 140.0)),
            ("creatinine", d(1.3, 1.0, 0.2, 15.0)),
            ("hemoglobin", d(10.5, 1.7, 3.0, 20.0)),
            ("platelet", d(220.0, 110.0, 5.0, 1000.0)),
            ("potassium", d(4.1, 0.5, 2.0, 8.0)),
            ("sodium", d(138.5, 4.5, 110.0, 170.0)),
            ("total_co2", d(25.5, 4.5, 5.0, 50.0)),
            ("wbc", d(10.5, 4.7, 0.5, 60.0)),
            ("temperature", d(36.9, 0.5, 33.0, 41.0)),
            ("heart_rate", d(83.9, 13.8, 30.0, 200.0)),
            ("spo2", d(97.0, 2.0, 70.0, 100.0)),
            ("sys_bp", d(119.9, 15.9, 60.0, 220.0)),
            ("dias_bp", d(60.0, 10.0, 25.0, 130.0)),
            ("map", d(77.9, 10.2, 35.0, 150.0)),
            ("sofa", d(4.1, 3.0, 0.0, 24.0)),
            ("egfr", d(70.0, 30.0, 1.0, 200.0)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let categorical = [
            ("service_unit", vec![0.15, 0.25, 0.35, 0.14, 0.11]),
            ("gender", vec![0.56, 0.44]),
            ("ethnicity", vec![0.70, 0.09, 0.04, 0.03, 0.14]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        GeneratorConfig {
            n: 5000,
            prevalence: 0.076,
            continuous,
            categorical,
            missing_height_rate: 0.30,
            missing_weight_rate: 0.05,
            signal: default_signal(),
            bmi_weight_slope: 0.2769,
            outlier_injections: 0,
            egfr_race_adjustment: false,
            seed: 0,
        }
    }
}

/// Strongest weights on age, BUN and the CSRU ward (protective); minor
/// weights on heart rate, hemoglobin and BMI.
pub fn default_signal() -> BTreeMap<String, f64> {
    [
        ("age", 1.0),
        ("bun", 0.9),
        ("service_unit=CSRU", -1.6),
        ("heart_rate", 0.45),
        ("hemoglobin", -0.45),
        ("bmi", -0.45),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let schema = default_schema();
        if self.n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(Error::Config("prevalence must lie in (0, 1)".into()));
        }
        for rate in [self.missing_height_rate, self.missing_weight_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config("missing rates must lie in [0, 1]".into()));
            }
        }
        for f in &schema.features {
            match f.kind {
                FeatureKind::Continuous => {
                    let d = self.continuous.get(&f.name).ok_or_else(|| {
                        Error::Config(format!("no distribution for `{}`", f.name))
                    })?;
                    if !(d.sd > 0.0) || !d.mean.is_finite() {
                        return Err(Error::Config(format!(
                            "`{}` needs a finite mean and sd > 0",
                            f.name
                        )));
                    }
                    if d.lower() >= d.upper() {
                        return Err(Error::Config(format!("`{}` has an empty range", f.name)));
                    }
                }
                FeatureKind::Categorical => {
                    let p = self.categorical.get(&f.name).ok_or_else(|| {
                        Error::Config(format!("no category probabilities for `{}`", f.name))
                    })?;
                    if p.len() != f.categories.len() || p.iter().any(|&x| x < 0.0) {
                        return Err(Error::Config(format!(
                            "`{}` needs {} non-negative probabilities",
                            f.name,
                            f.categories.len()
                        )));
                    }
                    if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return Err(Error::Config(format!(
                            "probabilities for `{}` must sum to 1",
                            f.name
                        )));
                    }
                }
            }
        }
        for key in self.signal.keys() {
            resolve_signal_key(&schema, key)?;
        }
        Ok(())
    }
}

enum SignalTerm {
    Continuous { idx: usize, mean: f64, sd: f64 },
    Indicator { idx: usize, category: usize, rate: f64 },
}

fn resolve_signal_key(schema: &super::FeatureSchema, key: &str) -> Result<(usize, Option<usize>)> {
    let (name, cat) = match key.split_once('=') {
        Some((n, c)) => (n, Some(c)),
        None => (key, None),
    };
    let idx = schema
        .index_of(name)
        .ok_or_else(|| Error::Config(format!("signal refers to unknown feature `{name}`")))?;
    let f = &schema.features[idx];
    match (f.kind, cat) {
        (FeatureKind::Continuous, None) => Ok((idx, None)),
        (FeatureKind::Categorical, Some(c)) => f
            .category_index(c)
            .map(|ci| (idx, Some(ci)))
            .ok_or_else(|| Error::Config(format!("unknown category `{c}` in signal key"))),
        _ => Err(Error::Config(format!(
            "signal key `{key}` must be `feature` for continuous or `feature=CATEGORY` for categorical"
        ))),
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, d: &FeatureDistribution) -> f64 {
    let normal = Normal::new(d.mean, d.sd).expect("sd validated");
    let (lo, hi) = (d.lower(), d.upper());
    for _ in 0..10_000 {
        let x = normal.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    rng.random_range(lo..=hi)
}

fn sample_category(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws a seeded synthetic cohort. The label intercept is bisected until the
/// empirical prevalence is within half a percentage point of the target (or
/// half a record, for cohorts under 100).
pub fn generate_synthetic_cohort(config: &GeneratorConfig) -> Result<CohortTable> {
    config.validate()?;
    let schema = default_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let idx = |name: &str| schema.index_of(name).expect("default schema feature");
    let (i_height, i_weight, i_bmi, i_egfr) =
        (idx("height"), idx("weight"), idx("bmi"), idx("egfr"));
    let (i_age, i_creat, i_gender, i_eth) =
        (idx("age"), idx("creatinine"), idx("gender"), idx("ethnicity"));
    let female = schema.features[i_gender].category_index("F").expect("F");
    let black = schema.features[i_eth].category_index("BLACK").expect("BLACK");

    let wd = config.continuous["weight"];
    let bd = config.continuous["bmi"];
    let slope = config.bmi_weight_slope;
    let bmi_intercept = bd.mean - slope * wd.mean;
    let resid_sd = (bd.sd * bd.sd - slope * slope * wd.sd * wd.sd).max(0.25).sqrt();

    let mut records = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let mut values = Vec::with_capacity(schema.len());
        for f in &schema.features {
            let v = match f.kind {
                FeatureKind::Categorical => {
                    FeatureValue::Categorical(sample_category(&mut rng, &config.categorical[&f.name]))
                }
                FeatureKind::Continuous if DERIVED.contains(&f.name.as_str()) => {
                    FeatureValue::Continuous(None)
                }
                FeatureKind::Continuous => {
                    FeatureValue::Continuous(Some(truncated_normal(&mut rng, &config.continuous[&f.name])))
                }
            };
            values.push(v);
        }
        let weight = values[i_weight].number().expect("sampled");
        let noise = FeatureDistribution::new(0.0, resid_sd, bd.min - bmi_intercept - slope * weight, bd.max);
        let bmi_target = bmi_intercept + slope * weight + truncated_normal(&mut rng, &noise);
        let height = (weight / bmi_target).sqrt();
        values[i_height] = FeatureValue::Continuous(Some(height));
        values[i_bmi] = FeatureValue::Continuous(Some(weight / (height * height)));

        let age = values[i_age].number().expect("sampled");
        let creat = values[i_creat].number().expect("sampled");
        let is_female = values[i_gender].category() == Some(female);
        let is_black = config.egfr_race_adjustment && values[i_eth].category() == Some(black);
        let sex = if is_female { Sex::Female } else { Sex::Male };
        let egfr = compute_egfr(creat, age, sex, is_black)?;
        values[i_egfr] = FeatureValue::Continuous(Some(egfr));
        records.push(PatientRecord { values, label: 0 });
    }

    // Signal terms standardize with the configured population statistics.
    let terms: Vec<(SignalTerm, f64)> = config
        .signal
        .iter()
        .map(|(key, &w)| {
            let (idx, cat) = resolve_signal_key(&schema, key)?;
            let f = &schema.features[idx];
            let term = match cat {
                None => {
                    let d = config.continuous[&f.name];
                    SignalTerm::Continuous { idx, mean: d.mean, sd: d.sd }
                }
                Some(category) => {
                    let rate = config.categorical[&f.name][category];
                    SignalTerm::Indicator { idx, category, rate }
                }
            };
            Ok((term, w))
        })
        .collect::<Result<_>>()?;

    let logits: Vec<f64> = records
        .iter()
        .map(|r| {
            terms
                .iter()
                .map(|(t, w)| match *t {
                    SignalTerm::Continuous { idx, mean, sd } => {
                        w * (r.number(idx).expect("complete before blanking") - mean) / sd
                    }
                    SignalTerm::Indicator { idx, category, rate } => {
                        let x = f64::from(u8::from(r.values[idx].category() == Some(category)));
                        let sd = (rate * (1.0 - rate)).sqrt().max(1e-12);
                        w * (x - rate) / sd
                    }
                })
                .sum()
        })
        .collect();
    let uniforms: Vec<f64> = (0..config.n).map(|_| rng.random::<f64>()).collect();

    let intercept = calibrate_intercept(&logits, &uniforms, config.prevalence)?;
    for ((r, l), u) in records.iter_mut().zip(&logits).zip(&uniforms) {
        r.label = u8::from(*u < sigmoid(intercept + l));
    }

    if config.outlier_injections > 0 {
        let candidates: Vec<usize> = schema
            .features
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                f.kind == FeatureKind::Continuous
                    && !DERIVED.contains(&f.name.as_str())
                    && f.name != "weight"
            })
            .map(|(i, _)| i)
            .collect();
        let count = config.outlier_injections.min(config.n);
        let targets = rand::seq::index::sample(&mut rng, config.n, count);
        for rec_idx in targets.iter() {
            let feat = candidates[rng.random_range(0..candidates.len())];
            let d = config.continuous[&schema.features[feat].name];
            records[rec_idx].set_number(feat, Some(d.mean + 6.0 * d.sd));
        }
    }

    for r in &mut records {
        let drop_height = rng.random::<f64>() < config.missing_height_rate;
        let drop_weight = rng.random::<f64>() < config.missing_weight_rate;
        if drop_height {
            r.set_number(i_height, None);
        }
        if drop_weight {
            r.set_number(i_weight, None);
        }
        if drop_height || drop_weight {
            r.set_number(i_bmi, None);
        }
    }

    Ok(CohortTable { schema, records })
}

fn calibrate_intercept(logits: &[f64], uniforms: &[f64], prevalence: f64) -> Result<f64> {
    let n = logits.len() as f64;
    let tol = 0.005_f64.max(0.5 / n);
    let rate = |b: f64| {
        logits
            .iter()
            .zip(uniforms)
            .filter(|(l, u)| **u < sigmoid(b + **l))
            .count() as f64
            / n
    };
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid);
        if (r - prevalence).abs() <= tol {
            return Ok(mid);
        }
        if r < prevalence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!(
        "prevalence {prevalence} not reached within {tol} after {CALIBRATION_STEPS} bisection steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n,
            seed,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn prevalence_is_calibrated() {
        let t = generate_synthetic_cohort(&config(10_000, 3)).unwrap();
        let pos = t.positives();
        assert!((710..=810).contains(&pos), "positives {pos}");
    }

    #[test]
    fn same_seed_same_table() {
        let a = generate_synthetic_cohort(&config(500, 9)).unwrap();
        let b = generate_synthetic_cohort(&config(500, 9)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_cohort(&config(500, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn age_mean_matches_population() {
        let t = generate_synthetic_cohort(&config(10_000, 1)).unwrap();
        let i = t.schema.index_of("age").unwrap();
        let ages: Vec<f64> = t.column(i).into_iter().flatten().collect();
        let mean = ages.iter().sum::<f64>() / ages.len() as f64;
        assert!((mean - 63.2).abs() < 0.6, "mean age {mean}");
    }

    #[test]
    fn bmi_consistent_and_categories_valid() {
        let t = generate_synthetic_cohort(&config(3000, 5)).unwrap();
        t.validate().unwrap();
        let (h, w, b) = (
            t.schema.index_of("height").unwrap(),
            t.schema.index_of("weight").unwrap(),
            t.schema.index_of("bmi").unwrap(),
        );
        let mut complete = 0;
        for r in &t.records {
            if let (Some(hv), Some(wv)) = (r.number(h), r.number(w)) {
                complete += 1;
                let bmi = r.number(b).unwrap();
                assert!((bmi - wv / (hv * hv)).abs() < 1e-9);
            }
        }
        assert!(complete > 1500);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = config(10, 0);
        c.prevalence = 1.5;
        assert!(generate_synthetic_cohort(&c).is_err());
        let mut c = config(10, 0);
        c.categorical.get_mut("gender").unwrap()[0] = 0.9;
        assert!(c.validate().is_err());
        let mut c = config(10, 0);
        c.continuous.get_mut("age").unwrap().sd = 0.0;
        assert!(c.validate().is_err());
        let mut c = config(0, 0);
        c.n = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn outlier_injection_produces_far_values() {
        let mut c = config(400, 2);
        c.outlier_injections = 5;
        let t = generate_synthetic_cohort(&c).unwrap();
        let far = t
            .records
            .iter()
            .filter(|r| {
                t.schema.features.iter().enumerate().any(|(i, f)| {
                    r.number(i).is_some_and(|x| {
                        let d = c.continuous[&f.name];
                        x > d.mean + 5.0 * d.sd
                    })
                })
            })
            .count();
        assert_eq!(far, 5);
    }
}
