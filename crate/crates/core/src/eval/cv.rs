use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Metrics;
use crate::error::{Error, Result};
use crate::models::{fit, Classifier, Family, Hyperparams};
use crate::preprocess::FeatureMatrix;
use crate::resample::{smote_nc_traced, SmoteConfig};
use crate::stats::MeanStd;

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Oversampling applied to the training folds only.
    pub smote: Option<SmoteConfig>,
    pub knn_weights: Option<Vec<f64>>,
    pub threshold: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 5,
            seed: 0,
            smote: Some(SmoteConfig::default()),
            knn_weights: None,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub metrics: Metrics,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Input-matrix indices of every parent and neighbor SMOTE used.
    pub smote_sources: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    pub auc: MeanStd,
    pub acc: MeanStd,
    pub rec: MeanStd,
    pub seed: u64,
}

/// Stratified fold id per row: each class is shuffled then dealt round-robin.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs k >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    for c in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.len() < k {
            return Err(Error::Config(format!(
                "class {c} has {} rows; every one of {k} folds needs both classes",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    Ok(fold)
}

pub fn kfold_cv(family: Family, hyper: &Hyperparams, matrix: &FeatureMatrix, opts: &CvOptions) -> Result<CvResult> {
    let assignment = stratified_folds(matrix.labels(), opts.k, opts.seed)?;
    let mut folds = Vec::with_capacity(opts.k);
    for f in 0..opts.k {
        let train_rows: Vec<usize> = (0..matrix.n_rows()).filter(|&i| assignment[i] != f).collect();
        let test_rows: Vec<usize> = (0..matrix.n_rows()).filter(|&i| assignment[i] == f).collect();
        let train = matrix.select_rows(&train_rows);
        let test = matrix.select_rows(&test_rows);
        let (train, smote_sources) = match &opts.smote {
            Some(cfg) => {
                let cfg = SmoteConfig {
                    seed: cfg.seed.wrapping_add(f as u64),
                    ..*cfg
                };
                let out = smote_nc_traced(&train, &cfg)?;
                let mut sources: Vec<usize> = out
                    .provenance
                    .iter()
                    .flat_map(|p| [p.parent, p.neighbor])
                    .map(|i| train_rows[i])
                    .collect();
                sources.sort_unstable();
                sources.dedup();
                (out.matrix, sources)
            }
            None => (train, Vec::new()),
        };
        let model = fit(family, hyper, &train, opts.seed.wrapping_add(f as u64), opts.knn_weights.as_deref())?;
        let scores = model.predict_proba(&test);
        folds.push(FoldResult {
            metrics: Metrics::compute(&scores, test.labels(), opts.threshold)?,
            train_rows,
            test_rows,
            smote_sources,
        });
    }
    let summary = |get: fn(&Metrics) -> f64| MeanStd::of(&folds.iter().map(|f| get(&f.metrics)).collect::<Vec<_>>());
    Ok(CvResult {
        auc: summary(|m| m.auc),
        acc: summary(|m| m.acc),
        rec: summary(|m| m.rec),
        folds,
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_seeded() {
        let labels: Vec<u8> = (0..103).map(|i| u8::from(i % 9 == 0)).collect();
        let a = stratified_folds(&labels, 5, 3).unwrap();
        assert_eq!(a, stratified_folds(&labels, 5, 3).unwrap());
        let pos: Vec<usize> = (0..5)
            .map(|f| (0..labels.len()).filter(|&i| a[i] == f && labels[i] == 1).count())
            .collect();
        assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
    }

    #[test]
    fn too_few_members_per_class() {
        assert!(stratified_folds(&[0, 0, 0, 1, 1, 1], 4, 0).is_err());
        assert!(stratified_folds(&[0, 1], 1, 0).is_err());
    }
}
