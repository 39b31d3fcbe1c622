use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    /// Per-column distance weights; `None` means uniform.
    pub weights: Option<Vec<f64>>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 16, weights: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub weights: Vec<f64>,
    pub n_cols: usize,
    pub data: Vec<f64>,
    pub labels: Vec<u8>,
}

impl KnnModel {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * (x - y) * (x - y))
            .sum()
    }

    /// The `k` nearest stored rows as `(row, distance)`, nearest first;
    /// equal distances order by row index.
    pub fn neighbors(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = (0..self.n_rows()).map(|i| (i, self.distance(x, self.row(i)))).collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d
    }
}

impl Classifier for KnnModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        let nb = self.neighbors(x);
        nb.iter().filter(|(i, _)| self.labels[*i] == 1).count() as f64 / nb.len() as f64
    }

    fn n_inputs(&self) -> usize {
        self.n_cols
    }
}

pub fn train_knn(matrix: &FeatureMatrix, config: &KnnConfig) -> Result<KnnModel> {
    let p = matrix.n_cols();
    if config.k == 0 || config.k > matrix.n_rows() {
        return Err(Error::Config(format!(
            "k must lie in 1..={} (training rows), got {}",
            matrix.n_rows(),
            config.k
        )));
    }
    let weights = config.weights.clone().unwrap_or_else(|| vec![1.0; p]);
    if weights.len() != p {
        return Err(Error::ColumnMismatch(format!("{} weights for {p} columns", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Config("k-NN weights must be finite and non-negative".into()));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Config("k-NN weight vector is all zero".into()));
    }
    Ok(KnnModel {
        k: config.k,
        weights,
        n_cols: p,
        data: matrix.data().to_vec(),
        labels: matrix.labels().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> FeatureMatrix {
        FeatureMatrix::from_rows(
            &[vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![10.0]],
            &[0, 0, 1, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn k_equal_rows_gives_base_rate() {
        let model = train_knn(&line(), &KnnConfig { k: 5, weights: None }).unwrap();
        assert_eq!(model.predict_row(&[-100.0]), 0.6);
    }

    #[test]
    fn exact_match_with_k_one() {
        let model = train_knn(&line(), &KnnConfig { k: 1, weights: None }).unwrap();
        assert_eq!(model.predict_row(&[2.0]), 1.0);
        assert_eq!(model.neighbors(&[2.0]), vec![(2, 0.0)]);
    }

    #[test]
    fn distance_ties_go_to_lower_row() {
        let model = train_knn(&line(), &KnnConfig { k: 1, weights: None }).unwrap();
        assert_eq!(model.neighbors(&[0.5])[0].0, 0);
    }

    #[test]
    fn invalid_configs() {
        let m = line();
        assert!(train_knn(&m, &KnnConfig { k: 6, weights: None }).is_err());
        assert!(train_knn(&m, &KnnConfig { k: 0, weights: None }).is_err());
        assert!(train_knn(&m, &KnnConfig { k: 2, weights: Some(vec![0.0]) }).is_err());
    }
}
