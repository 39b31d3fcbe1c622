use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(labels: &[u8], test_fraction: f64, stratified: bool, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    let mut train = Vec::new();
    let groups: Vec<Vec<usize>> = if stratified {
        let g: Vec<Vec<usize>> = [0u8, 1]
            .iter()
            .map(|&c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
            .collect();
        if let Some(c) = g.iter().position(Vec::is_empty) {
            return Err(Error::Config(format!("class {c} has no members; cannot stratify")));
        }
        g
    } else {
        vec![(0..labels.len()).collect()]
    };
    for mut g in groups {
        g.shuffle(&mut rng);
        let n_test = (g.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&g[..n_test]);
        train.extend_from_slice(&g[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Seeded (optionally stratified) partition into training and test matrices.
pub fn train_test_split(
    matrix: &FeatureMatrix,
    test_fraction: f64,
    stratified: bool,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let idx = split_indices(matrix.labels(), test_fraction, stratified, seed)?;
    Ok((matrix.select_rows(&idx.train), matrix.select_rows(&idx.test)))
}
