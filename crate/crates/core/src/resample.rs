//! SMOTE-NC minority oversampling on an encoded training matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k: usize,
    /// Minority/majority ratio after resampling.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn with_seed(seed: u64) -> Self {
        SmoteConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("SMOTE k must be at least 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "SMOTE target ratio must lie in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

/// How one synthetic row was built. Indices refer to rows of the input matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub row: usize,
    pub parent: usize,
    pub neighbor: usize,
    pub delta: f64,
    pub neighbors: Vec<usize>,
    /// Per categorical block: votes for each category among `neighbors`.
    pub mode_counts: Vec<Vec<usize>>,
}

impl Provenance {
    pub fn log_line(&self) -> String {
        let counts: Vec<String> = self
            .mode_counts
            .iter()
            .map(|c| c.iter().map(usize::to_string).collect::<Vec<_>>().join("/"))
            .collect();
        format!(
            "row={} parent={} neighbor={} delta={:.17} modes={}",
            self.row,
            self.parent,
            self.neighbor,
            self.delta,
            counts.join(",")
        )
    }
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    pub matrix: FeatureMatrix,
    pub minority_label: u8,
    pub provenance: Vec<Provenance>,
}

pub fn smote_nc(matrix: &FeatureMatrix, config: &SmoteConfig) -> Result<FeatureMatrix> {
    smote_nc_traced(matrix, config).map(|o| o.matrix)
}

/// SMOTE-NC returning the per-row provenance log alongside the matrix.
pub fn smote_nc_traced(matrix: &FeatureMatrix, config: &SmoteConfig) -> Result<SmoteOutput> {
    config.validate()?;
    let pos = matrix.positives();
    let neg = matrix.n_rows() - pos;
    let (minority_label, n_min, n_maj) = if pos <= neg { (1u8, pos, neg) } else { (0u8, neg, pos) };
    let target = (config.target_ratio * n_maj as f64 + 1e-9).floor() as usize;
    let mut out = SmoteOutput {
        matrix: matrix.clone(),
        minority_label,
        provenance: Vec::new(),
    };
    if target <= n_min {
        return Ok(out);
    }
    if n_min < config.k + 1 {
        return Err(Error::Config(format!(
            "minority class has {n_min} rows; SMOTE with k={} needs at least {}",
            config.k,
            config.k + 1
        )));
    }
    let cont = matrix.continuous_columns();
    let blocks = matrix.categorical_blocks();
    if cont.is_empty() {
        return Err(Error::Config("SMOTE-NC needs at least one continuous column".into()));
    }

    let minority: Vec<usize> = (0..matrix.n_rows()).filter(|&i| matrix.label(i) == minority_label).collect();
    let sds: Vec<f64> = cont
        .iter()
        .map(|&j| stats::std_dev(&minority.iter().map(|&i| matrix.get(i, j)).collect::<Vec<_>>()))
        .collect();
    let med2 = stats::median(&sds).powi(2);
    let cats: Vec<Vec<Option<usize>>> = minority.iter().map(|&i| categories_of(matrix.row(i), &blocks)).collect();

    let neighbor_cache: Vec<Vec<usize>> = (0..minority.len())
        .map(|a| {
            let mut d: Vec<(f64, usize)> = (0..minority.len())
                .filter(|&b| b != a)
                .map(|b| {
                    let ra = matrix.row(minority[a]);
                    let rb = matrix.row(minority[b]);
                    let mut s: f64 = cont.iter().map(|&j| (ra[j] - rb[j]).powi(2)).sum();
                    s += med2 * cats[a].iter().zip(&cats[b]).filter(|(x, y)| x != y).count() as f64;
                    (s, b)
                })
                .collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(minority[x.1].cmp(&minority[y.1])));
            d.truncate(config.k);
            d.into_iter().map(|(_, b)| b).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut row = vec![0.0; matrix.n_cols()];
    for _ in n_min..target {
        let a = rng.random_range(0..minority.len());
        let nbrs = &neighbor_cache[a];
        let b = nbrs[rng.random_range(0..nbrs.len())];
        let delta: f64 = rng.random();
        let (ra, rb) = (matrix.row(minority[a]), matrix.row(minority[b]));
        for &j in &cont {
            row[j] = ra[j] + delta * (rb[j] - ra[j]);
        }
        let mut mode_counts = Vec::with_capacity(blocks.len());
        for (bi, block) in blocks.iter().enumerate() {
            let mut counts = vec![0usize; block.len()];
            for &n in nbrs {
                if let Some(c) = cats[n][bi] {
                    counts[c] += 1;
                }
            }
            let best = argmax_first(&counts);
            for (c, &j) in block.iter().enumerate() {
                row[j] = if c == best { 1.0 } else { 0.0 };
            }
            mode_counts.push(counts);
        }
        out.provenance.push(Provenance {
            row: out.matrix.n_rows(),
            parent: minority[a],
            neighbor: minority[b],
            delta,
            neighbors: nbrs.iter().map(|&n| minority[n]).collect(),
            mode_counts,
        });
        out.matrix.push_row(&row, minority_label);
    }
    Ok(out)
}

fn categories_of(row: &[f64], blocks: &[Vec<usize>]) -> Vec<Option<usize>> {
    blocks
        .iter()
        .map(|b| b.iter().position(|&j| row[j] == 1.0))
        .collect()
}

/// Index of the largest count; ties go to the lowest index.
fn argmax_first(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}
