use std::cell::Cell;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Attribution, ExplainMode, Players};
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::preprocess::FeatureMatrix;
use crate::stats;

/// Largest player count `shapley_exact` will enumerate.
pub const MAX_EXACT_PLAYERS: usize = 20;

/// A cooperative game over `n_players()` players.
pub trait CoalitionValue {
    fn n_players(&self) -> usize;
    fn value(&self, coalition: &[bool]) -> f64;
}

/// Training rows used to marginalize absent features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    pub rows: Vec<Vec<f64>>,
    pub seed: u64,
}

impl BackgroundSet {
    pub const DEFAULT_SIZE: usize = 100;

    /// Up to `size` distinct rows drawn without replacement, kept in row order.
    pub fn sample(matrix: &FeatureMatrix, size: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..matrix.n_rows()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        idx.truncate(size);
        idx.sort_unstable();
        BackgroundSet {
            rows: idx.iter().map(|&i| matrix.row(i).to_vec()).collect(),
            seed,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        BackgroundSet { rows, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Interventional value: mean prediction over hybrid rows taking the
/// explained row's values on the coalition and background values elsewhere.
pub struct MarginalValue<'a, C: Classifier + ?Sized> {
    model: &'a C,
    row: &'a [f64],
    background: &'a BackgroundSet,
    players: &'a Players,
    calls: Cell<usize>,
}

impl<'a, C: Classifier + ?Sized> MarginalValue<'a, C> {
    pub fn new(model: &'a C, row: &'a [f64], background: &'a BackgroundSet, players: &'a Players) -> Result<Self> {
        if background.is_empty() {
            return Err(Error::Config("background set is empty".into()));
        }
        let p = model.n_inputs();
        if row.len() != p || background.rows.iter().any(|b| b.len() != p) || players.n_columns() != p {
            return Err(Error::ColumnMismatch(format!(
                "model expects {p} columns; row, background and players must agree"
            )));
        }
        Ok(MarginalValue {
            model,
            row,
            background,
            players,
            calls: Cell::new(0),
        })
    }

    /// Number of `value` evaluations so far (each is one batch over the background).
    pub fn calls(&self) -> usize {
        self.calls.get()
    }
}

impl<C: Classifier + ?Sized> CoalitionValue for MarginalValue<'_, C> {
    fn n_players(&self) -> usize {
        self.players.len()
    }

    fn value(&self, coalition: &[bool]) -> f64 {
        self.calls.set(self.calls.get() + 1);
        let mut hybrid = vec![0.0; self.row.len()];
        let mut total = 0.0;
        for b in &self.background.rows {
            hybrid.copy_from_slice(b);
            for (g, &on) in self.players.groups.iter().zip(coalition) {
                if on {
                    for &j in g {
                        hybrid[j] = self.row[j];
                    }
                }
            }
            total += self.model.predict_row(&hybrid);
        }
        total / self.background.len() as f64
    }
}

/// Exact Shapley values by enumerating all 2^p coalitions.
/// Returns `(v(∅), v(N), φ)`.
pub fn exact_game<G: CoalitionValue + ?Sized>(game: &G) -> Result<(f64, f64, Vec<f64>)> {
    let p = game.n_players();
    if p > MAX_EXACT_PLAYERS {
        return Err(Error::TooManyPlayers {
            players: p,
            max: MAX_EXACT_PLAYERS,
        });
    }
    let n_masks = 1usize << p;
    let mut coalition = vec![false; p];
    let values: Vec<f64> = (0..n_masks)
        .map(|mask| {
            for (i, c) in coalition.iter_mut().enumerate() {
                *c = mask >> i & 1 == 1;
            }
            game.value(&coalition)
        })
        .collect();
    // w(s) = s!(p−s−1)!/p!
    let mut weight = vec![0.0; p.max(1)];
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (p as f64 * binomial(p - 1, s));
    }
    let mut phi = vec![0.0; p];
    for (mask, &v) in values.iter().enumerate() {
        let size = mask.count_ones() as usize;
        for (i, ph) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *ph += weight[size] * (values[mask | 1 << i] - v);
            }
        }
    }
    Ok((values[0], values[n_masks - 1], phi))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Permutation-sampling estimate. Permutations come in antithetic pairs
/// (a random order, then its reverse). Returns `(v(∅), φ, standard errors)`.
pub fn sampled_game<G: CoalitionValue + ?Sized>(
    game: &G,
    n_permutations: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if n_permutations < 1 {
        return Err(Error::Config("n_permutations must be at least 1".into()));
    }
    let p = game.n_players();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coalition = vec![false; p];
    let base = game.value(&coalition);
    let mut order: Vec<usize> = (0..p).collect();
    // Per-feature contributions of each sampling unit (pair or lone permutation).
    let mut units: Vec<Vec<f64>> = Vec::new();
    let mut current = vec![0.0; p];
    for k in 0..n_permutations {
        if k % 2 == 0 {
            order.shuffle(&mut rng);
        } else {
            order.reverse();
        }
        coalition.iter_mut().for_each(|c| *c = false);
        let mut prev = base;
        for &i in &order {
            coalition[i] = true;
            let v = game.value(&coalition);
            current[i] += v - prev;
            prev = v;
        }
        if k % 2 == 1 || k + 1 == n_permutations {
            let size = if k % 2 == 1 { 2.0 } else { 1.0 };
            units.push(current.iter().map(|c| c / size).collect());
            current.iter_mut().for_each(|c| *c = 0.0);
        }
    }
    let weights: Vec<f64> = (0..units.len())
        .map(|u| if u + 1 == units.len() && n_permutations % 2 == 1 { 1.0 } else { 2.0 })
        .collect();
    let total_w: f64 = weights.iter().sum();
    let mut phi = vec![0.0; p];
    let mut se = vec![0.0; p];
    for i in 0..p {
        phi[i] = units.iter().zip(&weights).map(|(u, w)| u[i] * w).sum::<f64>() / total_w;
        if units.len() > 1 {
            let col: Vec<f64> = units.iter().map(|u| u[i]).collect();
            let sd = stats::std_dev(&col) * (units.len() as f64 / (units.len() - 1) as f64).sqrt();
            se[i] = sd / (units.len() as f64).sqrt();
        } else {
            se[i] = f64::INFINITY;
        }
    }
    Ok((base, phi, se))
}

pub fn shapley_exact<C: Classifier + ?Sized>(
    model: &C,
    row: &[f64],
    background: &BackgroundSet,
    players: &Players,
) -> Result<Attribution> {
    let game = MarginalValue::new(model, row, background, players)?;
    let (base, full, phi) = exact_game(&game)?;
    let prediction = model.predict_row(row);
    // v(N) is the mean over identical rows, so it equals the prediction.
    debug_assert!((full - prediction).abs() < 1e-9);
    Ok(Attribution::new(players, base, phi, prediction, ExplainMode::Exact, None))
}

pub fn shapley_sampled<C: Classifier + ?Sized>(
    model: &C,
    row: &[f64],
    background: &BackgroundSet,
    players: &Players,
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    let game = MarginalValue::new(model, row, background, players)?;
    let (base, phi, se) = sampled_game(&game, n_permutations, seed)?;
    let prediction = model.predict_row(row);
    Ok(Attribution::new(players, base, phi, prediction, ExplainMode::Sampled, Some(se)))
}
