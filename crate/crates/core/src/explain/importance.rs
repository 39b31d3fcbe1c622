use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::shapley::{shapley_exact, shapley_sampled, BackgroundSet};
use super::tree_shap::{tree_shapley, TreeEnsemble};
use super::Players;
use crate::error::{Error, Result};
use crate::models::{Classifier, LogisticModel};
use crate::preprocess::ColumnMeta;
use crate::stats::MeanStd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    LrCoef,
    Gini,
    Shap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub feature: String,
    /// Source feature of an indicator column (equal to `feature` otherwise).
    pub source: String,
    pub importance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

/// Features ordered by descending |importance|; equal magnitudes keep input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub method: ImportanceMethod,
    pub entries: Vec<RankEntry>,
    /// False when Gini importances were all zero and left unnormalized.
    pub normalized: bool,
}

impl ImportanceRanking {
    pub fn new(method: ImportanceMethod, mut entries: Vec<RankEntry>, normalized: bool) -> Self {
        entries.sort_by(|a, b| b.importance.abs().total_cmp(&a.importance.abs()));
        ImportanceRanking {
            method,
            entries,
            normalized,
        }
    }

    pub fn top(&self, n: usize) -> Vec<String> {
        self.entries.iter().take(n).map(|e| e.feature.clone()).collect()
    }

    pub fn get(&self, feature: &str) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.feature == feature)
    }

    /// Sums |importance| per source feature.
    pub fn aggregated(&self) -> ImportanceRanking {
        let mut order: Vec<String> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        for e in &self.entries {
            match order.iter().position(|s| *s == e.source) {
                Some(i) => sums[i] += e.importance.abs(),
                None => {
                    order.push(e.source.clone());
                    sums.push(e.importance.abs());
                }
            }
        }
        let entries = order
            .into_iter()
            .zip(sums)
            .map(|(s, v)| RankEntry {
                feature: s.clone(),
                source: s,
                importance: v,
                std: None,
            })
            .collect();
        ImportanceRanking::new(self.method, entries, self.normalized)
    }
}

fn entries_for(columns: &[ColumnMeta], values: &[f64]) -> Vec<RankEntry> {
    columns
        .iter()
        .zip(values)
        .map(|(c, &v)| RankEntry {
            feature: c.name.clone(),
            source: c.source.clone(),
            importance: v,
            std: None,
        })
        .collect()
}

/// Signed coefficients per column, ranked by magnitude.
pub fn lr_coefficients(model: &LogisticModel, columns: &[ColumnMeta]) -> Result<ImportanceRanking> {
    if columns.len() != model.weights.len() {
        return Err(Error::ColumnMismatch(format!(
            "{} weights for {} columns",
            model.weights.len(),
            columns.len()
        )));
    }
    Ok(ImportanceRanking::new(
        ImportanceMethod::LrCoef,
        entries_for(columns, &model.weights),
        false,
    ))
}

/// Coverage-weighted Gini decrease per column, normalized to sum to one
/// (left at zero, flagged unnormalized, for a single-leaf model).
pub fn gini_importance(model: TreeEnsemble<'_>, columns: &[ColumnMeta], aggregate: bool) -> Result<ImportanceRanking> {
    let raw = match model {
        TreeEnsemble::Tree(t) => t.raw_gini_importance(),
        TreeEnsemble::Forest(f) => f.raw_gini_importance(),
    };
    if raw.len() != columns.len() {
        return Err(Error::ColumnMismatch(format!("{} importances for {} columns", raw.len(), columns.len())));
    }
    let total: f64 = raw.iter().sum();
    let (values, normalized) = if total > 0.0 {
        (raw.iter().map(|v| v / total).collect::<Vec<_>>(), true)
    } else {
        (raw, false)
    };
    let r = ImportanceRanking::new(ImportanceMethod::Gini, entries_for(columns, &values), normalized);
    Ok(if aggregate { r.aggregated() } else { r })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ShapMode {
    Exact,
    Sampled {
        n_permutations: usize,
        repeats: usize,
        seed: u64,
    },
}

/// Mean |φ| per player over the sample rows. In sampled mode the estimate
/// is repeated with fresh seeds and reported as mean ± σ across repeats.
pub fn shap_importance<C: Classifier + ?Sized>(
    model: &C,
    sample: &[Vec<f64>],
    background: &BackgroundSet,
    players: &Players,
    mode: ShapMode,
) -> Result<ImportanceRanking> {
    if sample.is_empty() {
        return Err(Error::Config("SHAP importance needs at least one sample row".into()));
    }
    let mean_abs = |seed: Option<(usize, u64)>| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; players.len()];
        for (r, row) in sample.iter().enumerate() {
            let a = match seed {
                None => shapley_exact(model, row, background, players)?,
                Some((n, s)) => shapley_sampled(model, row, background, players, n, s.wrapping_add(r as u64))?,
            };
            for (x, v) in acc.iter_mut().zip(&a.phi) {
                *x += v.abs() / sample.len() as f64;
            }
        }
        Ok(acc)
    };
    let (values, stds) = match mode {
        ShapMode::Exact => (mean_abs(None)?, None),
        ShapMode::Sampled {
            n_permutations,
            repeats,
            seed,
        } => {
            if repeats < 1 {
                return Err(Error::Config("repeats must be at least 1".into()));
            }
            let runs: Vec<Vec<f64>> = (0..repeats)
                .map(|k| mean_abs(Some((n_permutations, seed.wrapping_add((k * sample.len()) as u64)))))
                .collect::<Result<_>>()?;
            let summary: Vec<MeanStd> = (0..players.len())
                .map(|i| MeanStd::of(&runs.iter().map(|r| r[i]).collect::<Vec<_>>()))
                .collect();
            (
                summary.iter().map(|m| m.mean).collect(),
                Some(summary.iter().map(|m| m.std).collect::<Vec<_>>()),
            )
        }
    };
    let entries = players
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| RankEntry {
            feature: n.clone(),
            source: n.split('=').next().unwrap_or(n).to_string(),
            importance: values[i],
            std: stds.as_ref().map(|s| s[i]),
        })
        .collect();
    Ok(ImportanceRanking::new(ImportanceMethod::Shap, entries, false))
}

/// Mean |φ| per column from path-dependent tree Shapley values.
pub fn tree_shap_importance(model: TreeEnsemble<'_>, sample: &[Vec<f64>], columns: &[ColumnMeta]) -> Result<ImportanceRanking> {
    if sample.is_empty() {
        return Err(Error::Config("SHAP importance needs at least one sample row".into()));
    }
    let mut acc = vec![0.0; columns.len()];
    for row in sample {
        let a = tree_shapley(model, row)?;
        for (x, v) in acc.iter_mut().zip(&a.phi) {
            *x += v.abs() / sample.len() as f64;
        }
    }
    Ok(ImportanceRanking::new(ImportanceMethod::Shap, entries_for(columns, &acc), false))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivingFeature {
    pub feature: String,
    pub coefficient: MeanStd,
    pub nonzero_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Selection {
    pub n_trials: usize,
    pub survivors: Vec<SurvivingFeature>,
    pub annihilated: Vec<String>,
}

impl L1Selection {
    pub fn survives(&self, feature: &str) -> bool {
        self.survivors.iter().any(|s| s.feature == feature)
    }
}

/// A feature survives when its coefficient is nonzero (|θ| > 1e-12) in
/// strictly more than half of the trials.
pub fn l1_selected_features(trials: &[Vec<f64>], names: &[String]) -> Result<L1Selection> {
    if trials.is_empty() {
        return Err(Error::Config("L1 selection needs at least one trial".into()));
    }
    if trials.iter().any(|t| t.len() != names.len()) {
        return Err(Error::ColumnMismatch("coefficient vectors and feature names differ in length".into()));
    }
    let mut survivors = Vec::new();
    let mut annihilated = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let col: Vec<f64> = trials.iter().map(|t| t[j]).collect();
        let nonzero = col.iter().filter(|v| v.abs() > 1e-12).count();
        if 2 * nonzero > trials.len() {
            survivors.push(SurvivingFeature {
                feature: name.clone(),
                coefficient: MeanStd::of(&col),
                nonzero_trials: nonzero,
            });
        } else {
            annihilated.push(name.clone());
        }
    }
    survivors.sort_by(|a, b| b.coefficient.mean.abs().total_cmp(&a.coefficient.mean.abs()));
    Ok(L1Selection {
        n_trials: trials.len(),
        survivors,
        annihilated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopFeatureComparison {
    pub n: usize,
    pub top: Vec<(String, Vec<String>)>,
    pub intersection: Vec<String>,
}

/// Per-model top-`n` lists and their intersection. With `aggregate`,
/// indicator columns are first summed into their source features.
pub fn compare_top_features(rankings: &[(String, ImportanceRanking)], n: usize, aggregate: bool) -> Result<TopFeatureComparison> {
    if rankings.len() < 2 {
        return Err(Error::Config("comparison needs at least two rankings".into()));
    }
    let top: Vec<(String, Vec<String>)> = rankings
        .iter()
        .map(|(label, r)| {
            let r = if aggregate { r.aggregated() } else { r.clone() };
            (label.clone(), r.top(n))
        })
        .collect();
    let mut common: BTreeSet<&String> = top[0].1.iter().collect();
    for (_, t) in &top[1..] {
        let s: BTreeSet<&String> = t.iter().collect();
        common = common.intersection(&s).copied().collect();
    }
    // Report in the first model's order.
    let intersection = top[0].1.iter().filter(|f| common.contains(f)).cloned().collect();
    Ok(TopFeatureComparison { n, top, intersection })
}
