use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cv::{kfold_cv, CvOptions, CvResult};
use crate::error::{Error, Result};
use crate::models::{Family, Hyperparams};
use crate::preprocess::FeatureMatrix;

/// Candidate values for one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRange {
    Values(Vec<f64>),
    Sampled(Sampled),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampled {
    Uniform([f64; 2]),
    LogUniform([f64; 2]),
    IntRange([i64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Grid,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub mode: SearchMode,
    pub params: BTreeMap<String, ParamRange>,
    /// Candidates drawn in random mode.
    #[serde(default)]
    pub budget: Option<usize>,
}

impl SearchSpace {
    pub fn grid<I, K>(params: I) -> Self
    where
        I: IntoIterator<Item = (K, Vec<f64>)>,
        K: Into<String>,
    {
        SearchSpace {
            mode: SearchMode::Grid,
            params: params.into_iter().map(|(k, v)| (k.into(), ParamRange::Values(v))).collect(),
            budget: None,
        }
    }

    pub fn single(h: &Hyperparams) -> Self {
        SearchSpace::grid(h.iter().map(|(k, v)| (k.clone(), vec![*v])))
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == SearchMode::Random && self.budget.unwrap_or(0) < 1 {
            return Err(Error::Config("random search needs a budget of at least 1".into()));
        }
        for (k, r) in &self.params {
            match r {
                ParamRange::Values(v) if v.is_empty() => {
                    return Err(Error::Config(format!("hyperparameter `{k}` has no candidate values")))
                }
                ParamRange::Sampled(_) if self.mode == SearchMode::Grid => {
                    return Err(Error::Config(format!("grid search needs a value list for `{k}`")))
                }
                ParamRange::Sampled(Sampled::LogUniform([lo, hi])) if !(*lo > 0.0 && lo <= hi) => {
                    return Err(Error::Config(format!("log-uniform range for `{k}` must be positive")))
                }
                ParamRange::Sampled(Sampled::Uniform([lo, hi])) if lo > hi => {
                    return Err(Error::Config(format!("empty range for `{k}`")))
                }
                ParamRange::Sampled(Sampled::IntRange([lo, hi])) if lo > hi => {
                    return Err(Error::Config(format!("empty range for `{k}`")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// All candidates in enumeration order; the last key varies fastest.
    pub fn candidates(&self, seed: u64) -> Result<Vec<Hyperparams>> {
        self.validate()?;
        match self.mode {
            SearchMode::Grid => {
                let mut out = vec![Hyperparams::new()];
                for (k, r) in &self.params {
                    let ParamRange::Values(vals) = r else { unreachable!("validated") };
                    out = out
                        .into_iter()
                        .flat_map(|h| {
                            vals.iter().map(move |v| {
                                let mut h = h.clone();
                                h.insert(k.clone(), *v);
                                h
                            })
                        })
                        .collect();
                }
                Ok(out)
            }
            SearchMode::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let budget = self.budget.expect("validated");
                Ok((0..budget)
                    .map(|_| {
                        self.params
                            .iter()
                            .map(|(k, r)| (k.clone(), draw(r, &mut rng)))
                            .collect()
                    })
                    .collect())
            }
        }
    }

    pub fn n_candidates(&self) -> usize {
        match self.mode {
            SearchMode::Grid => self
                .params
                .values()
                .map(|r| match r {
                    ParamRange::Values(v) => v.len(),
                    ParamRange::Sampled(_) => 1,
                })
                .product(),
            SearchMode::Random => self.budget.unwrap_or(0),
        }
    }
}

fn draw(range: &ParamRange, rng: &mut ChaCha8Rng) -> f64 {
    match range {
        ParamRange::Values(v) => v[rng.random_range(0..v.len())],
        ParamRange::Sampled(Sampled::Uniform([lo, hi])) => lo + (hi - lo) * rng.random::<f64>(),
        ParamRange::Sampled(Sampled::LogUniform([lo, hi])) => (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp(),
        ParamRange::Sampled(Sampled::IntRange([lo, hi])) => rng.random_range(*lo..=*hi) as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Hyperparams,
    pub cv: CvResult,
    /// Every evaluated candidate with its mean CV AUC, in evaluation order.
    pub evaluated: Vec<(Hyperparams, f64)>,
}

fn run(family: Family, candidates: Vec<Hyperparams>, matrix: &FeatureMatrix, opts: &CvOptions) -> Result<SearchResult> {
    let mut best: Option<(Hyperparams, CvResult)> = None;
    let mut evaluated = Vec::with_capacity(candidates.len());
    for h in candidates {
        let cv = kfold_cv(family, &h, matrix, opts)?;
        evaluated.push((h.clone(), cv.auc.mean));
        if best.as_ref().is_none_or(|(_, b)| cv.auc.mean > b.auc.mean) {
            best = Some((h, cv));
        }
    }
    let (best, cv) = best.ok_or_else(|| Error::Config("search space is empty".into()))?;
    Ok(SearchResult { best, cv, evaluated })
}

pub fn grid_search(family: Family, space: &SearchSpace, matrix: &FeatureMatrix, opts: &CvOptions) -> Result<SearchResult> {
    if space.mode != SearchMode::Grid {
        return Err(Error::Config("grid_search needs a grid-mode space".into()));
    }
    run(family, space.candidates(opts.seed)?, matrix, opts)
}

pub fn random_search(family: Family, space: &SearchSpace, matrix: &FeatureMatrix, opts: &CvOptions) -> Result<SearchResult> {
    let space = SearchSpace {
        mode: SearchMode::Random,
        ..space.clone()
    };
    run(family, space.candidates(opts.seed)?, matrix, opts)
}

/// Dispatches on the space's mode.
pub fn search(family: Family, space: &SearchSpace, matrix: &FeatureMatrix, opts: &CvOptions) -> Result<SearchResult> {
    match space.mode {
        SearchMode::Grid => grid_search(family, space, matrix, opts),
        SearchMode::Random => random_search(family, space, matrix, opts),
    }
}
