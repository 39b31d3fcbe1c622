use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub acc: f64,
    pub rec: f64,
}

impl Metrics {
    pub fn compute(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Self> {
        Ok(Metrics {
            auc: auc(scores, labels)?,
            acc: accuracy(scores, labels, threshold)?,
            rec: recall(scores, labels, threshold)?,
        })
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        match metric {
            "auc" => Some(self.auc),
            "acc" => Some(self.acc),
            "rec" => Some(self.rec),
            _ => None,
        }
    }
}

pub const METRIC_NAMES: [&str; 3] = ["auc", "acc", "rec"];

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::ColumnMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Mann-Whitney AUC via midranks; tied scores earn half credit.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    check_lengths(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty set".into()));
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, &y)| u8::from(**s >= threshold) == y)
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

pub fn recall(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 {
        return Err(Error::UndefinedMetric("recall needs at least one positive".into()));
    }
    let tp = scores
        .iter()
        .zip(labels)
        .filter(|(s, &y)| y == 1 && **s >= threshold)
        .count();
    Ok(tp as f64 / pos as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_rankings() {
        let y = [0, 0, 1, 1];
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &y).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &y).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 4], &y).unwrap(), 0.5);
    }

    #[test]
    fn hand_counted_accuracy_and_recall() {
        let y = [1, 0, 1, 1];
        let s = [0.9, 0.6, 0.4, 0.8];
        assert_eq!(accuracy(&s, &y, 0.5).unwrap(), 0.5);
        assert!((recall(&s, &y, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(recall(&[0.0; 4], &y, 0.5).unwrap(), 0.0);
        let exact: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        assert_eq!(accuracy(&exact, &y, 0.5).unwrap(), 1.0);
        assert_eq!(recall(&exact, &y, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn undefined_cases() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(recall(&[0.1, 0.2], &[0, 0], 0.5), Err(Error::UndefinedMetric(_))));
    }
}
