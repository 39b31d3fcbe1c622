use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Attribution, ExplainMode};
use crate::error::{Error, Result};
use crate::models::{KnnModel, TreeModel};
use crate::preprocess::{ColumnKind, ColumnMeta, StandardizerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub feature: String,
    pub raw_value: Value,
    pub phi: f64,
    pub direction: Direction,
}

/// Force-plot view of an attribution: arrows pushing the risk up (largest
/// first), then arrows pulling it down (largest magnitude first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceExplanation {
    pub base: f64,
    pub prediction: f64,
    pub mode: ExplainMode,
    pub tolerance: f64,
    pub arrows: Vec<Arrow>,
}

impl ForceExplanation {
    pub fn phi_sum(&self) -> f64 {
        self.arrows.iter().map(|a| a.phi).sum()
    }
}

/// `raw_values` holds one display value per attributed feature, in order.
pub fn force_plot_data(attribution: &Attribution, raw_values: &[Value]) -> Result<ForceExplanation> {
    if raw_values.len() != attribution.features.len() {
        return Err(Error::ColumnMismatch(format!(
            "{} display values for {} attributed features",
            raw_values.len(),
            attribution.features.len()
        )));
    }
    let arrow = |i: usize| Arrow {
        feature: attribution.features[i].clone(),
        raw_value: raw_values[i].clone(),
        phi: attribution.phi[i],
        direction: if attribution.phi[i] >= 0.0 {
            Direction::Increase
        } else {
            Direction::Decrease
        },
    };
    let mut up: Vec<Arrow> = (0..raw_values.len()).map(arrow).filter(|a| a.phi >= 0.0).collect();
    let mut down: Vec<Arrow> = (0..raw_values.len()).map(arrow).filter(|a| a.phi < 0.0).collect();
    up.sort_by(|a, b| b.phi.total_cmp(&a.phi));
    down.sort_by(|a, b| a.phi.total_cmp(&b.phi));
    up.extend(down);
    Ok(ForceExplanation {
        base: attribution.base_value,
        prediction: attribution.prediction,
        mode: attribution.mode,
        tolerance: attribution.tolerance(),
        arrows: up,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Comparator {
    fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
        }
    }
}

/// One traversed split, with the threshold mapped back to raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub feature: String,
    pub comparator: Comparator,
    /// Raw threshold for continuous splits; absent for indicator splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPath {
    pub rules: Vec<Rule>,
    pub leaf: usize,
    pub leaf_probability: f64,
    pub leaf_counts: [usize; 2],
}

fn format_threshold(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

/// Rules met by a standardized row on its way to a leaf.
pub fn decision_path(
    tree: &TreeModel,
    row: &[f64],
    standardizer: &StandardizerState,
    columns: &[ColumnMeta],
) -> Result<DecisionPath> {
    if row.len() != tree.n_inputs || columns.len() != tree.n_inputs {
        return Err(Error::ColumnMismatch(format!(
            "tree expects {} columns, got a row of {} and {} column names",
            tree.n_inputs,
            row.len(),
            columns.len()
        )));
    }
    let (steps, leaf) = tree.path(row);
    let rules = steps
        .iter()
        .map(|s| {
            let col = &columns[s.column];
            match &col.kind {
                ColumnKind::Continuous => {
                    let t = standardizer.inverse_value(s.column, s.threshold);
                    let comparator = if s.went_left { Comparator::Le } else { Comparator::Gt };
                    Rule {
                        feature: col.name.clone(),
                        comparator,
                        threshold: Some(t),
                        category: None,
                        text: format!("{} {} {}", col.name, comparator.symbol(), format_threshold(t)),
                    }
                }
                ColumnKind::Indicator { category } => {
                    // Indicators are 0/1, so the left branch means "not this category".
                    let comparator = if s.went_left { Comparator::Ne } else { Comparator::Eq };
                    Rule {
                        feature: col.source.clone(),
                        comparator,
                        threshold: None,
                        category: Some(category.clone()),
                        text: format!("{} {} {category}", col.source, comparator.symbol()),
                    }
                }
            }
        })
        .collect();
    let counts = tree.nodes[leaf].counts();
    Ok(DecisionPath {
        rules,
        leaf,
        leaf_probability: crate::models::Classifier::predict_row(tree, row),
        leaf_counts: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    /// Row index in the model's stored training data.
    pub index: usize,
    pub distance: f64,
    pub label: u8,
    /// Encoded values in raw units.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub neighbors: Vec<Neighbor>,
    pub positives: usize,
    pub negatives: usize,
    pub probability: f64,
    pub summary: String,
}

pub fn knn_neighbors(model: &KnnModel, row: &[f64], standardizer: &StandardizerState) -> Result<NeighborSet> {
    if row.len() != model.n_cols || standardizer.columns.len() != model.n_cols {
        return Err(Error::ColumnMismatch(format!(
            "k-NN model expects {} columns, got {}",
            model.n_cols,
            row.len()
        )));
    }
    let neighbors: Vec<Neighbor> = model
        .neighbors(row)
        .into_iter()
        .map(|(i, d)| Neighbor {
            index: i,
            distance: d,
            label: model.labels[i],
            values: standardizer.inverse_row(model.row(i)),
        })
        .collect();
    let positives = neighbors.iter().filter(|n| n.label == 1).count();
    let negatives = neighbors.len() - positives;
    let plural = |n: usize, word: &str| if n == 1 { format!("{n} {word}") } else { format!("{n} {word}s") };
    Ok(NeighborSet {
        probability: positives as f64 / neighbors.len() as f64,
        summary: format!("{}, {}", plural(positives, "positive"), plural(negatives, "negative")),
        neighbors,
        positives,
        negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::Players;
    use crate::models::{train_knn, train_tree, KnnConfig, TreeConfig};
    use crate::preprocess::{FeatureMatrix, StandardizerState};
    use serde_json::json;

    #[test]
    fn arrows_split_by_sign_and_sorted() {
        let players = Players::singletons(4);
        let a = Attribution::new(&players, 0.1, vec![0.05, -0.2, 0.3, -0.01], 0.24, ExplainMode::Exact, None);
        let f = force_plot_data(&a, &[json!(1), json!(2), json!(3), json!("x")]).unwrap();
        let order: Vec<&str> = f.arrows.iter().map(|a| a.feature.as_str()).collect();
        assert_eq!(order, ["x2", "x0", "x1", "x3"]);
        assert!((f.base + f.phi_sum() - f.prediction).abs() < 1e-12);
        assert_eq!(f.arrows[3].raw_value, json!("x"));
        assert!(force_plot_data(&a, &[json!(1)]).is_err());
    }

    #[test]
    fn path_thresholds_are_in_raw_units() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![10.0 + i as f64]).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let raw = FeatureMatrix::from_rows(&rows, &labels).unwrap();
        let st = StandardizerState::fit(&raw);
        let m = st.apply(&raw).unwrap();
        let t = train_tree(&m, &TreeConfig::default()).unwrap();
        let p = decision_path(&t, m.row(35), &st, &m.columns).unwrap();
        assert_eq!(p.rules.len(), 1);
        assert!((p.rules[0].threshold.unwrap() - 29.5).abs() < 1e-9);
        assert_eq!(p.rules[0].text, "x0 > 29.5");
        assert_eq!(p.leaf_probability, 1.0);
        assert_eq!(p.leaf_counts, [0, 20]);
    }

    #[test]
    fn indicator_rules_name_the_category() {
        let cols = vec![
            ColumnMeta {
                name: "unit=A".into(),
                source: "unit".into(),
                source_index: 0,
                kind: ColumnKind::Indicator { category: "A".into() },
            },
            ColumnMeta {
                name: "unit=B".into(),
                source: "unit".into(),
                source_index: 0,
                kind: ColumnKind::Indicator { category: "B".into() },
            },
        ];
        let data = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let m = FeatureMatrix::new(cols, data, vec![1, 1, 0, 0]).unwrap();
        let st = StandardizerState::fit(&m);
        let t = train_tree(&m, &TreeConfig::default()).unwrap();
        let p = decision_path(&t, &[1.0, 0.0], &st, &m.columns).unwrap();
        assert_eq!(p.rules.len(), 1);
        let text = &p.rules[0].text;
        assert!(text == "unit == A" || text == "unit != B", "{text}");
    }

    #[test]
    fn neighbor_summary_counts_labels() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let m = FeatureMatrix::from_rows(&rows, &labels).unwrap();
        let st = StandardizerState::fit(&m);
        let z = st.apply(&m).unwrap();
        let knn = train_knn(&z, &KnnConfig { k: 4, weights: None }).unwrap();
        let s = knn_neighbors(&knn, z.row(0), &st).unwrap();
        assert_eq!(s.summary, "3 positives, 1 negative");
        assert_eq!(s.neighbors.iter().map(|n| n.index).collect::<Vec<_>>(), [0, 1, 2, 3]);
        assert_eq!(s.probability, 0.75);
        assert!((s.neighbors[3].values[0] - 3.0).abs() < 1e-12);
    }
}
