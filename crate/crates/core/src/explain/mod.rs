//! Feature attributions, importance rankings and per-instance explanations.

mod importance;
mod local;
mod report;
mod shapley;
mod tree_shap;

pub use importance::{
    compare_top_features, gini_importance, l1_selected_features, lr_coefficients, shap_importance,
    tree_shap_importance, ImportanceMethod, ImportanceRanking, L1Selection, RankEntry, ShapMode,
    SurvivingFeature, TopFeatureComparison,
};
pub use local::{
    decision_path, force_plot_data, knn_neighbors, Arrow, Comparator, DecisionPath, Direction, ForceExplanation,
    Neighbor, NeighborSet, Rule,
};
pub use report::{default_mode, display_values, explain_record, ExplainRequest, ModelExplanation, DEFAULT_PERMUTATIONS};
pub use shapley::{
    exact_game, sampled_game, shapley_exact, shapley_sampled, BackgroundSet, CoalitionValue, MarginalValue,
    MAX_EXACT_PLAYERS,
};
pub use tree_shap::{tree_base_value, tree_phi, tree_shapley, PathDependentValue, TreeEnsemble};

use serde::{Deserialize, Serialize};

use crate::preprocess::ColumnMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainMode {
    Exact,
    Sampled,
    Tree,
}

/// Shapley players, each owning one or more matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Players {
    pub names: Vec<String>,
    pub groups: Vec<Vec<usize>>,
}

impl Players {
    /// One anonymous player per column.
    pub fn singletons(p: usize) -> Self {
        Players {
            names: (0..p).map(|j| format!("x{j}")).collect(),
            groups: (0..p).map(|j| vec![j]).collect(),
        }
    }

    /// One player per column, named after the column.
    pub fn columns(columns: &[ColumnMeta]) -> Self {
        Players {
            names: columns.iter().map(|c| c.name.clone()).collect(),
            groups: (0..columns.len()).map(|j| vec![j]).collect(),
        }
    }

    /// One player per source feature: a one-hot block moves as a unit.
    pub fn features(columns: &[ColumnMeta]) -> Self {
        let mut names: Vec<String> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (j, c) in columns.iter().enumerate() {
            match names.iter().position(|n| *n == c.source) {
                Some(g) => groups[g].push(j),
                None => {
                    names.push(c.source.clone());
                    groups.push(vec![j]);
                }
            }
        }
        Players { names, groups }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn n_columns(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Sums column-level values into player-level values.
    pub fn aggregate(&self, column_values: &[f64]) -> Vec<f64> {
        self.groups.iter().map(|g| g.iter().map(|&j| column_values[j]).sum()).collect()
    }
}

/// Additive explanation of one prediction: `base_value + Σ phi ≈ prediction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub features: Vec<String>,
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub prediction: f64,
    pub mode: ExplainMode,
    /// Per-feature standard errors (sampled mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
}

impl Attribution {
    pub fn new(
        players: &Players,
        base_value: f64,
        phi: Vec<f64>,
        prediction: f64,
        mode: ExplainMode,
        std_errors: Option<Vec<f64>>,
    ) -> Self {
        Attribution {
            features: players.names.clone(),
            base_value,
            phi,
            prediction,
            mode,
            std_errors,
        }
    }

    pub fn efficiency_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }

    /// Uncertainty reported with the values: three standard errors in
    /// sampled mode, rounding slack otherwise.
    pub fn tolerance(&self) -> f64 {
        match &self.std_errors {
            Some(se) => 3.0 * se.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max),
            None => 1e-9,
        }
    }

    /// Re-expresses a column-level attribution over grouped players.
    pub fn grouped(&self, players: &Players) -> Attribution {
        Attribution {
            features: players.names.clone(),
            phi: players.aggregate(&self.phi),
            std_errors: None,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::default_schema;
    use crate::preprocess::columns_for;

    #[test]
    fn feature_players_group_one_hot_blocks() {
        let cols = columns_for(&default_schema());
        let p = Players::features(&cols);
        assert_eq!(p.len(), 25);
        assert_eq!(p.n_columns(), 34);
        assert_eq!(p.names[0], "service_unit");
        assert_eq!(p.groups[0], vec![0, 1, 2, 3, 4]);
        assert_eq!(Players::columns(&cols).len(), 34);
    }
}
