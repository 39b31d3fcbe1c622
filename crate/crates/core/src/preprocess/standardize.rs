use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::stats;

/// Per-column mean and standard deviation fitted on a training matrix.
/// Indicator columns pass through; zero-variance columns are scaled by 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerState {
    pub columns: Vec<String>,
    pub continuous: Vec<bool>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl StandardizerState {
    pub fn fit(matrix: &FeatureMatrix) -> Self {
        let p = matrix.n_cols();
        let mut means = vec![0.0; p];
        let mut sds = vec![1.0; p];
        let mut zero_variance = vec![false; p];
        let continuous: Vec<bool> = matrix.columns.iter().map(|c| c.is_continuous()).collect();
        for j in 0..p {
            if !continuous[j] || matrix.n_rows() == 0 {
                continue;
            }
            let col = matrix.column_values(j);
            means[j] = stats::mean(&col);
            let sd = stats::std_dev(&col);
            if sd > 0.0 {
                sds[j] = sd;
            } else {
                zero_variance[j] = true;
            }
        }
        StandardizerState {
            columns: matrix.column_names(),
            continuous,
            means,
            sds,
            zero_variance,
        }
    }

    fn check_columns(&self, names: &[String]) -> Result<()> {
        if names != self.columns.as_slice() {
            let first = names
                .iter()
                .zip(&self.columns)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("`{a}` vs fitted `{b}`"))
                .unwrap_or_else(|| format!("{} columns vs {} fitted", names.len(), self.columns.len()));
            return Err(Error::ColumnMismatch(first));
        }
        Ok(())
    }

    /// Returns a standardized copy. Refuses matrices already standardized,
    /// since the transform is not idempotent.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_columns(&matrix.column_names())?;
        if matrix.standardized {
            return Err(Error::Config("matrix is already standardized".into()));
        }
        let mut out = matrix.clone();
        let p = out.n_cols();
        for row in out.data_mut().chunks_mut(p.max(1)) {
            self.transform_row(row);
        }
        out.standardized = true;
        Ok(out)
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            if self.continuous[j] {
                *x = (*x - self.means[j]) / self.sds[j];
            }
        }
    }

    pub fn inverse_value(&self, column: usize, value: f64) -> f64 {
        if self.continuous[column] {
            value * self.sds[column] + self.means[column]
        } else {
            value
        }
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &x)| self.inverse_value(j, x)).collect()
    }
}

pub fn fit_standardizer(matrix: &FeatureMatrix) -> StandardizerState {
    StandardizerState::fit(matrix)
}

pub fn apply_standardizer(state: &StandardizerState, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
    state.apply(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{ColumnKind, ColumnMeta};

    fn toy() -> FeatureMatrix {
        let mut cols = vec![];
        for (j, name) in ["a", "b", "c"].iter().enumerate() {
            cols.push(ColumnMeta {
                name: name.to_string(),
                source: name.to_string(),
                source_index: j,
                kind: ColumnKind::Continuous,
            });
        }
        cols.push(ColumnMeta {
            name: "g=X".into(),
            source: "g".into(),
            source_index: 3,
            kind: ColumnKind::Indicator { category: "X".into() },
        });
        let rows = [[1.0, 10.0, 5.0, 1.0], [2.0, 30.0, 5.0, 0.0], [6.0, -4.0, 5.0, 1.0], [3.0, 0.5, 5.0, 0.0]];
        FeatureMatrix::new(cols, rows.concat(), vec![0, 1, 0, 1]).unwrap()
    }

    #[test]
    fn fitted_matrix_has_zero_mean_unit_sd() {
        let m = toy();
        let s = fit_standardizer(&m);
        let z = s.apply(&m).unwrap();
        for j in 0..2 {
            let col = z.column_values(j);
            assert!(stats::mean(&col).abs() < 1e-9);
            assert!((stats::std_dev(&col) - 1.0).abs() < 1e-9);
        }
        assert_eq!(z.column_values(3), m.column_values(3));
    }

    #[test]
    fn constant_column_becomes_zero() {
        let m = toy();
        let s = fit_standardizer(&m);
        assert!(s.zero_variance[2]);
        assert_eq!(s.apply(&m).unwrap().column_values(2), vec![0.0; 4]);
    }

    #[test]
    fn double_application_refused_and_columns_checked() {
        let m = toy();
        let s = fit_standardizer(&m);
        let z = s.apply(&m).unwrap();
        assert!(z.standardized);
        assert!(s.apply(&z).is_err());
        let other = FeatureMatrix::from_rows(&[vec![1.0, 2.0]], &[0]).unwrap();
        assert!(matches!(s.apply(&other), Err(Error::ColumnMismatch(_))));
    }

    #[test]
    fn inverse_restores_raw_values() {
        let m = toy();
        let s = fit_standardizer(&m);
        let z = s.apply(&m).unwrap();
        for i in 0..m.n_rows() {
            let back = s.inverse_row(z.row(i));
            for (a, b) in back.iter().zip(m.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
