//! Python bindings: cohorts, training, scoring, explanations and the
//! evaluation protocol. Records cross the boundary as plain dicts keyed by
//! feature name; structured results come back as dicts as well.

use std::path::PathBuf;

use mortrisk::cohort::{
    default_schema, generate_synthetic_cohort, load_cohort, record_from_map, record_to_map, save_cohort, CohortTable,
    GeneratorConfig,
};
use mortrisk::eval::{run_trials, ProtocolConfig};
use mortrisk::explain::{explain_record, ExplainMode, ExplainRequest};
use mortrisk::models::{load_model, save_model, Family, Hyperparams, TrainedModel};
use mortrisk::pipeline::{train_artifact, TrainOptions};
use mortrisk::preprocess::{clean_cohort, BmiRegression, ColumnKind, ColumnMeta, FeatureMatrix, Sex};
use mortrisk::resample::SmoteConfig;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde_json::{Map, Value};

fn to_py_err(e: mortrisk::Error) -> PyErr {
    match e {
        mortrisk::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_python<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_python(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn feature_map(obj: &Bound<'_, PyAny>) -> PyResult<Map<String, Value>> {
    match from_python(obj)? {
        Value::Object(m) => Ok(m),
        _ => Err(PyValueError::new_err("features must be a dict keyed by feature name")),
    }
}

fn parse_family(tag: &str) -> PyResult<Family> {
    tag.parse().map_err(to_py_err)
}

/// A patient table with the standard 25-feature schema.
#[pyclass(module = "mortrisk", skip_from_py_object)]
#[derive(Clone)]
pub struct Cohort {
    table: CohortTable,
}

#[pymethods]
impl Cohort {
    /// Seeded synthetic cohort.
    #[staticmethod]
    #[pyo3(signature = (n=5000, prevalence=0.076, seed=0))]
    fn generate(n: usize, prevalence: f64, seed: u64) -> PyResult<Self> {
        let table = generate_synthetic_cohort(&GeneratorConfig {
            n,
            prevalence,
            seed,
            ..GeneratorConfig::default()
        })
        .map_err(to_py_err)?;
        Ok(Cohort { table })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Cohort {
            table: load_cohort(&path, &default_schema()).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_cohort(&self.table, &path).map_err(to_py_err)
    }

    /// Drop incomplete records, impute heights, remove 3-sigma outliers.
    /// Returns the cleaned cohort and the cleaning report.
    #[pyo3(signature = (published_coefficients=false))]
    fn clean<'py>(&self, py: Python<'py>, published_coefficients: bool) -> PyResult<(Cohort, Bound<'py, PyAny>)> {
        let regression = published_coefficients.then_some(BmiRegression::PUBLISHED);
        let (table, report) = clean_cohort(&self.table, regression).map_err(to_py_err)?;
        Ok((Cohort { table }, to_python(py, &report)?))
    }

    #[getter]
    fn positives(&self) -> usize {
        self.table.positives()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.table.schema.features.iter().map(|f| f.name.clone()).collect()
    }

    fn labels(&self) -> Vec<u8> {
        self.table.records.iter().map(|r| r.label).collect()
    }

    /// Record `i` as a feature dict (missing values omitted).
    fn record<'py>(&self, py: Python<'py>, i: usize) -> PyResult<Bound<'py, PyAny>> {
        let rec = self
            .table
            .records
            .get(i)
            .ok_or_else(|| PyValueError::new_err(format!("record {i} out of range")))?;
        to_python(py, &record_to_map(&self.table.schema, rec))
    }

    fn __len__(&self) -> usize {
        self.table.len()
    }

    fn __repr__(&self) -> String {
        format!("Cohort(records={}, positives={})", self.table.len(), self.table.positives())
    }
}

/// A trained, scoring-ready model artifact.
#[pyclass(module = "mortrisk", skip_from_py_object)]
#[derive(Clone)]
pub struct Model {
    inner: TrainedModel,
}

#[pymethods]
impl Model {
    /// Split, balance, tune (unless `hyperparameters` is given) and fit one family.
    #[staticmethod]
    #[pyo3(signature = (cohort, family, hyperparameters=None, seed=0, clean=false))]
    fn train(
        py: Python<'_>,
        cohort: &Cohort,
        family: &str,
        hyperparameters: Option<Bound<'_, PyDict>>,
        seed: u64,
        clean: bool,
    ) -> PyResult<Self> {
        let mut opts = TrainOptions::new(parse_family(family)?);
        if let Some(h) = hyperparameters {
            let mut fixed: Hyperparams = opts.family.default_hyperparameters();
            for (k, v) in h.iter() {
                fixed.insert(k.extract()?, v.extract()?);
            }
            opts.hyperparameters = Some(fixed);
        }
        opts.seed = seed;
        opts.clean = clean;
        let table = cohort.table.clone();
        let out = py.detach(move || train_artifact(&table, &opts)).map_err(to_py_err)?;
        Ok(Model { inner: out.model })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model {
            inner: load_model(&path).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model {
            inner: TrainedModel::from_json(text).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.inner, &path).map_err(to_py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py_err)
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family.tag()
    }

    #[getter]
    fn hyperparameters(&self) -> Hyperparams {
        self.inner.hyperparameters.clone()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.column_names()
    }

    /// Probability of death within 28 days for a feature dict.
    fn predict(&self, features: &Bound<'_, PyAny>) -> PyResult<f64> {
        let rec = record_from_map(&self.inner.schema, &feature_map(features)?).map_err(to_py_err)?;
        self.inner.predict_proba(&rec).map_err(to_py_err)
    }

    /// Force-plot data plus the decision path (trees) or neighbours (k-NN).
    #[pyo3(signature = (features, mode=None, n_permutations=None, seed=0))]
    fn explain<'py>(
        &self,
        py: Python<'py>,
        features: &Bound<'py, PyAny>,
        mode: Option<&str>,
        n_permutations: Option<usize>,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let rec = record_from_map(&self.inner.schema, &feature_map(features)?).map_err(to_py_err)?;
        let mode = match mode {
            None => None,
            Some("exact") => Some(ExplainMode::Exact),
            Some("sampled") => Some(ExplainMode::Sampled),
            Some("tree") => Some(ExplainMode::Tree),
            Some(other) => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
        };
        let req = ExplainRequest {
            mode,
            n_permutations,
            seed,
        };
        let model = &self.inner;
        let e = py.detach(|| explain_record(model, &rec, &req)).map_err(to_py_err)?;
        to_python(py, &e)
    }

    fn __repr__(&self) -> String {
        format!("Model(family='{}', columns={})", self.inner.family.tag(), self.inner.n_columns())
    }
}

/// ROC AUC by the rank statistic; ties count half.
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    mortrisk::eval::auc(&scores, &labels).map_err(to_py_err)
}

/// 2009 CKD-EPI eGFR; `sex` is "M" or "F".
#[pyfunction]
#[pyo3(signature = (creatinine, age, sex, black=false))]
fn compute_egfr(creatinine: f64, age: f64, sex: &str, black: bool) -> PyResult<f64> {
    let sex = match sex {
        "M" | "m" => Sex::Male,
        "F" | "f" => Sex::Female,
        _ => return Err(PyValueError::new_err("sex must be 'M' or 'F'")),
    };
    mortrisk::preprocess::compute_egfr(creatinine, age, sex, black).map_err(to_py_err)
}

/// Repeated-trial protocol; returns `{"summary": ..., "csv": ...}`.
#[pyfunction]
#[pyo3(signature = (cohort, families=None, trials=30, seed=0))]
fn evaluate<'py>(
    py: Python<'py>,
    cohort: &Cohort,
    families: Option<Vec<String>>,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let families = match families {
        Some(tags) => tags.iter().map(|t| parse_family(t)).collect::<PyResult<Vec<_>>>()?,
        None => Family::ALL.to_vec(),
    };
    let config = ProtocolConfig {
        families,
        n_trials: trials,
        base_seed: seed,
        ..ProtocolConfig::default()
    };
    let table = &cohort.table;
    let report = py.detach(|| run_trials(table, &config)).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("summary", to_python(py, &report.summary)?)?;
    out.set_item("csv", report.render_csv())?;
    out.set_item("text", report.render_text())?;
    Ok(out.into_any())
}

/// SMOTE-NC on continuous columns plus integer-coded categorical columns.
/// Returns `(continuous, categorical, labels)` with the minority topped up.
#[pyfunction]
#[pyo3(signature = (continuous, labels, categorical=None, k=5, seed=0))]
fn smote_nc(
    continuous: Vec<Vec<f64>>,
    labels: Vec<u8>,
    categorical: Option<Vec<Vec<usize>>>,
    k: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<usize>>, Vec<u8>)> {
    let n = labels.len();
    let categorical = categorical.unwrap_or_else(|| vec![Vec::new(); n]);
    if continuous.len() != n || categorical.len() != n {
        return Err(PyValueError::new_err("continuous, categorical and labels must have the same length"));
    }
    let p = continuous.first().map_or(0, Vec::len);
    let q = categorical.first().map_or(0, Vec::len);
    let levels: Vec<usize> = (0..q)
        .map(|j| categorical.iter().map(|r| r.get(j).copied().unwrap_or(0)).max().unwrap_or(0) + 1)
        .collect();
    let mut columns: Vec<ColumnMeta> = (0..p)
        .map(|j| ColumnMeta {
            name: format!("x{j}"),
            source: format!("x{j}"),
            source_index: j,
            kind: ColumnKind::Continuous,
        })
        .collect();
    for (j, &l) in levels.iter().enumerate() {
        for c in 0..l {
            columns.push(ColumnMeta {
                name: format!("c{j}={c}"),
                source: format!("c{j}"),
                source_index: p + j,
                kind: ColumnKind::Indicator { category: c.to_string() },
            });
        }
    }
    let mut data = Vec::new();
    for (x, c) in continuous.iter().zip(&categorical) {
        if x.len() != p || c.len() != q {
            return Err(PyValueError::new_err("ragged rows"));
        }
        data.extend_from_slice(x);
        for (j, &l) in levels.iter().enumerate() {
            data.extend((0..l).map(|v| if v == c[j] { 1.0 } else { 0.0 }));
        }
    }
    let matrix = FeatureMatrix::new(columns, data, labels).map_err(to_py_err)?;
    let out = mortrisk::resample::smote_nc(
        &matrix,
        &SmoteConfig {
            k,
            seed,
            ..SmoteConfig::default()
        },
    )
    .map_err(to_py_err)?;
    let mut cont = Vec::with_capacity(out.n_rows());
    let mut cats = Vec::with_capacity(out.n_rows());
    for row in out.rows() {
        cont.push(row[..p].to_vec());
        let mut offset = p;
        let mut codes = Vec::with_capacity(q);
        for &l in &levels {
            codes.push((0..l).position(|v| row[offset + v] == 1.0).unwrap_or(0));
            offset += l;
        }
        cats.push(codes);
    }
    Ok((cont, cats, out.labels().to_vec()))
}

#[pymodule]
fn _mortrisk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Cohort>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(compute_egfr, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(smote_nc, m)?)?;
    m.add("FAMILIES", Family::ALL.iter().map(|f| f.tag()).collect::<Vec<_>>())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smote_round_trips_categorical_codes() {
        let cont: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let cats: Vec<Vec<usize>> = (0..30).map(|i| vec![i % 3, i % 2]).collect();
        let labels: Vec<u8> = (0..30).map(|i| u8::from(i < 6)).collect();
        let (c, k, y) = smote_nc(cont.clone(), labels, Some(cats.clone()), 5, 1).unwrap();
        assert_eq!(y.iter().filter(|&&v| v == 1).count(), 24);
        assert_eq!(y.len(), 48);
        assert_eq!(&c[..30], &cont[..]);
        assert_eq!(&k[..30], &cats[..]);
        assert!(k.iter().all(|r| r[0] < 3 && r[1] < 2));
    }

    #[test]
    fn egfr_accepts_either_case_for_sex() {
        let a = compute_egfr(2.4, 73.7, "F", false).unwrap();
        assert_eq!(a, compute_egfr(2.4, 73.7, "f", false).unwrap());
        assert!((a - 19.28).abs() <= 0.05);
    }
}
