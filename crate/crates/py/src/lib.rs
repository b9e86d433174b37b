//! Python bindings: datasets, soft models, losses, reframing and rank
//! statistics.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use reframe_core::dataset::{self, TargetColumn};
use reframe_core::enrichment::{self, EnrichConfig, VarianceMethod};
use reframe_core::loss::{self, Decision, LossSpec};
use reframe_core::normal::NormalPrediction;
use reframe_core::reframing;
use reframe_core::regressors::{self, BaseKind, BaseParams, Regressor};
use reframe_core::{stats, synth, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Ingest { .. } | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn to_decision(t: Option<f64>) -> Decision {
    t.map_or(Decision::Reject, Decision::Predict)
}

/// Features plus a numeric target.
#[pyclass(name = "Dataset", module = "reframe", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (features, targets, name = "data".to_string(), feature_names = None))]
    fn new(
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
        name: String,
        feature_names: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let inner = match feature_names {
            Some(names) => dataset::Dataset::new(name, names, features, targets),
            None => dataset::Dataset::from_rows(name, features, targets),
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Reads a headered CSV; `target_col` is `last`, a header name or a 0-based index.
    #[staticmethod]
    #[pyo3(signature = (path, target_col = "last", separator = ','))]
    fn load_csv(path: PathBuf, target_col: &str, separator: char) -> PyResult<Self> {
        if !separator.is_ascii() {
            return Err(PyValueError::new_err("separator must be ASCII"));
        }
        let inner = dataset::load_csv(&path, &TargetColumn::parse(target_col), separator as u8).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.features().to_vec()
    }

    #[getter]
    fn targets(&self) -> Vec<f64> {
        self.inner.targets().to_vec()
    }

    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.inner.len()) {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(Self {
            inner: self.inner.subset(&indices),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, rows={}, features={})",
            self.inner.name(),
            self.inner.len(),
            self.inner.n_features()
        )
    }
}

/// Gaussian belief N(mu, sigma^2).
#[pyclass(name = "Normal", module = "reframe", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyNormal {
    inner: NormalPrediction,
}

#[pymethods]
impl PyNormal {
    #[new]
    fn new(mu: f64, sigma: f64) -> PyResult<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(PyValueError::new_err("sigma must be positive and finite"));
        }
        let inner = NormalPrediction::floored(mu, sigma, 0.0).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    fn pdf(&self, y: f64) -> f64 {
        self.inner.pdf(y)
    }

    fn cdf(&self, y: f64) -> f64 {
        self.inner.cdf(y)
    }

    fn quantile(&self, p: f64) -> PyResult<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(PyValueError::new_err("p must lie in (0, 1)"));
        }
        Ok(self.inner.quantile(p))
    }

    fn __repr__(&self) -> String {
        format!("Normal(mu={}, sigma={})", self.inner.mu, self.inner.sigma)
    }
}

/// A loss family with parameters, parsed from e.g. `"asym_sq_reject:alpha=0.3,rho=1"`.
#[pyclass(name = "Loss", module = "reframe", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyLoss {
    inner: LossSpec,
}

#[pymethods]
impl PyLoss {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: parse(spec)? })
    }

    /// Loss of a decision (`None` means reject) against the actual value.
    fn __call__(&self, decision: Option<f64>, y: f64) -> PyResult<f64> {
        loss::eval_loss(&self.inner, to_decision(decision), y).map_err(py_err)
    }

    /// Optimal decision under the belief; `None` when rejecting is optimal.
    fn reframe(&self, pred: &PyNormal) -> Option<f64> {
        reframing::reframe(&self.inner, &pred.inner).value()
    }

    /// Expected loss of a decision under the belief (closed form when
    /// available, quadrature otherwise).
    fn expected(&self, decision: Option<f64>, pred: &PyNormal) -> f64 {
        let (d, p) = (to_decision(decision), &pred.inner);
        match (self.inner, d) {
            (LossSpec::AsymAbsolute { alpha }, Decision::Predict(t)) => {
                reframing::expected_loss_asym_abs_normal(alpha, t, p).value
            }
            (LossSpec::AsymSquared { alpha }, Decision::Predict(t)) => {
                reframing::expected_loss_asym_sq_normal(alpha, t, p).value
            }
            _ => reframing::expected_loss_quadrature(&self.inner, d, p).value,
        }
    }

    #[getter]
    fn allows_reject(&self) -> bool {
        self.inner.allows_reject()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Loss({:?})", self.inner.to_string())
    }
}

/// A base regressor enriched with a conditional variance estimate.
#[pyclass(name = "SoftModel", module = "reframe", frozen)]
struct PySoftModel {
    inner: enrichment::SoftModel,
}

#[pymethods]
impl PySoftModel {
    /// Fits `base` (`lr`, `knn`, `tree`) on `train` and attaches `method`.
    /// The conformal method calibrates on `calibration` when given.
    #[staticmethod]
    #[pyo3(signature = (train, base = "lr", method = "own", k = None, calibration = None))]
    fn fit(
        train: &PyDataset,
        base: &str,
        method: &str,
        k: Option<usize>,
        calibration: Option<&PyDataset>,
    ) -> PyResult<Self> {
        let kind: BaseKind = parse(base)?;
        let method: VarianceMethod = parse(method)?;
        let mut params = BaseParams::default();
        let mut cfg = EnrichConfig::default();
        if let Some(k) = k {
            if k == 0 {
                return Err(PyValueError::new_err("k must be positive"));
            }
            params.k = k;
            cfg.k = k;
        }
        let model = regressors::fit_base(kind, &train.inner, &params).map_err(py_err)?;
        let base: Arc<dyn Regressor> = Arc::new(model);
        let enrich_on = calibration.map_or(&train.inner, |c| &c.inner);
        let inner = enrichment::enrich(base, enrich_on, method, &cfg).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method().label()
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<PyNormal> {
        let inner = self.inner.predict(&x).map_err(py_err)?;
        Ok(PyNormal { inner })
    }

    /// `(mu, sigma)` for every row of `data`.
    fn predict_all(&self, data: &PyDataset) -> PyResult<Vec<(f64, f64)>> {
        let preds = self.inner.predict_all(&data.inner).map_err(py_err)?;
        Ok(preds.into_iter().map(|p| (p.mu, p.sigma)).collect())
    }
}

/// Reframes `(mu, sigma)` for a loss spec string; `None` means reject.
#[pyfunction]
fn reframe(spec: &str, mu: f64, sigma: f64) -> PyResult<Option<f64>> {
    let spec: LossSpec = parse(spec)?;
    let pred = PyNormal::new(mu, sigma)?;
    Ok(reframing::reframe(&spec, &pred.inner).value())
}

/// Stationary point t' of the standardised asymmetric squared loss.
#[pyfunction]
fn asym_sq_tprime(alpha: f64) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PyValueError::new_err("alpha must lie in [0, 1]"));
    }
    Ok(reframing::solve_asym_sq_tprime(reframing::clamp_alpha(alpha)))
}

/// Draws `n` rows from a named generator; returns the dataset and the true
/// `(mu, sigma)` per row.
#[pyfunction]
#[pyo3(signature = (generator, n, seed = 0))]
fn generate(generator: &str, n: usize, seed: u64) -> PyResult<(PyDataset, Vec<(f64, f64)>)> {
    let gen: synth::Generator = parse(generator)?;
    let data = synth::generate(gen, n, seed).map_err(py_err)?;
    let truth = data.truth.iter().map(|t| (t.mu, t.sigma)).collect();
    Ok((PyDataset { inner: data.dataset }, truth))
}

/// Average ranks, Friedman statistic and Nemenyi critical difference for a
/// datasets-by-methods loss matrix.
#[pyfunction]
fn rank_summary<'py>(py: Python<'py>, losses: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let s = stats::rank_summary(&losses).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("average_ranks", s.average_ranks)?;
    d.set_item("n_datasets", s.n_datasets)?;
    d.set_item("friedman_statistic", s.friedman_statistic)?;
    d.set_item("critical_value", s.critical_value)?;
    d.set_item("nemenyi_cd", s.nemenyi_cd)?;
    d.set_item("significant", s.significant)?;
    Ok(d)
}

#[pymodule(name = "reframe")]
fn reframe_ext(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyNormal>()?;
    m.add_class::<PyLoss>()?;
    m.add_class::<PySoftModel>()?;
    m.add_function(wrap_pyfunction!(reframe, m)?)?;
    m.add_function(wrap_pyfunction!(asym_sq_tprime, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(rank_summary, m)?)?;
    Ok(())
}
