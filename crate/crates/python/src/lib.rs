//! Python bindings: instances, the sampling oracle, estimators, Monte Carlo
//! error estimates, bounds and CSV ingestion.

use std::path::PathBuf;

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use community_mode::algorithms::{self, AlgorithmId, KnowledgeMode};
use community_mode::bounds::{self, AlternateKind, BoundId, CurveId, RateId};
use community_mode::ingest::{self, ColumnRef, IngestSpec, Normalization};
use community_mode::montecarlo::{self, ErrorEstimate, ExperimentConfig};
use community_mode::oracle::{IdentityMode, OracleError};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn algorithm(name: &str) -> PyResult<AlgorithmId> {
    name.parse().map_err(value_error)
}

fn bound_id(name: &str) -> PyResult<BoundId> {
    match name.parse::<CurveId>().map_err(value_error)? {
        CurveId::Bound(b) => Ok(b),
        CurveId::Rate(r) => Err(value_error(format!("{r} is a rate, not a bound"))),
    }
}

fn rate_id(name: &str) -> PyResult<RateId> {
    match name.parse::<CurveId>().map_err(value_error)? {
        CurveId::Rate(r) => Ok(r),
        CurveId::Bound(b) => Err(value_error(format!("{b} is a bound, not a rate"))),
    }
}

fn column(spec: &Bound<'_, PyAny>) -> PyResult<ColumnRef> {
    if let Ok(i) = spec.extract::<usize>() {
        Ok(ColumnRef::Index(i))
    } else {
        Ok(ColumnRef::Name(spec.extract::<String>()?))
    }
}

/// Count matrix of individuals per (box, community).
#[pyclass(
    name = "Instance",
    module = "community_mode",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyInstance {
    inner: community_mode::Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (counts, boxes=None, communities=None))]
    fn new(
        counts: Vec<Vec<i64>>,
        boxes: Option<Vec<String>>,
        communities: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let file = community_mode::instance::InstanceFile {
            boxes: boxes.unwrap_or_default(),
            communities: communities.unwrap_or_default(),
            counts,
        };
        community_mode::Instance::from_file(file)
            .map(|inner| PyInstance { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn mixed(sizes: Vec<u64>) -> PyResult<Self> {
        community_mode::Instance::mixed(&sizes)
            .map(|inner| PyInstance { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn separated(sizes: Vec<u64>) -> PyResult<Self> {
        community_mode::Instance::separated(&sizes)
            .map(|inner| PyInstance { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn disjoint_boxes(boxes: Vec<Vec<u64>>) -> PyResult<Self> {
        let rows: Vec<&[u64]> = boxes.iter().map(Vec::as_slice).collect();
        community_mode::Instance::disjoint_boxes(&rows)
            .map(|inner| PyInstance { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        community_mode::Instance::from_json(text)
            .map(|inner| PyInstance { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        community_mode::Instance::read(path)
            .map(|inner| PyInstance { inner })
            .map_err(value_error)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(path).map_err(value_error)
    }

    #[getter]
    fn counts(&self) -> Vec<Vec<u64>> {
        (0..self.inner.num_boxes())
            .map(|b| self.inner.row(b).to_vec())
            .collect()
    }

    #[getter]
    fn box_labels(&self) -> Vec<String> {
        self.inner.box_labels().to_vec()
    }

    #[getter]
    fn community_labels(&self) -> Vec<String> {
        self.inner.community_labels().to_vec()
    }

    #[getter]
    fn num_boxes(&self) -> usize {
        self.inner.num_boxes()
    }

    #[getter]
    fn num_communities(&self) -> usize {
        self.inner.num_communities()
    }

    #[getter]
    fn box_sizes(&self) -> Vec<u64> {
        self.inner.box_sizes()
    }

    #[getter]
    fn community_sizes(&self) -> Vec<u64> {
        self.inner.community_sizes()
    }

    #[getter]
    fn total(&self) -> u64 {
        self.inner.summarize().total
    }

    /// Column indices of the largest communities.
    #[getter]
    fn mode_set(&self) -> Vec<usize> {
        self.inner.summarize().mode_set
    }

    /// "Mixed", "Separated", "DisjointBox" or "General".
    #[getter]
    fn setting(&self) -> &'static str {
        self.inner.classify_setting().as_str()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(boxes={}, communities={}, setting={})",
            self.inner.num_boxes(),
            self.inner.num_communities(),
            self.inner.classify_setting().as_str()
        )
    }
}

/// Sampling oracle over a copy of an instance.
#[pyclass(name = "Oracle", module = "community_mode")]
struct PyOracle {
    inner: community_mode::Oracle,
}

#[pymethods]
impl PyOracle {
    #[new]
    #[pyo3(signature = (instance, seed, identity=true))]
    fn new(instance: &PyInstance, seed: u64, identity: bool) -> Self {
        let mode = if identity {
            IdentityMode::Identity
        } else {
            IdentityMode::Identityless
        };
        PyOracle {
            inner: community_mode::Oracle::new(&instance.inner, seed, mode),
        }
    }

    /// One uniform draw from `box_index`. Returns a dict with `box`,
    /// `community`, and in identity mode `pseudo_id` and `first_time`.
    fn sample<'py>(&mut self, py: Python<'py>, box_index: usize) -> PyResult<Bound<'py, PyDict>> {
        let obs = self.inner.sample(box_index).map_err(|e| match e {
            OracleError::BoxOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
            OracleError::EmptyBox(_) => value_error(e),
        })?;
        let out = PyDict::new(py);
        out.set_item("box", obs.box_index)?;
        out.set_item("community", obs.community)?;
        out.set_item("pseudo_id", obs.pseudo_id.map(|p| p.0))?;
        out.set_item("first_time", obs.first_time)?;
        Ok(out)
    }

    #[getter]
    fn query_count(&self) -> u64 {
        self.inner.query_count()
    }

    fn distinct_seen(&self, box_index: usize) -> PyResult<u64> {
        if box_index >= self.inner.num_boxes() {
            return Err(PyIndexError::new_err(format!(
                "box index {box_index} out of range"
            )));
        }
        Ok(self.inner.distinct_seen(box_index))
    }
}

/// Names of all estimators.
#[pyfunction]
fn algorithm_names() -> Vec<&'static str> {
    AlgorithmId::ALL.iter().map(|a| a.name()).collect()
}

/// Runs one estimator against `oracle` with budget `t`.
#[pyfunction]
#[pyo3(signature = (name, oracle, t, box_sizes=None))]
fn run_algorithm<'py>(
    py: Python<'py>,
    name: &str,
    oracle: &mut PyOracle,
    t: u64,
    box_sizes: Option<Vec<u64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let id = algorithm(name)?;
    let r = algorithms::run(id, &mut oracle.inner, t, box_sizes.as_deref()).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("estimate", r.estimate)?;
    out.set_item("queries_used", r.queries_used)?;
    out.set_item("elimination_order", r.elimination_order)?;
    out.set_item("tallies", r.tallies)?;
    Ok(out)
}

fn estimate_dict<'py>(py: Python<'py>, e: &ErrorEstimate) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("algorithm", e.algorithm.name())?;
    out.set_item("t", e.budget)?;
    out.set_item("trials", e.trials)?;
    out.set_item("errors", e.errors)?;
    out.set_item("p_hat", e.p_hat)?;
    out.set_item("ci_low", e.ci_low)?;
    out.set_item("ci_high", e.ci_high)?;
    Ok(out)
}

/// Monte Carlo error rate with a 95% Wilson interval.
#[pyfunction]
#[pyo3(signature = (instance, name, t, trials=montecarlo::DEFAULT_TRIALS, seed=0, box_sizes_known=None))]
fn estimate_error<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    name: &str,
    t: u64,
    trials: u64,
    seed: u64,
    box_sizes_known: Option<bool>,
) -> PyResult<Bound<'py, PyDict>> {
    let id = algorithm(name)?;
    let knowledge = KnowledgeMode {
        box_sizes_known: box_sizes_known.unwrap_or(id.requires_box_sizes()),
    };
    let d = &instance.inner;
    let e = py
        .detach(|| montecarlo::estimate_error(d, id, knowledge, t, trials, seed))
        .map_err(value_error)?;
    estimate_dict(py, &e)
}

/// Runs an experiment config given as JSON text. Relative instance paths
/// resolve against the current directory.
#[pyfunction]
#[pyo3(signature = (config_json, threads=None))]
fn sweep<'py>(
    py: Python<'py>,
    config_json: &str,
    threads: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = ExperimentConfig::from_json(config_json).map_err(value_error)?;
    let d = config.instance.load(None).map_err(value_error)?;
    let estimates = py
        .detach(|| montecarlo::sweep_with_threads(&config, &d, threads))
        .map_err(value_error)?;
    estimates.iter().map(|e| estimate_dict(py, e)).collect()
}

#[pyfunction]
#[pyo3(signature = (successes, n, z=montecarlo::Z95))]
fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    montecarlo::wilson_interval(successes, n, z)
}

/// Hardness measures: `H`, `H2`, `Hc` for separated instances, `Hb`,
/// `Hb2`, `Gamma`, `gamma_box` for disjoint-box instances.
#[pyfunction]
fn hardness<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Bound<'py, PyDict>> {
    let d = &instance.inner;
    let out = PyDict::new(py);
    match d.classify_setting() {
        community_mode::Setting::Separated => {
            let h = bounds::hardness_separated(d).map_err(value_error)?;
            out.set_item("H", h.h)?;
            out.set_item("H2", h.h2)?;
            out.set_item("Hc", h.hc)?;
        }
        _ => {
            let h = bounds::hardness_box(d).map_err(value_error)?;
            out.set_item("Hb", h.hb)?;
            out.set_item("Hb2", h.hb2)?;
            out.set_item("Gamma", h.gamma)?;
            out.set_item("gamma_box", h.gamma_box)?;
        }
    }
    Ok(out)
}

/// Natural log of an error upper bound at budget `t`, and whether `t` is
/// inside the range where the bound is stated.
#[pyfunction]
fn upper_bound(name: &str, instance: &PyInstance, t: u64) -> PyResult<(f64, bool)> {
    let v = bounds::upper_bound(bound_id(name)?, &instance.inner, t).map_err(value_error)?;
    Ok((v.log_value, v.valid))
}

#[pyfunction]
fn lower_bound_rate(name: &str, instance: &PyInstance) -> PyResult<f64> {
    bounds::lower_bound_rate(rate_id(name)?, &instance.inner).map_err(value_error)
}

/// Perturbed instance with a different mode that is no harder. `kind` is
/// "separated" or "box".
#[pyfunction]
#[pyo3(signature = (instance, kind="separated"))]
fn alternate_instance<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    kind: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = match kind.to_ascii_lowercase().as_str() {
        "separated" => AlternateKind::Separated,
        "box" | "disjoint_box" | "disjointbox" => AlternateKind::DisjointBox,
        other => return Err(value_error(format!("unknown alternate kind {other:?}"))),
    };
    let a = bounds::alternate_instance(&instance.inner, kind).map_err(value_error)?;
    let check = bounds::check_alternate(&instance.inner, &a, kind).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("box", a.box_index)?;
    out.set_item("community", a.community)?;
    out.set_item("new_size", a.new_size)?;
    out.set_item("instance", PyInstance { inner: a.instance })?;
    out.set_item("mode_flipped", check.mode_flipped)?;
    out.set_item("hardness_before", check.hardness_before)?;
    out.set_item("hardness_after", check.hardness_after)?;
    Ok(out)
}

/// Builds an instance from a delimited record file. Columns are header
/// names or 0-based positions. Returns `(instance, rows, malformed)`.
#[pyfunction]
#[pyo3(signature = (path, box_column, community_column, normalization="none", delimiter=',', has_header=true))]
fn ingest_csv(
    path: PathBuf,
    box_column: &Bound<'_, PyAny>,
    community_column: &Bound<'_, PyAny>,
    normalization: &str,
    delimiter: char,
    has_header: bool,
) -> PyResult<(PyInstance, u64, u64)> {
    if !delimiter.is_ascii() {
        return Err(value_error("delimiter must be a single ASCII character"));
    }
    let spec = IngestSpec {
        path,
        box_column: column(box_column)?,
        community_column: column(community_column)?,
        delimiter: delimiter as u8,
        has_header,
        normalization: normalization
            .parse::<Normalization>()
            .map_err(value_error)?,
    };
    let r = ingest::ingest_csv(&spec).map_err(value_error)?;
    Ok((PyInstance { inner: r.instance }, r.rows, r.malformed))
}

#[pymodule]
#[pyo3(name = "community_mode")]
fn community_mode_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyOracle>()?;
    m.add_function(wrap_pyfunction!(algorithm_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_algorithm, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_error, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(hardness, m)?)?;
    m.add_function(wrap_pyfunction!(upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_rate, m)?)?;
    m.add_function(wrap_pyfunction!(alternate_instance, m)?)?;
    m.add_function(wrap_pyfunction!(ingest_csv, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
