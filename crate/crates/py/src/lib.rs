//! Python bindings. Arrays cross the boundary as nested lists; wrap them with
//! `numpy.asarray` on the Python side when needed.

use std::path::PathBuf;
use std::sync::Arc;

use cohflow::fields::{eval_double_gyre, eval_duffing, FieldParams, SharedField};
use cohflow::io::binary::{read_ensemble, write_clustering, write_ensemble};
use cohflow::io::{export_field_csv, export_field_pgm, parse_config, read_field_csv, RunReport};
use cohflow::schedules::{self, AdaptivePlan, OnTheFlyState};
use cohflow::{
    Clustering, DoubleGyreParams, Error, ErrorCategory, FieldRegistry, GridSpec, KMeansConfig, ScalarField, TimeSpec,
    TrajectoryEnsemble, Variant, WcveOptions,
};
use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyIndexError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn rows_to_array(rows: Vec<Vec<f64>>) -> Result<Array2<f64>, Error> {
    let m = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Shape("rows have different lengths".into()));
    }
    Array2::from_shape_vec((m, p), rows.concat()).map_err(|e| Error::Shape(e.to_string()))
}

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.category() {
        ErrorCategory::Config | ErrorCategory::Numeric => PyValueError::new_err(msg),
        ErrorCategory::Integration => PyArithmeticError::new_err(msg),
        ErrorCategory::Io => PyOSError::new_err(msg),
    }
}

fn variant(name: &str) -> PyResult<WcveOptions> {
    let variant = match name {
        "sd" => Variant::Sd,
        "mad" => Variant::Mad,
        other => return Err(PyValueError::new_err(format!("variant must be 'sd' or 'mad', got '{other}'"))),
    };
    Ok(WcveOptions { variant })
}

/// Regular seed grid; `dx`/`dy` must divide the extents.
#[pyclass(name = "GridSpec", module = "cohflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGridSpec(GridSpec);

#[pymethods]
impl PyGridSpec {
    #[new]
    #[pyo3(signature = (xmin, xmax, ymin, ymax, dx, dy=None))]
    fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, dx: f64, dy: Option<f64>) -> PyResult<Self> {
        GridSpec::new(xmin, xmax, ymin, ymax, dx, dy.unwrap_or(dx)).map(Self).map_err(err)
    }

    #[getter]
    fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.0.xmin, self.0.xmax, self.0.ymin, self.0.ymax)
    }

    /// Intervals along x and y; nodes are one more per axis.
    #[getter]
    fn intervals(&self) -> (usize, usize) {
        (self.0.nx, self.0.ny)
    }

    #[getter]
    fn spacing(&self) -> (f64, f64) {
        (self.0.dx(), self.0.dy())
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    /// Position of seed `index` (x fastest).
    fn node(&self, index: usize) -> PyResult<(f64, f64)> {
        if index >= self.0.node_count() {
            return Err(PyIndexError::new_err(index));
        }
        let [x, y] = self.0.node(index);
        Ok((x, y))
    }

    fn __repr__(&self) -> String {
        let g = &self.0;
        format!(
            "GridSpec([{}, {}] x [{}, {}], {}x{} intervals)",
            g.xmin, g.xmax, g.ymin, g.ymax, g.nx, g.ny
        )
    }
}

#[pyclass(name = "TimeSpec", module = "cohflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTimeSpec(TimeSpec);

#[pymethods]
impl PyTimeSpec {
    #[new]
    #[pyo3(signature = (dt, steps, t0=0.0))]
    fn new(dt: f64, steps: usize, t0: f64) -> PyResult<Self> {
        TimeSpec::new(t0, dt, steps).map(Self).map_err(err)
    }

    /// `steps = round(horizon / dt)`.
    #[staticmethod]
    #[pyo3(signature = (horizon, dt, t0=0.0))]
    fn over(horizon: f64, dt: f64, t0: f64) -> PyResult<Self> {
        TimeSpec::new(t0, dt, TimeSpec::steps_for(horizon, dt)).map(Self).map_err(err)
    }

    #[getter]
    fn t0(&self) -> f64 {
        self.0.t0
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.0.t_end()
    }

    fn __repr__(&self) -> String {
        format!("TimeSpec(t0={}, dt={}, steps={})", self.0.t0, self.0.dt, self.0.steps)
    }
}

/// A registered velocity field, e.g. `Field("double-gyre", epsilon=0.25)`.
#[pyclass(name = "Field", module = "cohflow", frozen)]
struct PyField {
    name: String,
    inner: SharedField,
}

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (name, **params))]
    fn new(name: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = FieldParams::new();
        if let Some(d) = params {
            for (k, v) in d.iter() {
                p.insert(k.extract()?, v.extract()?);
            }
        }
        let inner = FieldRegistry::with_builtins().build(name, &p).map_err(err)?;
        Ok(Self {
            name: name.to_owned(),
            inner,
        })
    }

    #[staticmethod]
    fn names() -> Vec<String> {
        FieldRegistry::with_builtins().names().map(str::to_owned).collect()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.name
    }

    fn velocity(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let mut out = [0.0; 2];
        self.inner.velocity(&[x, y], t, &mut out);
        (out[0], out[1])
    }

    fn __repr__(&self) -> String {
        format!("Field('{}')", self.name)
    }
}

#[pyfunction]
#[pyo3(signature = (x, y, t, amplitude=0.1, omega=std::f64::consts::PI / 5.0, epsilon=0.1))]
fn double_gyre_velocity(x: f64, y: f64, t: f64, amplitude: f64, omega: f64, epsilon: f64) -> PyResult<(f64, f64)> {
    let p = DoubleGyreParams::new(amplitude, omega, epsilon).map_err(err)?;
    Ok(eval_double_gyre(&p, x, y, t))
}

#[pyfunction]
fn duffing_velocity(x: f64, y: f64, t: f64) -> (f64, f64) {
    eval_duffing(x, y, t)
}

/// Trajectories of every grid seed, one feature row per seed.
#[pyclass(name = "Ensemble", module = "cohflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEnsemble(Arc<TrajectoryEnsemble>);

#[pymethods]
impl PyEnsemble {
    #[staticmethod]
    fn build(py: Python<'_>, field: &PyField, grid: &PyGridSpec, time: &PyTimeSpec) -> PyResult<Self> {
        let f = field.inner.clone();
        let (g, t) = (grid.0, time.0);
        let e = py.detach(move || cohflow::build_ensemble(&f, &g, &t)).map_err(err)?;
        Ok(Self(Arc::new(e)))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        read_ensemble(&path).map(|e| Self(Arc::new(e))).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_ensemble(&self.0, &path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    #[getter]
    fn feature_len(&self) -> usize {
        self.0.feature_len()
    }

    #[getter]
    fn grid(&self) -> PyGridSpec {
        PyGridSpec(*self.0.grid())
    }

    #[getter]
    fn time(&self) -> PyTimeSpec {
        PyTimeSpec(*self.0.time())
    }

    /// `len(self) x feature_len` rows, positions interleaved per sample.
    fn features(&self) -> Vec<Vec<f64>> {
        self.0.features().rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn trajectory(&self, j: usize) -> PyResult<Vec<(f64, f64)>> {
        if j >= self.0.len() {
            return Err(PyIndexError::new_err(j));
        }
        Ok((0..=self.0.steps())
            .map(|i| {
                let p = self.0.position(j, i);
                (p[0], p[1])
            })
            .collect())
    }

    /// Samples `0..=z` only.
    fn prefix(&self, z: usize) -> PyResult<Self> {
        self.0.prefix(z).map(|e| Self(Arc::new(e))).map_err(err)
    }

    /// Every `2**level`-th sample.
    fn subsample(&self, level: u32) -> PyResult<Self> {
        self.0.subsample(level).map(|e| Self(Arc::new(e))).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Ensemble({} trajectories, {} steps)", self.0.len(), self.0.steps())
    }
}

#[pyclass(name = "Clustering", module = "cohflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyClustering(Clustering);

#[pymethods]
impl PyClustering {
    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.labels.clone()
    }

    #[getter]
    fn centroids(&self) -> Vec<Vec<f64>> {
        self.0.centroids.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    #[getter]
    fn wcss(&self) -> f64 {
        self.0.wcss
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    /// WCSS after every iteration.
    #[getter]
    fn history(&self) -> Vec<f64> {
        self.0.history.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn assignment_ops(&self) -> u64 {
        self.0.assignment_ops
    }

    fn sizes(&self) -> Vec<usize> {
        self.0.sizes()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_clustering(&self.0, &path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Clustering(k={}, wcss={:e}, iterations={})",
            self.0.k, self.0.wcss, self.0.iterations
        )
    }
}

/// Per-node values on a grid; undefined nodes are `None`.
#[pyclass(name = "ScalarField", module = "cohflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScalarField(ScalarField);

#[pymethods]
impl PyScalarField {
    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        read_field_csv(&path).map(Self).map_err(err)
    }

    #[getter]
    fn quantity(&self) -> &str {
        &self.0.quantity
    }

    #[getter]
    fn grid(&self) -> PyGridSpec {
        PyGridSpec(self.0.grid)
    }

    #[getter]
    fn interval(&self) -> (f64, f64) {
        (self.0.t0, self.0.t1)
    }

    /// Row-major from the bottom row (`ymin`), x fastest.
    #[getter]
    fn values(&self) -> Vec<Option<f64>> {
        self.0.values().to_vec()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<Option<f64>> {
        if i > self.0.grid.nx || j > self.0.grid.ny {
            return Err(PyIndexError::new_err((i, j)));
        }
        Ok(self.0.get(i, j))
    }

    #[getter]
    fn min(&self) -> Option<f64> {
        self.0.min_finite()
    }

    #[getter]
    fn max(&self) -> Option<f64> {
        self.0.max_finite()
    }

    #[getter]
    fn undefined_count(&self) -> usize {
        self.0.undefined_count()
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        export_field_csv(&self.0, &path).map_err(err)
    }

    fn to_pgm(&self, path: PathBuf) -> PyResult<()> {
        export_field_pgm(&self.0, &path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.values().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScalarField('{}', {} nodes, {} undefined)",
            self.0.quantity,
            self.0.values().len(),
            self.0.undefined_count()
        )
    }
}

/// k-means over an `Ensemble` or a list of equal-length rows.
#[pyfunction]
#[pyo3(signature = (data, k, seed=0, max_iterations=300, restarts=1, centroids=None))]
fn kmeans(
    py: Python<'_>,
    data: &Bound<'_, PyAny>,
    k: usize,
    seed: u64,
    max_iterations: usize,
    restarts: usize,
    centroids: Option<Vec<Vec<f64>>>,
) -> PyResult<PyClustering> {
    let rows = match data.cast::<PyEnsemble>() {
        Ok(e) => e.get().0.features().clone(),
        Err(_) => rows_to_array(data.extract()?).map_err(err)?,
    };
    let mut cfg = KMeansConfig::new(k, seed)
        .with_max_iterations(max_iterations)
        .with_restarts(restarts);
    if let Some(c) = centroids {
        cfg = cfg.with_centroids(rows_to_array(c).map_err(err)?);
    }
    py.detach(|| cohflow::kmeans(rows.view(), &cfg))
        .map(PyClustering)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (ensemble, clustering, variant="sd"))]
fn wcve_field(ensemble: &PyEnsemble, clustering: &PyClustering, variant: &str) -> PyResult<PyScalarField> {
    cohflow::wcve_field(&ensemble.0, &clustering.0, self::variant(variant)?)
        .map(PyScalarField)
        .map_err(err)
}

/// Forward FTLE from the first and last samples of the ensemble.
#[pyfunction]
fn ftle_field(ensemble: &PyEnsemble) -> PyResult<PyScalarField> {
    cohflow::flow_map_from_ensemble(&ensemble.0)
        .and_then(|fm| cohflow::ftle_field(&fm))
        .map(PyScalarField)
        .map_err(err)
}

/// Coarse-to-fine clustering; returns `(clustering, field, assignment_ops)`.
#[pyfunction]
#[pyo3(signature = (ensemble, k, levels, seed=0, variant="sd"))]
fn adaptive_wcve(
    py: Python<'_>,
    ensemble: &PyEnsemble,
    k: usize,
    levels: u32,
    seed: u64,
    variant: &str,
) -> PyResult<(PyClustering, PyScalarField, u64)> {
    let opts = self::variant(variant)?;
    let e = ensemble.0.clone();
    let out = py
        .detach(move || schedules::adaptive_wcve(&e, k, &AdaptivePlan::new(levels), seed, opts))
        .map_err(err)?;
    let ops = out.assignment_ops();
    Ok((PyClustering(out.clustering), PyScalarField(out.field), ops))
}

/// Incremental clustering over a growing (or shrinking) time prefix.
#[pyclass(name = "OnTheFly", module = "cohflow")]
struct PyOnTheFly {
    ensemble: Arc<TrajectoryEnsemble>,
    state: OnTheFlyState,
}

#[pymethods]
impl PyOnTheFly {
    #[staticmethod]
    #[pyo3(signature = (ensemble, z0, k, seed=0, max_iterations=300))]
    fn start(ensemble: &PyEnsemble, z0: usize, k: usize, seed: u64, max_iterations: usize) -> PyResult<Self> {
        let cfg = KMeansConfig::new(k, seed).with_max_iterations(max_iterations);
        let state = schedules::onthefly_start(&ensemble.0, z0, &cfg).map_err(err)?;
        Ok(Self {
            ensemble: ensemble.0.clone(),
            state,
        })
    }

    fn advance(&mut self, alpha: usize) -> PyResult<()> {
        self.state = schedules::onthefly_advance(self.state.clone(), &self.ensemble, alpha).map_err(err)?;
        Ok(())
    }

    fn retarget(&mut self, z: usize) -> PyResult<()> {
        self.state = schedules::retarget_interval(self.state.clone(), &self.ensemble, z).map_err(err)?;
        Ok(())
    }

    #[getter]
    fn z(&self) -> usize {
        self.state.z
    }

    #[getter]
    fn clustering(&self) -> PyClustering {
        PyClustering(self.state.clustering.clone())
    }

    #[getter]
    fn assignment_ops(&self) -> u64 {
        self.state.assignment_ops()
    }

    /// `(z, iterations, wcss)` for every clustering so far.
    #[getter]
    fn stages(&self) -> Vec<(usize, usize, f64)> {
        self.state.stages.iter().map(|s| (s.z, s.iterations, s.wcss)).collect()
    }

    #[pyo3(signature = (variant="sd"))]
    fn field(&self, variant: &str) -> PyResult<PyScalarField> {
        self.state
            .field(&self.ensemble, self::variant(variant)?)
            .map(PyScalarField)
            .map_err(err)
    }
}

/// Full incremental sweep; returns `(clustering, field, assignment_ops)`.
#[pyfunction]
#[pyo3(signature = (ensemble, k, alpha, seed=0, z0=None, variant="sd"))]
fn onthefly_wcve(
    py: Python<'_>,
    ensemble: &PyEnsemble,
    k: usize,
    alpha: usize,
    seed: u64,
    z0: Option<usize>,
    variant: &str,
) -> PyResult<(PyClustering, PyScalarField, u64)> {
    let opts = self::variant(variant)?;
    let e = ensemble.0.clone();
    let s = py
        .detach(move || schedules::onthefly_run(&e, alpha, z0, &KMeansConfig::new(k, seed)))
        .map_err(err)?;
    let f = s.field(&ensemble.0, opts).map_err(err)?;
    let ops = s.assignment_ops();
    Ok((PyClustering(s.clustering), PyScalarField(f), ops))
}

fn report<'py>(py: Python<'py>, r: RunReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("output", r.output)?;
    d.set_item("artifacts", r.artifacts)?;
    d.set_item("notes", r.notes)?;
    d.set_item("field", PyScalarField(r.field))?;
    d.set_item("clustering", r.clustering.map(PyClustering))?;
    Ok(d)
}

/// Runs a JSON config end to end; `output` overrides the configured directory.
#[pyfunction]
#[pyo3(signature = (config, output=None))]
fn run_config<'py>(py: Python<'py>, config: &str, output: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = parse_config(config).map_err(err)?;
    if let Some(o) = output {
        cfg.output = o;
    }
    let r = py.detach(|| cohflow::io::run(&cfg)).map_err(err)?;
    report(py, r)
}

/// Repeats the run recorded in a manifest.
#[pyfunction]
#[pyo3(signature = (manifest, output=None))]
fn rerun<'py>(py: Python<'py>, manifest: PathBuf, output: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| cohflow::io::rerun(&manifest, output.as_deref()))
        .map_err(err)?;
    report(py, r)
}

#[pymodule]
#[pyo3(name = "cohflow")]
pub fn cohflow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyTimeSpec>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyClustering>()?;
    m.add_class::<PyScalarField>()?;
    m.add_class::<PyOnTheFly>()?;
    m.add_function(wrap_pyfunction!(double_gyre_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(duffing_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(wcve_field, m)?)?;
    m.add_function(wrap_pyfunction!(ftle_field, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_wcve, m)?)?;
    m.add_function(wrap_pyfunction!(onthefly_wcve, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(rerun, m)?)?;
    Ok(())
}
