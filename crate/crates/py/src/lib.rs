//! Python bindings. Signals cross the boundary as lists of floats and
//! signal sets as lists of rows.

use std::path::PathBuf;
use std::sync::Arc;

use gad_core::data::{generate_sbm, generate_smooth_signals};
use gad_core::denoiser::{
    frequency_response_at, train as train_gcnn, Architecture, Checkpoint, ClosedFormDenoiser, GcnnDenoiser,
    TrainConfig,
};
use gad_core::eval::{self, MetricsReport};
use gad_core::io;
use gad_core::sampler::{sample_batch, GaussianOracle, SamplerConfig, ScoreModel};
use gad_core::{
    DiffusionProcess, DriftSchedule, ErrorKind, ForwardModel, GadError, Method, ProcessParams, SignalDataset, Spectrum,
    Split,
};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: GadError) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Validation => PyValueError::new_err(msg),
        ErrorKind::Numerical => PyArithmeticError::new_err(msg),
        ErrorKind::Io => PyOSError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for gad_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn vector(x: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(x)
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn dataset(rows: &[Vec<f64>]) -> PyResult<SignalDataset> {
    SignalDataset::new(rows_to_matrix(rows)?, Split::Test).py()
}

fn method(name: &str) -> PyResult<Method> {
    name.parse().py()
}

/// Undirected weighted graph, stored with its Laplacian eigenbasis.
#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    graph: gad_core::Graph,
    spectrum: Arc<Spectrum>,
}

impl PyGraph {
    fn wrap(graph: gad_core::Graph) -> PyResult<Self> {
        let spectrum = Arc::new(Spectrum::from_graph(&graph).py()?);
        Ok(PyGraph { graph, spectrum })
    }
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(adjacency: Vec<Vec<f64>>) -> PyResult<Self> {
        Self::wrap(gad_core::Graph::new(rows_to_matrix(&adjacency)?).py()?)
    }

    /// Connected stochastic block model; returns `(graph, communities)`.
    #[staticmethod]
    #[pyo3(signature = (nodes_per_community=10, num_communities=2, p_in=0.6, p_out=0.1, seed=0))]
    fn sbm(nodes_per_community: usize, num_communities: usize, p_in: f64, p_out: f64, seed: u64) -> PyResult<(Self, Vec<usize>)> {
        let (g, c) = generate_sbm(nodes_per_community, num_communities, p_in, p_out, seed).py()?;
        Ok((Self::wrap(g)?, c))
    }

    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        Self::wrap(io::load_adjacency_csv(&path).py()?)
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        io::save_adjacency_csv(&self.graph, &path).py()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    #[getter]
    fn adjacency(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.graph.adjacency())
    }

    #[getter]
    fn laplacian(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.spectrum.laplacian())
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum.eigenvalues().iter().copied().collect()
    }

    /// Eigenvectors as rows of the returned list (row `i` is `v_i`).
    #[getter]
    fn eigenvectors(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.spectrum.eigenvectors().transpose())
    }

    fn gft(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.spectrum.gft(&vector(x)).py()?.iter().copied().collect())
    }

    fn igft(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.spectrum.igft(&vector(coeffs)).py()?.iter().copied().collect())
    }

    /// SHA-256 of the canonical adjacency CSV.
    fn hash(&self) -> String {
        io::graph_hash(&self.graph)
    }

    /// Smooth community signals, one row per signal.
    #[pyo3(signature = (communities, num_signals, tau=5.0, seed=0))]
    fn smooth_signals(&self, communities: Vec<usize>, num_signals: usize, tau: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let ds = generate_smooth_signals(&self.spectrum, &communities, num_signals, tau, Split::Train, seed).py()?;
        Ok(matrix_to_rows(ds.signals()))
    }

    fn quadratic_variation(&self, x: Vec<f64>) -> PyResult<f64> {
        eval::quadratic_variation(&self.spectrum, &vector(x)).py()
    }

    fn spectral_centroid(&self, x: Vec<f64>) -> PyResult<f64> {
        eval::spectral_centroid(&self.spectrum, &vector(x)).py()
    }

    fn degree_correlation(&self, x: Vec<f64>) -> PyResult<f64> {
        eval::degree_correlation(&self.spectrum, &vector(x)).py()
    }

    fn __repr__(&self) -> String {
        format!("Graph(num_nodes={})", self.graph.num_nodes())
    }
}

/// Drift schedule `c_t` with its closed-form integral `c̄_t`.
#[pyclass(name = "Schedule", frozen)]
struct PySchedule(DriftSchedule);

#[pymethods]
impl PySchedule {
    #[staticmethod]
    #[pyo3(signature = (c_min=0.05, c_0=8.0, alpha=4.0, horizon=1.0))]
    fn fcps(c_min: f64, c_0: f64, alpha: f64, horizon: f64) -> PyResult<Self> {
        Ok(PySchedule(DriftSchedule::fcps(c_min, c_0, alpha, horizon).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (c, horizon=1.0))]
    fn uls(c: f64, horizon: f64) -> PyResult<Self> {
        Ok(PySchedule(DriftSchedule::uls(c, horizon).py()?))
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    fn drift(&self, t: f64) -> PyResult<f64> {
        self.0.drift_at(t).py()
    }

    fn integrated(&self, t: f64) -> PyResult<f64> {
        self.0.integrated_drift(t).py()
    }
}

/// Forward heat-diffusion model on a graph.
#[pyclass(name = "ForwardModel", frozen)]
struct PyForwardModel(ForwardModel);

#[pymethods]
impl PyForwardModel {
    #[new]
    #[pyo3(signature = (graph, schedule=None, sigma=1.0, gamma=0.1))]
    fn new(graph: PyRef<'_, PyGraph>, schedule: Option<PyRef<'_, PySchedule>>, sigma: f64, gamma: f64) -> PyResult<Self> {
        let schedule = schedule.map_or_else(DriftSchedule::default, |s| s.0);
        Ok(PyForwardModel(ForwardModel::new(graph.spectrum.clone(), schedule, sigma, gamma).py()?))
    }

    /// Spectral response `e^{−c̄_t(λ_i+γ)}`.
    fn filter(&self, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.0.filter_diag(t).py()?.iter().copied().collect())
    }

    /// Spectral variances of `x_t` given `x_0`.
    fn variances(&self, t: f64) -> Vec<f64> {
        self.0.variances(t).iter().copied().collect()
    }

    fn marginal_mean(&self, x0: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.0.marginal(&vector(x0), t).py()?.mean().iter().copied().collect())
    }

    fn marginal_covariance(&self, x0: Vec<f64>, t: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(matrix_to_rows(&self.0.marginal(&vector(x0), t).py()?.covariance()))
    }

    #[pyo3(signature = (x0, t, seed=0))]
    fn sample_marginal(&self, x0: Vec<f64>, t: f64, seed: u64) -> PyResult<Vec<f64>> {
        Ok(self.0.marginal(&vector(x0), t).py()?.sample_seeded(seed).iter().copied().collect())
    }

    #[pyo3(signature = (x0, num_steps=1000, seed=0))]
    fn euler_simulate(&self, x0: Vec<f64>, num_steps: usize, seed: u64) -> PyResult<Vec<f64>> {
        Ok(self.0.euler_forward_simulate(&vector(x0), num_steps, seed).py()?.iter().copied().collect())
    }

    /// Closed-form MAP denoiser output for regularization `alpha_reg`.
    fn denoise(&self, x_t: Vec<f64>, t: f64, alpha_reg: f64) -> PyResult<Vec<f64>> {
        let den = ClosedFormDenoiser::new(self.0.clone(), alpha_reg).py()?;
        Ok(den.denoise(&vector(x_t), t).py()?.iter().copied().collect())
    }
}

/// Frequency response of the closed-form denoiser at one eigenvalue.
#[pyfunction]
#[pyo3(signature = (lam, cbar, gamma=0.1, sigma=1.0, alpha_reg=1.0))]
fn frequency_response(lam: f64, cbar: f64, gamma: f64, sigma: f64, alpha_reg: f64) -> f64 {
    frequency_response_at(lam, cbar, gamma, sigma, alpha_reg)
}

/// Graph-convolutional denoiser tied to one forward process.
#[pyclass(name = "Denoiser")]
struct PyDenoiser {
    net: GcnnDenoiser,
    method: Method,
    params: ProcessParams,
}

#[pymethods]
impl PyDenoiser {
    #[new]
    #[pyo3(signature = (graph, method="gad", layers=3, order=3, hidden_width=16, seed=0))]
    fn new(graph: PyRef<'_, PyGraph>, method: &str, layers: usize, order: usize, hidden_width: usize, seed: u64) -> PyResult<Self> {
        let params = ProcessParams::default();
        let arch = Architecture { layers, order, hidden_width };
        let net = GcnnDenoiser::init(graph.spectrum.clone(), arch, params.schedule.horizon(), seed).py()?;
        Ok(PyDenoiser { net, method: self::method(method)?, params })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.method.as_str()
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.net.coefficients().len()
    }

    /// Raw network output for an already scaled input.
    fn predict(&self, x_t: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.net.predict(&vector(x_t), t).py()?.iter().copied().collect())
    }

    /// Trains in place on `signals` (one row per signal); returns the loss trace.
    #[pyo3(signature = (signals, num_iterations=5000, learning_rate=1e-3, batch_size=32, seed=0))]
    fn train(&mut self, signals: Vec<Vec<f64>>, num_iterations: usize, learning_rate: f64, batch_size: usize, seed: u64) -> PyResult<Vec<f64>> {
        let ds = dataset(&signals)?;
        let process = self.params.build(self.method, self.net.spectrum().clone()).py()?;
        let cfg = TrainConfig { num_iterations, learning_rate, batch_size, seed, ..Default::default() };
        Ok(train_gcnn(&mut self.net, &ds, &process, &cfg).py()?.0)
    }

    /// Reverse-SDE samples, one row per signal.
    #[pyo3(signature = (num_samples, num_steps=10, seed=0, final_denoise=true))]
    fn sample(&self, num_samples: usize, num_steps: usize, seed: u64, final_denoise: bool) -> PyResult<Vec<Vec<f64>>> {
        let process = self.params.build(self.method, self.net.spectrum().clone()).py()?;
        let model = ScoreModel::gcnn_tweedie(process, self.net.clone()).py()?;
        let x = sample_batch(&model, &SamplerConfig { num_steps, seed, final_denoise }, num_samples).py()?;
        Ok(matrix_to_rows(&x.transpose()))
    }

    fn save(&self, path: PathBuf, graph_hash: String) -> PyResult<()> {
        Checkpoint::new(self.method, &self.net, self.params, graph_hash).save(&path).py()
    }

    #[staticmethod]
    fn load(path: PathBuf, graph: PyRef<'_, PyGraph>) -> PyResult<Self> {
        let ckpt = Checkpoint::load(&path).py()?;
        let net = ckpt.to_denoiser(graph.spectrum.clone(), &io::graph_hash(&graph.graph)).py()?;
        Ok(PyDenoiser { net, method: ckpt.method, params: ckpt.forward_model_params })
    }
}

/// Reverse-SDE samples driven by the exact score of a Gaussian data law.
#[pyfunction]
#[pyo3(signature = (graph, mean, covariance, num_samples, num_steps=1000, method="gad", seed=0))]
fn sample_gaussian_oracle(
    graph: PyRef<'_, PyGraph>,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    num_samples: usize,
    num_steps: usize,
    method: &str,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let process = ProcessParams::default().build(self::method(method)?, graph.spectrum.clone()).py()?;
    let oracle = GaussianOracle::new(&graph.spectrum, vector(mean), rows_to_matrix(&covariance)?).py()?;
    let model = ScoreModel::gaussian_oracle(process, oracle);
    let x = sample_batch(&model, &SamplerConfig { num_steps, seed, final_denoise: true }, num_samples).py()?;
    Ok(matrix_to_rows(&x.transpose()))
}

#[pyfunction]
fn mmd(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    eval::mmd_scalar(&a, &b).py()
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("qv_mmd", r.qv_mmd)?;
    d.set_item("sc_mmd", r.sc_mmd)?;
    d.set_item("dc_mmd", r.dc_mmd)?;
    d.set_item("ammd", r.ammd)?;
    d.set_item("num_generated", r.num_generated)?;
    d.set_item("num_test", r.num_test)?;
    d.set_item("method", &r.method)?;
    d.set_item("num_steps", r.num_steps)?;
    d.set_item("dc_excluded", r.dc_excluded)?;
    Ok(d)
}

/// QV/SC/DC MMDs and their average between two signal sets.
#[pyfunction]
#[pyo3(signature = (generated, test, graph, method="gad", num_steps=None))]
fn evaluate<'py>(
    py: Python<'py>,
    generated: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
    graph: PyRef<'_, PyGraph>,
    method: &str,
    num_steps: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = eval::evaluate(&dataset(&generated)?, &dataset(&test)?, &graph.spectrum, method, num_steps).py()?;
    report_dict(py, &r)
}

#[pymodule]
fn gad(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyForwardModel>()?;
    m.add_class::<PyDenoiser>()?;
    m.add_function(wrap_pyfunction!(frequency_response, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gaussian_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(mmd, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
