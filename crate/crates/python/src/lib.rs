//! Python bindings. Matrices cross the boundary as lists of rows (anything
//! that indexes like a 2-D sequence, including numpy arrays, is accepted).

use kronshrink::eval::{self, BenchmarkConfig};
use kronshrink::solver::{self, plug_in_lambdas, theoretic_lambdas};
use kronshrink::synth::{self, CorruptionSpec, KronSumSpec};
use kronshrink::{shrinkage, Dims, Matrix, RegParams, RobustKronEstimate, SampleSet, SolverConfig, StCovariance};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<f64>>;

fn py_err(e: kronshrink::Error) -> PyErr {
    match e {
        kronshrink::Error::Io(_) => PyOSError::new_err(e.to_string()),
        kronshrink::Error::Capability(_) | kronshrink::Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("matrix rows have unequal lengths"));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn covariance(rows: Vec<Vec<f64>>, p_t: usize, p_s: usize) -> PyResult<StCovariance> {
    StCovariance::new(Dims::new(p_t, p_s).map_err(py_err)?, to_matrix(rows)?).map_err(py_err)
}

#[pyclass(name = "SolverConfig", from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    inner: SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (tau0=0.5, max_iter=500, tol=1e-8, backtrack=0.5, symmetrize=true, init_seed=None))]
    fn new(
        tau0: f64,
        max_iter: usize,
        tol: f64,
        backtrack: f64,
        symmetrize: bool,
        init_seed: Option<u64>,
    ) -> PyResult<Self> {
        let inner = SolverConfig { tau0, max_iter, tol, backtrack, symmetrize, init_seed };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn tau0(&self) -> f64 {
        self.inner.tau0
    }

    #[getter]
    fn max_iter(&self) -> usize {
        self.inner.max_iter
    }

    #[getter]
    fn tol(&self) -> f64 {
        self.inner.tol
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Result of a robust Kronecker PCA fit.
#[pyclass(name = "Estimate", frozen)]
struct PyEstimate {
    inner: RobustKronEstimate,
}

#[pymethods]
impl PyEstimate {
    #[getter]
    fn sigma_hat(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.sigma_hat.matrix())
    }

    #[getter]
    fn theta_hat(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.theta_hat().matrix())
    }

    #[getter]
    fn gamma_hat(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.gamma_hat().matrix())
    }

    /// Low-rank part in the solver's own domain (rearranged, or Toeplitz diagonals).
    #[getter]
    fn l_hat(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.l_hat)
    }

    #[getter]
    fn s_hat(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.s_hat)
    }

    #[getter]
    fn lambda_theta(&self) -> f64 {
        self.inner.params.lambda_theta
    }

    #[getter]
    fn lambda_gamma(&self) -> f64 {
        self.inner.params.lambda_gamma
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.diagnostics.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.diagnostics.iterations
    }

    #[getter]
    fn separation_rank(&self) -> usize {
        self.inner.diagnostics.separation_rank
    }

    #[getter]
    fn sparse_support(&self) -> usize {
        self.inner.diagnostics.sparse_support
    }

    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.inner.diagnostics.objective_trace.clone()
    }

    /// Largest KKT residual component.
    #[getter]
    fn kkt_residual(&self) -> f64 {
        self.inner.diagnostics.kkt.max()
    }

    /// Full diagnostics as JSON.
    fn diagnostics_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.diagnostics).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn save(&self, dir: &str) -> PyResult<()> {
        kronshrink::io::write_estimate(dir.as_ref(), &self.inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let d = &self.inner.diagnostics;
        format!(
            "Estimate(p_t={}, p_s={}, rank={}, support={}, iterations={}, converged={})",
            self.inner.dims.p_t, self.inner.dims.p_s, d.separation_rank, d.sparse_support, d.iterations, d.converged
        )
    }
}

/// Rearrange a `p_t·p_s` square matrix into `p_t² × p_s²`.
#[pyfunction]
fn rearrange(m: Vec<Vec<f64>>, p_t: usize, p_s: usize) -> PyResult<Vec<Vec<f64>>> {
    let dims = Dims::new(p_t, p_s).map_err(py_err)?;
    Ok(to_rows(kronshrink::rearrange::rearrange_matrix(&to_matrix(m)?, dims).map_err(py_err)?.matrix()))
}

#[pyfunction]
fn inverse_rearrange(r: Vec<Vec<f64>>, p_t: usize, p_s: usize) -> PyResult<Vec<Vec<f64>>> {
    let dims = Dims::new(p_t, p_s).map_err(py_err)?;
    Ok(to_rows(&kronshrink::rearrange::inverse_rearrange_matrix(&to_matrix(r)?, dims).map_err(py_err)?))
}

#[pyfunction]
fn kron(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&kronshrink::kron(&to_matrix(a)?, &to_matrix(b)?)))
}

#[pyfunction]
fn svt(m: Vec<Vec<f64>>, lam: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&shrinkage::svt(&to_matrix(m)?, lam).map_err(py_err)?))
}

#[pyfunction]
fn soft(m: Vec<Vec<f64>>, lam: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&shrinkage::soft(&to_matrix(m)?, lam).map_err(py_err)?))
}

/// Fit `scm` with weights `(lambda_theta, lambda_gamma)`; `float("inf")`
/// disables a component.
#[pyfunction]
#[pyo3(signature = (scm, p_t, p_s, lambda_theta, lambda_gamma, toeplitz=false, config=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    scm: Vec<Vec<f64>>,
    p_t: usize,
    p_s: usize,
    lambda_theta: f64,
    lambda_gamma: f64,
    toeplitz: bool,
    config: Option<PySolverConfig>,
) -> PyResult<PyEstimate> {
    let scm = covariance(scm, p_t, p_s)?;
    let params = RegParams::new(lambda_theta, lambda_gamma).map_err(py_err)?;
    let config = config.map(|c| c.inner).unwrap_or_default();
    let inner = py.detach(|| solver::solve(&scm, &params, &config, toeplitz)).map_err(py_err)?;
    Ok(PyEstimate { inner })
}

/// Singular values of the rearranged covariance.
#[pyfunction]
fn kron_spectrum(m: Vec<Vec<f64>>, p_t: usize, p_s: usize) -> PyResult<Vec<f64>> {
    Ok(kronshrink::kron_spectrum(&covariance(m, p_t, p_s)?).map_err(py_err)?.sigmas)
}

/// `(lambda_theta, lambda_gamma)` from the truth's spectral norm and largest variance.
#[pyfunction]
#[pyo3(signature = (sigma_norm, rho, p_t, p_s, n, t0=2.0, eps=0.1, toeplitz=false))]
#[allow(clippy::too_many_arguments)]
fn theory_lambdas(
    sigma_norm: f64,
    rho: f64,
    p_t: usize,
    p_s: usize,
    n: usize,
    t0: f64,
    eps: f64,
    toeplitz: bool,
) -> PyResult<(f64, f64)> {
    let dims = Dims::new(p_t, p_s).map_err(py_err)?;
    let p = theoretic_lambdas(sigma_norm, rho, dims, n, t0, eps, toeplitz).map_err(py_err)?;
    Ok((p.lambda_theta, p.lambda_gamma))
}

/// As `theory_lambdas` with the norms taken from a sample covariance.
#[pyfunction]
#[pyo3(signature = (scm, p_t, p_s, n, t0=2.0, eps=0.1, toeplitz=false))]
fn plug_in(
    scm: Vec<Vec<f64>>,
    p_t: usize,
    p_s: usize,
    n: usize,
    t0: f64,
    eps: f64,
    toeplitz: bool,
) -> PyResult<(f64, f64)> {
    let c = plug_in_lambdas(&covariance(scm, p_t, p_s)?, n, t0, eps, toeplitz).map_err(py_err)?;
    Ok((c.params.lambda_theta, c.params.lambda_gamma))
}

/// Sum of AR Kronecker terms given as `(scale, a_temporal, a_spatial)`.
#[pyfunction]
fn kron_sum_covariance(p_t: usize, p_s: usize, terms: Vec<(f64, f64, f64)>) -> PyResult<Vec<Vec<f64>>> {
    let spec = KronSumSpec::from_ar_params(Dims::new(p_t, p_s).map_err(py_err)?, &terms);
    Ok(to_rows(synth::kron_sum_covariance(&spec).map_err(py_err)?.matrix()))
}

/// Returns `(corrupted, gamma0)`.
#[pyfunction]
#[pyo3(signature = (sigma, p_t, p_s, seed, diag_load=0.5, n_sparse=20, base_magnitude=0.8, decay=0.97,
    n_deleted=0, block_toeplitz=false, psd_floor=1e-3))]
#[allow(clippy::too_many_arguments)]
fn corrupt(
    sigma: Vec<Vec<f64>>,
    p_t: usize,
    p_s: usize,
    seed: u64,
    diag_load: f64,
    n_sparse: usize,
    base_magnitude: f64,
    decay: f64,
    n_deleted: usize,
    block_toeplitz: bool,
    psd_floor: f64,
) -> PyResult<(Rows, Rows)> {
    let spec = CorruptionSpec {
        n_deleted_pairs: n_deleted,
        diag_load,
        n_sparse,
        base_magnitude,
        decay,
        block_toeplitz,
        psd_floor,
        seed,
    };
    let (c, g) = synth::corrupt(&covariance(sigma, p_t, p_s)?, &spec).map_err(py_err)?;
    Ok((to_rows(c.matrix()), to_rows(g.matrix())))
}

/// `n` zero-mean Gaussian rows with covariance `sigma`.
#[pyfunction]
fn sample_gaussian(sigma: Vec<Vec<f64>>, p_t: usize, p_s: usize, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let set = synth::sample_gaussian(&covariance(sigma, p_t, p_s)?, n, seed).map_err(py_err)?;
    Ok(to_rows(set.data()))
}

#[pyfunction]
fn sample_covariance(samples: Vec<Vec<f64>>, p_t: usize, p_s: usize) -> PyResult<Vec<Vec<f64>>> {
    let set = SampleSet::new(Dims::new(p_t, p_s).map_err(py_err)?, to_matrix(samples)?, 0).map_err(py_err)?;
    Ok(to_rows(synth::sample_covariance(&set).matrix()))
}

#[pyfunction]
fn mse(est: Vec<Vec<f64>>, truth: Vec<Vec<f64>>, p_t: usize, p_s: usize) -> PyResult<f64> {
    eval::mse(&covariance(est, p_t, p_s)?, &covariance(truth, p_t, p_s)?).map_err(py_err)
}

#[pyfunction]
fn prediction_loss(est: Vec<Vec<f64>>, truth: Vec<Vec<f64>>, p_t: usize, p_s: usize, horizon: usize) -> PyResult<f64> {
    eval::prediction_mse_loss(&covariance(est, p_t, p_s)?, &covariance(truth, p_t, p_s)?, horizon).map_err(py_err)
}

/// Runs a benchmark described by a JSON `BenchmarkConfig`; returns the rows as JSON.
#[pyfunction]
fn run_benchmark(py: Python<'_>, truth: Vec<Vec<f64>>, p_t: usize, p_s: usize, config_json: &str) -> PyResult<String> {
    let truth = covariance(truth, p_t, p_s)?;
    let config: BenchmarkConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rows = py.detach(|| eval::run_benchmark(&truth, &config)).map_err(py_err)?;
    serde_json::to_string(&rows).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// JSON of the desk-scale benchmark preset.
#[pyfunction]
#[pyo3(signature = (reps=20, base_seed=0, toeplitz=false))]
fn desk_benchmark_config(reps: usize, base_seed: u64, toeplitz: bool) -> PyResult<String> {
    let c = if toeplitz {
        BenchmarkConfig::desk_toeplitz(reps, base_seed)
    } else {
        BenchmarkConfig::desk_ordering(reps, base_seed)
    };
    serde_json::to_string(&c).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pykronshrink(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(rearrange, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_rearrange, m)?)?;
    m.add_function(wrap_pyfunction!(kron, m)?)?;
    m.add_function(wrap_pyfunction!(svt, m)?)?;
    m.add_function(wrap_pyfunction!(soft, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(kron_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(theory_lambdas, m)?)?;
    m.add_function(wrap_pyfunction!(plug_in, m)?)?;
    m.add_function(wrap_pyfunction!(kron_sum_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(corrupt, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(sample_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_loss, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(desk_benchmark_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
