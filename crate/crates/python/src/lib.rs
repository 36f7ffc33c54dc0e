//! Python bindings. Specs (kernels, coefficients, configs) cross the boundary
//! as plain dicts with the same keys as the TOML config.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use nlspec::cli_io::{self, RunOptions};
use nlspec::experiments::{sigma_sweep, ResolutionRule, SweepSetup};
use nlspec::{BoxDomain, Coefficient, CoefficientSpec, Error, KernelSpec, SolverOptions, Variant};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::NoConvergence(..) | Error::InvariantViolation(_) | Error::Io { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Python object -> Rust value through `json.dumps`.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    let json = obj.py().import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("invalid {what}: {e}")))
}

/// Rust value -> Python object through `json.loads`.
fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn variant(name: &str) -> PyResult<Variant> {
    match name {
        "M_plus_a" => Ok(Variant::MPlusA),
        "L_plus_a" => Ok(Variant::LPlusA),
        other => Err(PyValueError::new_err(format!(
            "variant must be 'M_plus_a' or 'L_plus_a', got '{other}'"
        ))),
    }
}

fn options(tol: f64, max_iter: Option<usize>) -> SolverOptions {
    SolverOptions {
        tol,
        max_iter,
        record_trace: false,
    }
}

/// Uniform midpoint grid on a box.
#[pyclass(module = "nlspec_py", frozen)]
struct Grid {
    inner: nlspec::Grid,
}

#[pymethods]
impl Grid {
    #[new]
    fn new(lower: Vec<f64>, upper: Vec<f64>, nodes: Vec<usize>) -> PyResult<Self> {
        let inner = nlspec::Grid::build(BoxDomain::new(lower, upper), &nodes).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn counts(&self) -> Vec<usize> {
        self.inner.counts().to_vec()
    }

    /// Node coordinates, one list per node.
    fn nodes(&self) -> Vec<Vec<f64>> {
        self.inner.nodes().map(<[f64]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(counts={:?}, h={})", self.inner.counts(), self.inner.h())
    }
}

/// Dense discrete operator `A`, with `λ_p = -ρ(A)`.
#[pyclass(module = "nlspec_py", frozen)]
struct Operator {
    inner: nlspec::DiscreteOperator,
}

#[pymethods]
impl Operator {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn variant(&self) -> &'static str {
        match self.inner.variant() {
            Variant::MPlusA => "M_plus_a",
            Variant::LPlusA => "L_plus_a",
        }
    }

    fn is_symmetric(&self) -> bool {
        self.inner.is_symmetric()
    }

    /// Row-major copy of the matrix.
    fn matrix(&self) -> Vec<Vec<f64>> {
        let m = self.inner.matrix();
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn coefficient(&self) -> Vec<f64> {
        self.inner.coefficient_values().to_vec()
    }

    /// `A x`.
    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.inner.dim() {
            return Err(to_py_err(Error::Dimension {
                expected: self.inner.dim(),
                got: x.len(),
            }));
        }
        let m = self.inner.matrix();
        Ok(m.row_iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Operator(dim={}, variant={})", self.inner.dim(), self.variant())
    }
}

#[pyclass(module = "nlspec_py", frozen, get_all)]
struct SpectralResult {
    lambda_p: f64,
    eigvec: Vec<f64>,
    residual: f64,
    cw_lower: f64,
    cw_upper: f64,
    lambda_v: Option<f64>,
    iterations: usize,
    converged: bool,
    existence: String,
    concentration_index: f64,
    components: usize,
}

#[pymethods]
impl SpectralResult {
    fn __repr__(&self) -> String {
        format!(
            "SpectralResult(lambda_p={}, bracket=[{}, {}], existence={}, converged={})",
            self.lambda_p, self.cw_lower, self.cw_upper, self.existence, self.converged
        )
    }
}

/// Assemble `M + a` or `L + a` on `grid`.
#[pyfunction]
#[pyo3(signature = (grid, kernel, coefficient=None, variant="M_plus_a"))]
fn assemble(
    grid: &Grid,
    kernel: &Bound<'_, PyAny>,
    coefficient: Option<&Bound<'_, PyAny>>,
    variant: &str,
) -> PyResult<Operator> {
    let k: KernelSpec = from_py(kernel, "kernel")?;
    let spec: CoefficientSpec = match coefficient {
        Some(c) => from_py(c, "coefficient")?,
        None => CoefficientSpec::constant(0.0),
    };
    let a = Coefficient::on_grid(&spec, &grid.inner).map_err(to_py_err)?;
    let inner = nlspec::assemble(&grid.inner, &k, &a, self::variant(variant)?).map_err(to_py_err)?;
    Ok(Operator { inner })
}

/// Perron route: `λ_p`, eigenvector and Collatz–Wielandt bracket.
#[pyfunction]
#[pyo3(signature = (op, tol=1e-10, max_iter=None))]
fn principal_eig(py: Python<'_>, op: &Operator, tol: f64, max_iter: Option<usize>) -> PyResult<SpectralResult> {
    let res = py
        .detach(|| nlspec::principal_eig(&op.inner, &options(tol, max_iter)))
        .map_err(to_py_err)?;
    Ok(SpectralResult {
        lambda_p: res.lambda_p,
        eigvec: res.eigvec,
        residual: res.residual,
        cw_lower: res.cw_lower,
        cw_upper: res.cw_upper,
        lambda_v: res.lambda_v,
        iterations: res.iterations,
        converged: res.converged,
        existence: res.existence.to_string(),
        concentration_index: res.concentration_index,
        components: res.components,
    })
}

/// Variational route (symmetric operators only).
#[pyfunction]
#[pyo3(signature = (op, tol=1e-10, max_iter=None))]
fn lambda_v_min(py: Python<'_>, op: &Operator, tol: f64, max_iter: Option<usize>) -> PyResult<f64> {
    py.detach(|| nlspec::lambda_v_min(&op.inner, &options(tol, max_iter)))
        .map(|r| r.lambda_v)
        .map_err(to_py_err)
}

#[pyfunction]
fn bounds_iv(op: &Operator) -> (f64, f64) {
    nlspec::bounds_iv(&op.inner)
}

/// `c = D_2 / (2N)` for an even convolution kernel.
#[pyfunction]
#[pyo3(signature = (kernel, dim=1))]
fn diffusivity(kernel: &Bound<'_, PyAny>, dim: usize) -> PyResult<f64> {
    let k: KernelSpec = from_py(kernel, "kernel")?;
    nlspec::diffusivity(&k, dim).map_err(to_py_err)
}

/// Dirichlet `λ_1(cΔ + a)` on the grid's box; returns `(lambda_1, phi_1)`.
#[pyfunction]
#[pyo3(signature = (grid, c, coefficient=None, tol=1e-10))]
fn dirichlet_lambda1(
    py: Python<'_>,
    grid: &Grid,
    c: f64,
    coefficient: Option<&Bound<'_, PyAny>>,
    tol: f64,
) -> PyResult<(f64, Vec<f64>)> {
    let spec: CoefficientSpec = match coefficient {
        Some(c) => from_py(c, "coefficient")?,
        None => CoefficientSpec::constant(0.0),
    };
    let r = py
        .detach(|| nlspec::dirichlet_lambda1(&grid.inner, c, &spec, tol))
        .map_err(to_py_err)?;
    Ok((r.lambda_1, r.phi_1))
}

/// `σ`-sweep on a box with `h = σ r / nodes_per_sigma`; one dict per `σ`.
#[pyfunction]
#[pyo3(signature = (family, m, lower, upper, sigmas, coefficient=None, radius=1.0, nodes_per_sigma=16.0, variant="M_plus_a", tol=1e-10))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    family: &Bound<'py, PyAny>,
    m: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    sigmas: Vec<f64>,
    coefficient: Option<&Bound<'py, PyAny>>,
    radius: f64,
    nodes_per_sigma: f64,
    variant: &str,
    tol: f64,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let setup = SweepSetup {
        family: from_py(family, "kernel family")?,
        radius,
        m,
        domain: BoxDomain::new(lower, upper),
        coefficient: match coefficient {
            Some(c) => from_py(c, "coefficient")?,
            None => CoefficientSpec::constant(0.0),
        },
        variant: self::variant(variant)?,
        resolution: ResolutionRule::PerSigma { nodes_per_sigma },
        solver: options(tol, None),
        with_lambda_v: true,
    };
    let out = py.detach(|| sigma_sweep(&setup, &sigmas));
    out.into_iter()
        .map(|(_, r)| r.map_err(to_py_err).and_then(|rec| to_py(py, &rec)))
        .collect()
}

/// Validate a TOML config; returns its canonical rendering.
#[pyfunction]
fn parse_config(text: &str) -> PyResult<String> {
    cli_io::parse_config(text)
        .map(|c| cli_io::render(&c))
        .map_err(to_py_err)
}

/// Run a TOML config, writing artifacts to `out_dir`; returns the exit code.
#[pyfunction]
#[pyo3(signature = (text, out_dir, strict=false))]
fn run(py: Python<'_>, text: &str, out_dir: std::path::PathBuf, strict: bool) -> PyResult<i32> {
    let cfg = cli_io::parse_config(text).map_err(to_py_err)?;
    let opts = RunOptions {
        out_dir: Some(out_dir),
        strict,
        threads: None,
    };
    py.detach(|| cli_io::run(&cfg, &opts))
        .map(|o| o.exit_code)
        .map_err(to_py_err)
}

#[pymodule]
fn nlspec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Grid>()?;
    m.add_class::<Operator>()?;
    m.add_class::<SpectralResult>()?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(principal_eig, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_v_min, m)?)?;
    m.add_function(wrap_pyfunction!(bounds_iv, m)?)?;
    m.add_function(wrap_pyfunction!(diffusivity, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_lambda1, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
