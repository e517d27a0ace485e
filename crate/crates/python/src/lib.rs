//! Python bindings for `hyperbreg`.

use std::path::PathBuf;

use hyperbreg::experiment::{self, CaseSpec, ExperimentConfig, InlineCase, ResolvedCase, RunError};
use hyperbreg::expr::CompiledExpr;
use hyperbreg::galerkin::{self, Solution as CoreSolution};
use hyperbreg::regularity::{self, EnergyReport as CoreEnergyReport};
use hyperbreg::time::{TimeGrid, Trajectory};
use hyperbreg::waveq1d::{self, Mesh1D, TaylorRow as CoreTaylorRow};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

/// `(m, N, err, observed_order)`.
type ConvergenceRow = (usize, usize, f64, Option<f64>);

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_err(e: hyperbreg::Error) -> PyErr {
    match experiment::classify(e) {
        RunError::Solver(msg) => PyRuntimeError::new_err(msg),
        RunError::Invalid(msg) => PyValueError::new_err(msg),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn values(tr: &Trajectory) -> Vec<Vec<f64>> {
    tr.values().iter().map(vec).collect()
}

/// Uniform P1 mesh on (0, 1) with `n_interior` unknowns.
#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    inner: Mesh1D,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(n_interior: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Mesh1D::new(n_interior).map_err(core_err)?,
        })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn n_interior(&self) -> usize {
        self.inner.n_interior()
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes()
    }

    fn mass(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.mass())
    }

    fn stiffness(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.stiffness())
    }

    fn __repr__(&self) -> String {
        format!("Mesh(n_interior={})", self.inner.n_interior())
    }
}

/// Wave problem data: a manufactured case or an inline one.
#[pyclass(name = "Case", frozen)]
struct PyCase {
    inner: ResolvedCase,
    label: String,
}

#[pymethods]
impl PyCase {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        let inner = experiment::resolve_case(&CaseSpec::Named(name.to_string()), 1.0).map_err(value_err)?;
        Ok(Self {
            inner,
            label: name.to_string(),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (coefficient, lower_bound, initial_u, source="0", initial_v="0", exact=None, horizon=1.0))]
    fn inline(
        coefficient: &str,
        lower_bound: f64,
        initial_u: &str,
        source: &str,
        initial_v: &str,
        exact: Option<&str>,
        horizon: f64,
    ) -> PyResult<Self> {
        let case_spec = CaseSpec::Inline(InlineCase {
            coefficient: coefficient.into(),
            lower_bound,
            source: source.into(),
            initial_u: initial_u.into(),
            initial_v: initial_v.into(),
            exact: exact.map(str::to_string),
        });
        let inner = experiment::resolve_case(&case_spec, horizon).map_err(value_err)?;
        Ok(Self {
            inner,
            label: format!("inline a={coefficient}"),
        })
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        waveq1d::MANUFACTURED_CASES.to_vec()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.data.horizon
    }

    #[getter]
    fn has_exact(&self) -> bool {
        self.inner.exact.is_some()
    }

    /// `∂ᵗʲ u(t, x)` of the exact solution.
    #[pyo3(signature = (t, x, j=0))]
    fn exact(&self, t: f64, x: f64, j: usize) -> PyResult<f64> {
        match &self.inner.exact {
            Some(u) => Ok(u.eval(t, j, x)),
            None => Err(PyValueError::new_err("case has no exact solution")),
        }
    }

    fn __repr__(&self) -> String {
        format!("Case({:?})", self.label)
    }
}

impl PyCase {
    fn problem(&self, mesh: &PyMesh) -> PyResult<hyperbreg::ProblemData> {
        waveq1d::assemble_wave_problem(&mesh.inner, &self.inner.data).map_err(core_err)
    }

    fn grid(&self, steps: usize) -> PyResult<TimeGrid> {
        TimeGrid::new(self.inner.data.horizon, steps).map_err(core_err)
    }
}

/// Nodal trajectory of `u` and `u′`.
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    #[pyo3(get)]
    times: Vec<f64>,
    #[pyo3(get)]
    u: Vec<Vec<f64>>,
    #[pyo3(get)]
    du: Vec<Vec<f64>>,
}

impl From<&CoreSolution> for PySolution {
    fn from(s: &CoreSolution) -> Self {
        Self {
            times: s.u.grid().nodes().collect(),
            u: values(&s.u),
            du: values(&s.du),
        }
    }
}

#[pymethods]
impl PySolution {
    #[getter]
    fn final_u(&self) -> Vec<f64> {
        self.u.last().cloned().unwrap_or_default()
    }

    fn __len__(&self) -> usize {
        self.times.len()
    }
}

#[pyclass(name = "EnergyReport", frozen)]
struct PyEnergyReport {
    #[pyo3(get)]
    level: usize,
    #[pyo3(get)]
    sup_v_energy: f64,
    #[pyo3(get)]
    sup_h_energy_deriv: f64,
    #[pyo3(get)]
    data_norm: f64,
    #[pyo3(get)]
    lambda_observed: f64,
}

impl From<&CoreEnergyReport> for PyEnergyReport {
    fn from(r: &CoreEnergyReport) -> Self {
        Self {
            level: r.level,
            sup_v_energy: r.sup_v_energy,
            sup_h_energy_deriv: r.sup_h_energy_deriv,
            data_norm: r.data_norm,
            lambda_observed: r.lambda_observed,
        }
    }
}

#[pymethods]
impl PyEnergyReport {
    fn __repr__(&self) -> String {
        format!("EnergyReport(level={}, lambda_observed={:.6e})", self.level, self.lambda_observed)
    }
}

#[pyclass(name = "TaylorRow", frozen)]
struct PyTaylorRow {
    #[pyo3(get)]
    eps: f64,
    #[pyo3(get)]
    remainder: f64,
    #[pyo3(get)]
    first_order_remainder: f64,
    #[pyo3(get)]
    slope: Option<f64>,
    #[pyo3(get)]
    first_order_slope: Option<f64>,
}

impl From<&CoreTaylorRow> for PyTaylorRow {
    fn from(r: &CoreTaylorRow) -> Self {
        Self {
            eps: r.eps,
            remainder: r.remainder,
            first_order_remainder: r.first_order_remainder,
            slope: r.slope,
            first_order_slope: r.first_order_slope,
        }
    }
}

#[pymethods]
impl PyTaylorRow {
    fn __repr__(&self) -> String {
        format!("TaylorRow(eps={:e}, remainder={:.6e}, slope={:?})", self.eps, self.remainder, self.slope)
    }
}

/// Forward Galerkin solve of `case` on `mesh` with `steps` time steps.
#[pyfunction]
#[pyo3(signature = (case, mesh, steps, lin_tol=1e-10))]
fn solve(py: Python<'_>, case: &PyCase, mesh: &PyMesh, steps: usize, lin_tol: f64) -> PyResult<PySolution> {
    let p = case.problem(mesh)?;
    let grid = case.grid(steps)?;
    let sol = py.detach(|| galerkin::solve_forward(&p, grid, lin_tol)).map_err(core_err)?;
    Ok(PySolution::from(&sol))
}

/// Compatible initial values `u_0 … u_{k+1}` in nodal coordinates.
#[pyfunction]
fn compatible_initial_values(case: &PyCase, mesh: &PyMesh, k: usize) -> PyResult<Vec<Vec<f64>>> {
    let p = case.problem(mesh)?;
    let ivs = regularity::compatible_initial_values(&p, k).map_err(core_err)?;
    Ok(ivs.values.iter().map(vec).collect())
}

/// Solutions for `u⁽ᵏ⁾, …, u` (highest level first) and their energy reports.
#[pyfunction]
#[pyo3(signature = (case, mesh, steps, k, lin_tol=1e-10))]
fn solve_derivative(
    py: Python<'_>,
    case: &PyCase,
    mesh: &PyMesh,
    steps: usize,
    k: usize,
    lin_tol: f64,
) -> PyResult<(Vec<PySolution>, Vec<PyEnergyReport>)> {
    let p = case.problem(mesh)?;
    let grid = case.grid(steps)?;
    let out = py
        .detach(|| regularity::solve_derivative(&p, k, grid, lin_tol))
        .map_err(core_err)?;
    Ok((
        out.levels.iter().map(PySolution::from).collect(),
        out.reports.iter().map(PyEnergyReport::from).collect(),
    ))
}

/// `(m, N, err_LinfH, observed_order)` per ladder rung, for level `k` against `∂ᵗᵏu`.
#[pyfunction]
#[pyo3(signature = (case, mesh_sizes, step_counts, k=0, lin_tol=1e-10))]
fn convergence(
    py: Python<'_>,
    case: &PyCase,
    mesh_sizes: Vec<usize>,
    step_counts: Vec<usize>,
    k: usize,
    lin_tol: f64,
) -> PyResult<Vec<ConvergenceRow>> {
    let exact = case
        .inner
        .exact
        .as_ref()
        .ok_or_else(|| PyValueError::new_err("case has no exact solution"))?;
    if mesh_sizes.len() != step_counts.len() || mesh_sizes.is_empty() {
        return Err(PyValueError::new_err("mesh_sizes and step_counts must be non-empty and of equal length"));
    }
    let mut out: Vec<ConvergenceRow> = Vec::new();
    let mut prev_h = 0.0;
    for (&m, &n) in mesh_sizes.iter().zip(&step_counts) {
        let mesh = Mesh1D::new(m).map_err(core_err)?;
        let p = waveq1d::assemble_wave_problem(&mesh, &case.inner.data).map_err(core_err)?;
        let grid = case.grid(n)?;
        let err = py
            .detach(|| -> hyperbreg::Result<f64> {
                let sol = regularity::solve_derivative(&p, k, grid, lin_tol)?;
                waveq1d::linf_h_error(&mesh, &sol.level(k).u, exact, k)
            })
            .map_err(core_err)?;
        let order = out
            .last()
            .map(|&(_, _, e_prev, _)| waveq1d::observed_order(e_prev, err, prev_h, mesh.h()));
        out.push((m, n, err, order));
        prev_h = mesh.h();
    }
    Ok(out)
}

/// Taylor remainder test of the coefficient-to-solution map along `perturbation`.
#[pyfunction]
#[pyo3(signature = (case, mesh, steps, perturbation="sin(pi*x)*(1+t)", eps=vec![1e-1, 3e-2, 1e-2], lin_tol=1e-10))]
fn taylor_test(
    py: Python<'_>,
    case: &PyCase,
    mesh: &PyMesh,
    steps: usize,
    perturbation: &str,
    eps: Vec<f64>,
    lin_tol: f64,
) -> PyResult<Vec<PyTaylorRow>> {
    let h = CompiledExpr::new(perturbation).map_err(value_err)?.into_field();
    let grid = case.grid(steps)?;
    let rows = py
        .detach(|| waveq1d::taylor_test(&mesh.inner, &case.inner.data, &h, grid, &eps, lin_tol))
        .map_err(core_err)?;
    Ok(rows.iter().map(PyTaylorRow::from).collect())
}

/// Runs a TOML experiment config and returns the path of the written report.
#[pyfunction]
#[pyo3(signature = (config, out_dir, k=None, lin_tol=None))]
fn run_experiment(
    py: Python<'_>,
    config: PathBuf,
    out_dir: PathBuf,
    k: Option<usize>,
    lin_tol: Option<f64>,
) -> PyResult<PathBuf> {
    let run_err = |e: RunError| match e {
        RunError::Solver(msg) => PyRuntimeError::new_err(msg),
        RunError::Invalid(msg) => PyValueError::new_err(msg),
    };
    let mut cfg = ExperimentConfig::load(&config).map_err(run_err)?;
    if let Some(k) = k {
        cfg.k = k;
    }
    if let Some(tol) = lin_tol {
        cfg.lin_tol = tol;
    }
    py.detach(|| experiment::run(&cfg, &out_dir)).map_err(run_err)
}

#[pymodule(name = "hyperbreg")]
fn hyperbreg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyCase>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyEnergyReport>()?;
    m.add_class::<PyTaylorRow>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(compatible_initial_values, m)?)?;
    m.add_function(wrap_pyfunction!(solve_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
