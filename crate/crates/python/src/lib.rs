//! Python bindings: run experiments and use compressed matrices from Python.

use std::str::FromStr;

use dh2::dh2core::{self, DEFAULT_EXPAND_CAP};
use dh2::experiment::{run_assembly_experiment, run_compression_experiment, ExperimentParams, ExperimentReport};
use dh2::geometry::{build_sphere_mesh, KernelKind};
use dh2::linalg::c64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: dh2::Error) -> PyErr {
    match e {
        dh2::Error::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(format!("{}: {e}", e.kind())),
    }
}

#[allow(clippy::too_many_arguments)]
fn params(
    level: usize,
    kappa: f64,
    eps: f64,
    eta1: f64,
    eta2: f64,
    zeta: f64,
    order: usize,
    leaf_size: usize,
    kernel: &str,
    standard_admissibility: bool,
    seed: u64,
    compute_error: bool,
) -> PyResult<ExperimentParams> {
    Ok(ExperimentParams {
        level,
        kappa,
        eps,
        eta1,
        eta2,
        zeta,
        order,
        leaf_size,
        kernel: KernelKind::from_str(kernel).map_err(to_py)?,
        standard_admissibility,
        seed,
        compute_error,
    })
}

fn report_dict<'py>(py: Python<'py>, r: &ExperimentReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", r.method.as_str())?;
    d.set_item("n", r.n)?;
    d.set_item("kappa", r.kappa)?;
    d.set_item("eps", r.eps)?;
    d.set_item("eta1", r.eta1)?;
    d.set_item("eta2", r.eta2)?;
    d.set_item("zeta", r.zeta)?;
    d.set_item("order", r.order)?;
    d.set_item("leaf_size", r.leaf_size)?;
    d.set_item("kernel", r.kernel.to_string())?;
    d.set_item("standard_admissibility", r.standard_admissibility)?;
    d.set_item("seed", r.seed)?;
    d.set_item("t_row", r.t_row)?;
    d.set_item("t_col", r.t_col)?;
    d.set_item("t_prj", r.t_prj)?;
    d.set_item("t_mvm", r.t_mvm)?;
    d.set_item("k_max", r.k_max)?;
    d.set_item("mem_per_dof_kib", r.mem_per_dof_kib)?;
    d.set_item("rel_error", r.rel_error)?;
    d.set_item("directions", r.directions.clone())?;
    d.set_item("max_row", r.max_row)?;
    d.set_item("max_col", r.max_col)?;
    Ok(d)
}

/// Number of triangles of the sphere mesh at a refinement level.
#[pyfunction]
fn mesh_size(level: usize) -> PyResult<usize> {
    Ok(build_sphere_mesh(level).map_err(to_py)?.len())
}

/// A directional H2-matrix.
#[pyclass(name = "DH2Matrix")]
struct PyDH2Matrix {
    inner: dh2core::DH2Matrix,
    report: Option<ExperimentReport>,
}

#[pymethods]
impl PyDH2Matrix {
    /// Compresses the kernel matrix of the sphere mesh.
    #[staticmethod]
    #[pyo3(signature = (level, kappa, eps=1e-4, eta1=20.0, eta2=5.0, zeta=0.3, leaf_size=16, kernel="slp", standard_admissibility=false, seed=0, compute_error=false))]
    #[allow(clippy::too_many_arguments)]
    fn compress(
        py: Python<'_>,
        level: usize,
        kappa: f64,
        eps: f64,
        eta1: f64,
        eta2: f64,
        zeta: f64,
        leaf_size: usize,
        kernel: &str,
        standard_admissibility: bool,
        seed: u64,
        compute_error: bool,
    ) -> PyResult<Self> {
        let p = params(level, kappa, eps, eta1, eta2, zeta, 4, leaf_size, kernel, standard_admissibility, seed, compute_error)?;
        let (inner, r) = py.detach(|| run_compression_experiment(&p)).map_err(to_py)?;
        Ok(Self { inner, report: Some(r) })
    }

    /// Builds the matrix by directional interpolation of the given order.
    #[staticmethod]
    #[pyo3(signature = (level, kappa, order=4, eta1=20.0, eta2=5.0, leaf_size=16, kernel="slp", compute_error=false))]
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        py: Python<'_>,
        level: usize,
        kappa: f64,
        order: usize,
        eta1: f64,
        eta2: f64,
        leaf_size: usize,
        kernel: &str,
        compute_error: bool,
    ) -> PyResult<Self> {
        let p = params(level, kappa, 1e-4, eta1, eta2, 0.3, order, leaf_size, kernel, false, 0, compute_error)?;
        let (inner, r) = py.detach(|| run_assembly_experiment(&p)).map_err(to_py)?;
        Ok(Self { inner, report: Some(r) })
    }

    /// Loads a DH2v1 container.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: dh2core::load_dh2(path).map_err(to_py)?,
            report: None,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        dh2core::save_dh2(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn max_rank(&self) -> usize {
        self.inner.max_rank()
    }

    #[getter]
    fn mem_per_dof_kib(&self) -> f64 {
        self.inner.storage_report().mem_per_dof_kib
    }

    /// The report of the run that built this matrix, if any.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        self.report.as_ref().map(|r| report_dict(py, r)).transpose()
    }

    fn matvec(&self, x: Vec<c64>) -> PyResult<Vec<c64>> {
        self.inner.matvec(&x).map_err(to_py)
    }

    fn matvec_adjoint(&self, x: Vec<c64>) -> PyResult<Vec<c64>> {
        self.inner.matvec_adjoint(&x).map_err(to_py)
    }

    /// Dense expansion as a list of rows.
    fn to_dense(&self) -> PyResult<Vec<Vec<c64>>> {
        let d = self.inner.expand_dense_capped(DEFAULT_EXPAND_CAP).map_err(to_py)?;
        Ok((0..d.rows()).map(|i| (0..d.cols()).map(|j| d[(i, j)]).collect()).collect())
    }
}

/// Runs the compression (or interpolation) pipeline and returns its report.
#[pyfunction]
#[pyo3(signature = (level, kappa, eps=1e-4, eta1=20.0, eta2=5.0, zeta=0.3, order=4, leaf_size=16, kernel="slp", method="compress", standard_admissibility=false, seed=0, compute_error=true))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    level: usize,
    kappa: f64,
    eps: f64,
    eta1: f64,
    eta2: f64,
    zeta: f64,
    order: usize,
    leaf_size: usize,
    kernel: &str,
    method: &str,
    standard_admissibility: bool,
    seed: u64,
    compute_error: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(level, kappa, eps, eta1, eta2, zeta, order, leaf_size, kernel, standard_admissibility, seed, compute_error)?;
    let r = match method {
        "compress" => py.detach(|| run_compression_experiment(&p)),
        "assemble" => py.detach(|| run_assembly_experiment(&p)),
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    }
    .map_err(to_py)?
    .1;
    report_dict(py, &r)
}

#[pymodule]
fn dh2py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mesh_size, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyDH2Matrix>()?;
    Ok(())
}
