//! Python bindings: meshes, boundary bases, ND maps, phantoms, the Loewner
//! test and the full reconstruction.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use layerpeel::config::RunConfig;
use layerpeel::driver;
use layerpeel::forward::ExtremeCoefficient;
use layerpeel::geometry::{build_disk_mesh, Mesh, Region};
use layerpeel::ndmap::{self, BoundaryBasis, NdMatrix};
use layerpeel::oracle::{run_oracle, OracleCase};
use layerpeel::order::{loewner_geq as geq, min_eig_difference, symmetric_eigenvalues};
use layerpeel::phantom::{self, PclcCoefficient, PhantomSpec};
use layerpeel::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    inner: Mesh,
}

#[pymethods]
impl PyMesh {
    /// Triangulated disk with the whole circle as measurement boundary.
    #[staticmethod]
    #[pyo3(signature = (radius=1.0, h=0.05))]
    fn disk(radius: f64, h: f64) -> PyResult<Self> {
        Ok(Self { inner: build_disk_mesh(radius, h).map_err(py_err)? })
    }

    /// Copy measured only on edges with polar angle in `[start, end)`.
    fn with_gamma_arc(&self, start: f64, end: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_gamma_arc(start, end).map_err(py_err)? })
    }

    fn refine(&self) -> PyResult<Self> {
        Ok(Self { inner: self.inner.refine().map_err(py_err)? })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    fn centroids(&self) -> Vec<(f64, f64)> {
        self.inner.centroids().iter().map(|p| (p[0], p[1])).collect()
    }
}

#[pyclass(name = "Basis", frozen)]
struct PyBasis {
    inner: BoundaryBasis,
}

#[pymethods]
impl PyBasis {
    #[new]
    fn new(mesh: &PyMesh, m: usize) -> PyResult<Self> {
        Ok(Self { inner: BoundaryBasis::new(&mesh.inner, m).map_err(py_err)? })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }
}

#[pyclass(name = "NdMap", frozen)]
struct PyNdMap {
    inner: NdMatrix,
}

#[pymethods]
impl PyNdMap {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: NdMatrix::from_text(text).map_err(py_err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn basis_id(&self) -> String {
        self.inner.basis_id.clone()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn entries(&self) -> Vec<Vec<f64>> {
        let a = &self.inner.entries;
        (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
    }

    /// Eigenvalues in ascending order.
    fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.inner.entries)
    }
}

#[pyclass(name = "Phantom", frozen)]
struct PyPhantom {
    inner: PclcCoefficient,
}

#[pymethods]
impl PyPhantom {
    /// Rasterizes a JSON phantom spec on `mesh`.
    #[staticmethod]
    fn from_json(text: &str, mesh: &PyMesh) -> PyResult<Self> {
        let spec = PhantomSpec::from_json(text).map_err(py_err)?;
        Ok(Self { inner: spec.rasterize(&mesh.inner).map_err(py_err)? })
    }

    #[getter]
    fn c0(&self) -> f64 {
        self.inner.c0()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn n_layers(&self) -> usize {
        self.inner.n_layers()
    }

    /// `(cells, offsets)` per layer.
    fn layers(&self) -> Vec<(Vec<usize>, Vec<f64>)> {
        self.inner.layers().iter().map(|l| (l.region.cells().to_vec(), l.offsets.clone())).collect()
    }

    /// Cell values of the truncation to `k` layers, all layers by default.
    #[pyo3(signature = (mesh, k=None))]
    fn evaluate(&self, mesh: &PyMesh, k: Option<usize>) -> Vec<f64> {
        self.inner.evaluate(&mesh.inner, k)
    }
}

/// Discrete ND map of a cellwise conductivity.
#[pyfunction]
fn assemble_nd(mesh: &PyMesh, basis: &PyBasis, conductivity: Vec<f64>) -> PyResult<PyNdMap> {
    let sigma = ExtremeCoefficient::regular(conductivity);
    Ok(PyNdMap { inner: ndmap::assemble_nd(&sigma, &basis.inner, &mesh.inner).map_err(py_err)? })
}

/// Data for `phantom` (defined on `mesh`) computed on the finer `sim_mesh`.
#[pyfunction]
#[pyo3(signature = (phantom, sim_mesh, mesh, basis, noise_eps=0.0, seed=0))]
fn simulate(
    phantom: &PyPhantom,
    sim_mesh: &PyMesh,
    mesh: &PyMesh,
    basis: &PyBasis,
    noise_eps: f64,
    seed: u64,
) -> PyResult<PyNdMap> {
    let data = phantom::simulate_data(&phantom.inner, &sim_mesh.inner, &mesh.inner, &basis.inner, noise_eps, seed);
    Ok(PyNdMap { inner: data.map_err(py_err)? })
}

/// `λ_min(a − b) ≥ −delta`.
#[pyfunction]
fn loewner_geq(a: &PyNdMap, b: &PyNdMap, delta: f64) -> PyResult<bool> {
    geq(&a.inner, &b.inner, delta).map_err(py_err)
}

#[pyfunction]
fn min_eig_diff(a: &PyNdMap, b: &PyNdMap) -> PyResult<f64> {
    min_eig_difference(&a.inner, &b.inner).map_err(py_err)
}

#[pyfunction]
fn jaccard(a: Vec<usize>, b: Vec<usize>) -> f64 {
    let mut a = a;
    let mut b = b;
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    Region::new(a).jaccard(&Region::new(b))
}

/// Layer-peeling reconstruction. `config` is an optional JSON run config
/// whose reconstruction settings are used.
#[pyfunction]
#[pyo3(signature = (data, mesh, basis, c0, tau, config=None))]
fn reconstruct<'py>(
    py: Python<'py>,
    data: &PyNdMap,
    mesh: &PyMesh,
    basis: &PyBasis,
    c0: f64,
    tau: f64,
    config: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let params = RunConfig::load(config, &[]).map_err(py_err)?.recon_params();
    let r = py
        .detach(|| driver::reconstruct(&data.inner, &mesh.inner, &basis.inner, c0, tau, &params))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("termination", r.termination.as_str())?;
    out.set_item("delta", r.delta)?;
    out.set_item("note", r.note)?;
    let layers: Vec<(Vec<usize>, Vec<f64>)> =
        r.layer_history.iter().map(|l| (l.region.cells().to_vec(), l.values.clone())).collect();
    out.set_item("layers", layers)?;
    Ok(out)
}

/// Largest relative error of the discrete disk spectrum against the
/// closed form, with the per-mode rows.
#[pyfunction]
#[pyo3(signature = (h, m=16, n_max=8, inner=None, inner_radius=0.5, conductivity=1.0))]
fn oracle<'py>(
    py: Python<'py>,
    h: f64,
    m: usize,
    n_max: usize,
    inner: Option<f64>,
    inner_radius: f64,
    conductivity: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let case = match inner {
        None => OracleCase::Homogeneous { conductivity },
        Some(inner) => OracleCase::Concentric { outer: conductivity, inner, inner_radius },
    };
    let report = run_oracle(&case, 1.0, h, m, n_max).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("max_rel_error", report.max_rel_error)?;
    let rows: Vec<(usize, f64, f64, f64, f64)> =
        report.rows.iter().map(|r| (r.mode, r.computed[0], r.computed[1], r.analytic, r.rel_error)).collect();
    out.set_item("rows", rows)?;
    Ok(out)
}

#[pymodule]
fn pylayerpeel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyNdMap>()?;
    m.add_class::<PyPhantom>()?;
    m.add_function(wrap_pyfunction!(assemble_nd, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(loewner_geq, m)?)?;
    m.add_function(wrap_pyfunction!(min_eig_diff, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    Ok(())
}
