//! Python bindings: instances, the three solvers, oracles and generators.

use metricfit::cli::{parse_anchors, parse_grid, parse_norm_loop};
use metricfit::emv::{EmvParams, GridChoice};
use metricfit::grid::Grid;
use metricfit::instance::{self, Provenance};
use metricfit::lra::LraParams;
use metricfit::oracle::MAX_STATES;
use metricfit::rounding::SeedStrategy;
use metricfit::wemv::WemvParams;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: metricfit::Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn provenance_dict<'py>(py: Python<'py>, prov: &Provenance) -> PyResult<Bound<'py, PyDict>> {
    let text = serde_json::to_string(prov).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))?.cast_into::<PyDict>().map_err(Into::into)
}

/// Either a grid spec string or an explicit list of values.
#[derive(FromPyObject)]
enum GridArg {
    Values(Vec<f64>),
    Spec(String),
}

impl GridArg {
    fn choice(self) -> PyResult<GridChoice> {
        match self {
            GridArg::Values(v) => Ok(GridChoice::Custom(v)),
            GridArg::Spec(s) => parse_grid(&s).map_err(PyValueError::new_err),
        }
    }

    fn grid(self) -> PyResult<Grid> {
        match self.choice()? {
            GridChoice::Custom(v) => Grid::custom(v).map_err(to_py),
            GridChoice::Uniform {
                step,
                half_width: Some(h),
            } => metricfit::grid::build_uniform_grid(-h, h, step).map_err(to_py),
            _ => Err(PyValueError::new_err("oracles need explicit values or uniform:STEP:HALF_WIDTH")),
        }
    }
}

fn strategy(name: &str, size: usize) -> PyResult<SeedStrategy> {
    match name {
        "sampled" => Ok(SeedStrategy::sampled(size)),
        "exhaustive" => Ok(SeedStrategy::Exhaustive(size)),
        "greedy" => Ok(SeedStrategy::GreedyPotential { size, c: 2.0 }),
        other => Err(PyValueError::new_err(format!("unknown strategy {other:?}"))),
    }
}

/// Dissimilarity matrix normalized so the smallest nonzero entry is 1.
#[pyclass(name = "EmvInstance", frozen)]
struct PyEmvInstance {
    inner: instance::EmvInstance,
}

#[pymethods]
impl PyEmvInstance {
    #[new]
    #[pyo3(signature = (d, k = 1))]
    fn new(d: Vec<Vec<f64>>, k: usize) -> PyResult<Self> {
        Ok(PyEmvInstance {
            inner: instance::load_emv(&d, k).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn mean_sq(&self) -> f64 {
        self.inner.mean_sq()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        self.inner.matrix()
    }

    /// Objective of normalized-scale points.
    fn objective(&self, points: Vec<Vec<f64>>) -> PyResult<f64> {
        instance::emv_objective(&self.inner, &points).map_err(to_py)
    }
}

#[pyclass(name = "LraInstance", frozen)]
struct PyLraInstance {
    inner: instance::LraInstance,
}

#[pymethods]
impl PyLraInstance {
    #[new]
    #[pyo3(signature = (a, p = 2))]
    fn new(a: Vec<Vec<f64>>, p: u32) -> PyResult<Self> {
        Ok(PyLraInstance {
            inner: instance::load_lra(&a, p).map_err(to_py)?,
        })
    }

    #[getter]
    fn norm_p(&self) -> f64 {
        self.inner.norm_p()
    }

    fn objective(&self, u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
        instance::lra_objective(&self.inner, &u, &v).map_err(to_py)
    }
}

#[pyclass(name = "Embedding", frozen, get_all)]
struct PyEmbedding {
    points: Vec<Vec<f64>>,
    objective: f64,
    lp_value: Option<f64>,
    provenance: Py<PyDict>,
}

#[pymethods]
impl PyEmbedding {
    fn __repr__(&self) -> String {
        format!("Embedding(objective={}, n={})", self.objective, self.points.len())
    }
}

fn embedding(py: Python<'_>, e: instance::Embedding, lp_value: Option<f64>) -> PyResult<PyEmbedding> {
    Ok(PyEmbedding {
        provenance: provenance_dict(py, &e.provenance)?.unbind(),
        points: e.points,
        objective: e.objective,
        lp_value,
    })
}

#[pyclass(name = "RankOne", frozen, get_all)]
struct PyRankOne {
    u: Vec<f64>,
    v: Vec<f64>,
    objective: f64,
    provenance: Py<PyDict>,
}

#[pymethods]
impl PyRankOne {
    fn __repr__(&self) -> String {
        format!("RankOne(objective={})", self.objective)
    }
}

fn rank_one(py: Python<'_>, r: instance::RankOne) -> PyResult<PyRankOne> {
    Ok(PyRankOne {
        provenance: provenance_dict(py, &r.provenance)?.unbind(),
        u: r.u,
        v: r.v,
        objective: r.objective,
    })
}

/// Rounded Sherali-Adams solution on the normalized scale.
#[pyfunction]
#[pyo3(signature = (inst, eps = 0.25, degree = 3, seed_size = 1, strategy = "sampled", anchors = "sample:4", repeats = 25, rng_seed = 0, grid = None))]
#[allow(clippy::too_many_arguments)]
fn solve_emv(
    py: Python<'_>,
    inst: &PyEmvInstance,
    eps: f64,
    degree: usize,
    seed_size: usize,
    strategy: &str,
    anchors: &str,
    repeats: usize,
    rng_seed: u64,
    grid: Option<GridArg>,
) -> PyResult<PyEmbedding> {
    let params = EmvParams {
        eps,
        degree,
        seed: self::strategy(strategy, seed_size)?,
        anchors: parse_anchors(anchors).map_err(PyValueError::new_err)?,
        repeats,
        rng_seed,
        grid: grid.map(GridArg::choice).transpose()?.unwrap_or(GridChoice::Geometric),
        ..EmvParams::default()
    };
    let res = py.detach(|| metricfit::emv::solve_emv(&inst.inner, &params)).map_err(to_py)?;
    let lp = res.lp_value();
    embedding(py, res.embedding, Some(lp))
}

#[pyfunction]
#[pyo3(signature = (d, w, k = 1, eps = 0.25, degree = 3, seed_size = 2, repeats = 25, rng_seed = 0, grid = None, psd_cuts = false))]
#[allow(clippy::too_many_arguments)]
fn solve_wemv(
    py: Python<'_>,
    d: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    k: usize,
    eps: f64,
    degree: usize,
    seed_size: usize,
    repeats: usize,
    rng_seed: u64,
    grid: Option<GridArg>,
    psd_cuts: bool,
) -> PyResult<PyEmbedding> {
    let inst = instance::load_wemv(&d, &w, k).map_err(to_py)?;
    let params = WemvParams {
        eps,
        degree,
        seed: SeedStrategy::sampled(seed_size),
        repeats,
        rng_seed,
        grid: grid.map(GridArg::choice).transpose()?,
        psd_cuts,
        ..WemvParams::default()
    };
    let res = py.detach(|| metricfit::wemv::solve_wemv(&inst, &params)).map_err(to_py)?;
    let lp = res.lp_value;
    embedding(py, res.embedding, Some(lp))
}

#[pyfunction]
#[pyo3(signature = (inst, eps = 0.5, degree = None, seed_size = 1, repeats = 25, norm_loop = "diagonal:17", rng_seed = 0, grid = None))]
#[allow(clippy::too_many_arguments)]
fn solve_lra(
    py: Python<'_>,
    inst: &PyLraInstance,
    eps: f64,
    degree: Option<usize>,
    seed_size: usize,
    repeats: usize,
    norm_loop: &str,
    rng_seed: u64,
    grid: Option<GridArg>,
) -> PyResult<PyRankOne> {
    let params = LraParams {
        eps,
        degree,
        seed: SeedStrategy::sampled(seed_size),
        repeats,
        norm_loop: parse_norm_loop(norm_loop).map_err(PyValueError::new_err)?,
        rng_seed,
        grid: grid.map(GridArg::choice).transpose()?,
        ..LraParams::default()
    };
    let res = py.detach(|| metricfit::lra::solve_lra(&inst.inner, &params)).map_err(to_py)?;
    rank_one(py, res.rank_one)
}

#[pyfunction]
#[pyo3(signature = (inst, grid, max_states = MAX_STATES))]
fn brute_force_emv(py: Python<'_>, inst: &PyEmvInstance, grid: GridArg, max_states: f64) -> PyResult<PyEmbedding> {
    let grid = grid.grid()?;
    let (e, _) = py
        .detach(|| metricfit::oracle::brute_force_emv(&inst.inner, &grid, max_states))
        .map_err(to_py)?;
    embedding(py, e, None)
}

#[pyfunction]
#[pyo3(signature = (inst, grid, max_states = MAX_STATES))]
fn brute_force_lra(py: Python<'_>, inst: &PyLraInstance, grid: GridArg, max_states: f64) -> PyResult<PyRankOne> {
    let grid = grid.grid()?;
    let (r, _) = py
        .detach(|| metricfit::oracle::brute_force_lra(&inst.inner, &grid, max_states))
        .map_err(to_py)?;
    rank_one(py, r)
}

#[pyfunction]
#[pyo3(signature = (inst, restarts = 10, rng_seed = 0))]
fn local_search_emv(py: Python<'_>, inst: &PyEmvInstance, restarts: usize, rng_seed: u64) -> PyResult<PyEmbedding> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let ls = metricfit::oracle::local_search_emv(&inst.inner, restarts, &mut rng).map_err(to_py)?;
    embedding(py, ls.embedding, None)
}

/// Planted instance and its points on the normalized scale.
#[pyfunction]
#[pyo3(signature = (n, k = 1, noise = 0.0, rng_seed = 0))]
fn gen_planted(n: usize, k: usize, noise: f64, rng_seed: u64) -> PyResult<(PyEmvInstance, Vec<Vec<f64>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let p = instance::gen_planted(n, k, noise, &mut rng).map_err(to_py)?;
    Ok((PyEmvInstance { inner: p.instance }, p.points))
}

#[pyfunction]
fn build_emv_grid(eps: f64, k: usize, delta: f64, mean_sq: f64) -> PyResult<Vec<f64>> {
    Ok(metricfit::grid::build_emv_grid(eps, k, delta, mean_sq).map_err(to_py)?.values().to_vec())
}

/// `(δ, ρ_G(kparts))` of a regular weight matrix.
#[pyfunction]
fn graph_diag(w: Vec<Vec<f64>>, kparts: usize) -> PyResult<(f64, f64)> {
    let delta = metricfit::wemv::check_regularity(&w).map_err(to_py)?;
    let rho = metricfit::wemv::multiway_conductance_bruteforce(&w, kparts).map_err(to_py)?;
    Ok((delta, rho))
}

#[pymodule]
#[pyo3(name = "metricfit")]
fn metricfit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEmvInstance>()?;
    m.add_class::<PyLraInstance>()?;
    m.add_class::<PyEmbedding>()?;
    m.add_class::<PyRankOne>()?;
    m.add_function(wrap_pyfunction!(solve_emv, m)?)?;
    m.add_function(wrap_pyfunction!(solve_wemv, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lra, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_emv, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_lra, m)?)?;
    m.add_function(wrap_pyfunction!(local_search_emv, m)?)?;
    m.add_function(wrap_pyfunction!(gen_planted, m)?)?;
    m.add_function(wrap_pyfunction!(build_emv_grid, m)?)?;
    m.add_function(wrap_pyfunction!(graph_diag, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
