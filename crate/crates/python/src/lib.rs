use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

use momentlmi_core::casestudies;
use momentlmi_core::extract::{self, DEFAULT_RANK_TOL};
use momentlmi_core::moments::MomentVector;
use momentlmi_core::poly::{MonomialBasis, VarSpace};
use momentlmi_core::problem::{read_problem, Problem};
use momentlmi_core::report::{pop_order, solve_problem, SolveConfig};
use momentlmi_core::sdp::SolveOptions;
use momentlmi_core::spectra;
use momentlmi_core::Error;

create_exception!(
    momentlmi,
    SolverError,
    PyRuntimeError,
    "A solve ended without an optimal status."
);

fn py_err(e: Error) -> PyErr {
    match &e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ if e.solver_status().is_some() => SolverError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn core<T, E: Into<Error>>(r: Result<T, E>) -> PyResult<T> {
    r.map_err(|e| py_err(e.into()))
}

fn moments_dict<'py>(py: Python<'py>, y: &MomentVector) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let basis = MonomialBasis::new(y.nvars(), y.degree());
    for (e, v) in basis.exponents().iter().zip(y.values()) {
        d.set_item(PyTuple::new(py, e.powers())?, *v)?;
    }
    Ok(d)
}

/// A problem file: `pop`, `gmp`, `sdp` or `pencil`.
#[pyclass(name = "Problem", module = "momentlmi", frozen)]
struct PyProblem {
    inner: Problem,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyProblem {
            inner: core(Problem::parse(text))?,
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyProblem {
            inner: read_problem(&path).map_err(py_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Report of a solve as a dict: every `key = value` entry as a string,
    /// `bound` as a float when present, `moments` as
    /// `{measure: {exponent tuple: value}}`.
    #[pyo3(signature = (order=None, tol=1e-9, max_iter=200, extract=false, seed=0, min_mass=None))]
    #[allow(clippy::too_many_arguments)]
    fn solve<'py>(
        &self,
        py: Python<'py>,
        order: Option<usize>,
        tol: f64,
        max_iter: usize,
        extract: bool,
        seed: u64,
        min_mass: Option<String>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = SolveConfig {
            order,
            options: SolveOptions {
                gap_tol: tol,
                feas_tol: tol,
                max_iter,
                ..SolveOptions::default()
            },
            extract,
            seed,
            min_mass,
        };
        let (rep, status) = py
            .detach(|| solve_problem(&self.inner, &cfg))
            .map_err(py_err)?;
        let out = PyDict::new(py);
        for (k, v) in &rep.entries {
            out.set_item(k, v)?;
        }
        out.set_item("status", status.name())?;
        if let Some(b) = rep.get("bound").and_then(|b| b.parse::<f64>().ok()) {
            out.set_item("bound", b)?;
        }
        let tables = PyDict::new(py);
        for (name, y) in &rep.tables {
            tables.set_item(name, moments_dict(py, y)?)?;
        }
        out.set_item("moments", tables)?;
        out.set_item("report", rep.to_text())?;
        Ok(out)
    }

    /// Defining polynomials `f_1..f_m` of a pencil, over `x1..xn`.
    fn defining_polynomials(&self) -> PyResult<Vec<String>> {
        let Problem::Pencil(p) = &self.inner else {
            return Err(PyValueError::new_err("defining polynomials need a pencil"));
        };
        let fs = core(spectra::defining_polynomials(p))?;
        let vars = VarSpace::indexed("x", p.nvars());
        Ok(fs.iter().map(|f| f.to_string_with(&vars)).collect())
    }

    /// Membership of `x` in a pencil's spectrahedron or a pop's feasible set.
    #[pyo3(signature = (x, tol=1e-9))]
    fn contains(&self, x: Vec<f64>, tol: f64) -> PyResult<bool> {
        match &self.inner {
            Problem::Pencil(p) => core(spectra::membership(p, &x, tol)),
            Problem::Pop(pop) => {
                if x.len() != pop.set.nvars() {
                    return Err(PyValueError::new_err(format!(
                        "expected {} coordinates",
                        pop.set.nvars()
                    )));
                }
                core(pop.set.contains(&x, tol))
            }
            _ => Err(PyValueError::new_err(
                "membership needs a pencil or a pop problem",
            )),
        }
    }

    /// Support points `(cx, cy, sx, sy, value)` of the order-r shadow of a
    /// pop's feasible set on coordinates `proj` (0-based).
    #[pyo3(signature = (order=None, directions=64, proj=(0, 1)))]
    fn shadow(
        &self,
        py: Python<'_>,
        order: Option<usize>,
        directions: usize,
        proj: (usize, usize),
    ) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
        let Problem::Pop(pop) = &self.inner else {
            return Err(PyValueError::new_err("shadows need a pop problem"));
        };
        let r = core(pop_order(pop, order))?;
        let dirs = spectra::circle_directions(directions);
        let pts = py
            .detach(|| {
                spectra::shadow_support_points(&pop.set, r, &dirs, proj, &SolveOptions::default())
            })
            .map_err(|e| py_err(e.into()))?;
        Ok(pts
            .iter()
            .map(|p| {
                (
                    p.direction[0],
                    p.direction[1],
                    p.point[0],
                    p.point[1],
                    p.value,
                )
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("<momentlmi.Problem kind={}>", self.inner.kind())
    }
}

/// Built-in case study: `eig_assign` (with `n`), `bolza`, `lqr`, `occtraj`,
/// `saturation`, `pillow`, `exponential` (with `n` = m).
#[pyfunction]
#[pyo3(signature = (name, n=None))]
fn case_study(name: &str, n: Option<usize>) -> PyResult<PyProblem> {
    let inner = match (name, n) {
        ("eig_assign", Some(n)) if (2..=casestudies::EIG_ASSIGN_MAX_N).contains(&n) => {
            Problem::Pop(casestudies::build_eig_assign(n))
        }
        ("eig_assign", _) => {
            return Err(PyValueError::new_err(format!(
                "eig_assign needs n in 2..={}",
                casestudies::EIG_ASSIGN_MAX_N
            )))
        }
        ("exponential", Some(m)) if (1..=spectra::MAX_SYMBOLIC_SIDE / 2).contains(&m) => {
            Problem::Pencil(spectra::exponential_spectrahedron(m))
        }
        ("exponential", _) => return Err(PyValueError::new_err("exponential needs n in 1..=4")),
        ("bolza", _) => Problem::Gmp(casestudies::build_bolza()),
        ("lqr", _) => Problem::Gmp(casestudies::build_lqr()),
        ("occtraj", _) => Problem::Gmp(casestudies::build_occtraj()),
        ("saturation", _) => Problem::Gmp(casestudies::build_saturation_cells()),
        ("pillow", _) => Problem::Pencil(spectra::pillow()),
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown case study `{name}`"
            )))
        }
    };
    Ok(PyProblem { inner })
}

/// Exponents of the graded-lex monomials in `nvars` variables up to `degree`.
#[pyfunction]
fn monomials(nvars: usize, degree: usize) -> Vec<Vec<u32>> {
    MonomialBasis::new(nvars, degree)
        .exponents()
        .iter()
        .map(|e| e.powers().to_vec())
        .collect()
}

/// Moments up to `degree` of `sum w delta_x` for `atoms = [(x, w), ...]`,
/// in the order of `monomials`.
#[pyfunction]
fn moments_from_atoms(
    nvars: usize,
    degree: usize,
    atoms: Vec<(Vec<f64>, f64)>,
) -> PyResult<Vec<f64>> {
    if atoms.iter().any(|(x, _)| x.len() != nvars) {
        return Err(PyValueError::new_err(format!(
            "every atom needs {nvars} coordinates"
        )));
    }
    Ok(MomentVector::from_atoms(nvars, degree, &atoms)
        .values()
        .to_vec())
}

/// Atoms `[(x, w), ...]` of a flat moment vector of degree `2 r`.
#[pyfunction]
#[pyo3(signature = (nvars, values, r, tol=DEFAULT_RANK_TOL))]
fn extract_atoms(
    nvars: usize,
    values: Vec<f64>,
    r: usize,
    tol: f64,
) -> PyResult<Vec<(Vec<f64>, f64)>> {
    let y = core(MomentVector::new(nvars, 2 * r, values))?;
    let atoms = core(extract::extract_atoms(&y, r, tol))?;
    Ok(atoms.into_iter().map(|a| (a.point, a.weight)).collect())
}

/// Ranks of the moment matrices `M_0 .. M_r` of a degree-`2 r` moment vector.
#[pyfunction]
#[pyo3(signature = (nvars, values, r, tol=DEFAULT_RANK_TOL))]
fn rank_sequence(nvars: usize, values: Vec<f64>, r: usize, tol: f64) -> PyResult<Vec<usize>> {
    let y = core(MomentVector::new(nvars, 2 * r, values))?;
    core(extract::rank_sequence(&y, r, tol))
}

#[pymodule]
fn momentlmi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_function(wrap_pyfunction!(case_study, m)?)?;
    m.add_function(wrap_pyfunction!(monomials, m)?)?;
    m.add_function(wrap_pyfunction!(moments_from_atoms, m)?)?;
    m.add_function(wrap_pyfunction!(extract_atoms, m)?)?;
    m.add_function(wrap_pyfunction!(rank_sequence, m)?)?;
    Ok(())
}
