//! Python bindings. Results come back as plain dicts and tuples; failures
//! raise `ValueError` for bad input and `NoConvergenceError` (a
//! `RuntimeError`) for budget exhaustion, non-convergence and
//! oscillating products.

use infmeasure::delta::{self, LimitEstimate};
use infmeasure::equidist::{self, SequenceKind};
use infmeasure::linmap::{self, BlockLinearMap};
use infmeasure::presets;
use infmeasure::products::{self, TailKind};
use infmeasure::rect::{self, RectSpec};
use infmeasure::riemann::{self, RiemannOptions};
use infmeasure::{CylinderFn, Error, FactorSeq, GroupingAlpha, Interval, IntervalSeq, ProductMode, ProductResult};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(infmeasure_py, NoConvergenceError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Budget { .. } | Error::NoConvergence { .. } | Error::NotInClass => NoConvergenceError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for infmeasure::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn mode(s: &str) -> PyResult<ProductMode> {
    s.parse::<ProductMode>().py()
}

fn alpha(list: Option<Vec<usize>>) -> PyResult<GroupingAlpha> {
    match list {
        None => Ok(GroupingAlpha::ones()),
        Some(l) => GroupingAlpha::from_list(&l).py(),
    }
}

fn eps_schedule(eps: Option<Vec<f64>>) -> Vec<f64> {
    eps.unwrap_or_else(delta::default_eps_schedule)
}

/// A continuous function of finitely many coordinates, by registry name
/// (`cos_1`, `proj_1+proj_2`, `exp_1@0.5`, ...).
#[pyclass(name = "CylinderFn", module = "infmeasure_py", frozen)]
struct PyCylinderFn(CylinderFn);

#[pymethods]
impl PyCylinderFn {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        CylinderFn::by_name(name).py().map(Self)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    /// Number of leading coordinates read.
    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        self.0.eval(&x)
    }

    fn shifted(&self, t: Vec<f64>) -> Self {
        Self(self.0.shifted(&t))
    }

    fn __repr__(&self) -> String {
        format!("CylinderFn('{}')", self.0.name())
    }
}

/// An infinite rectangle `∏ [a_k, b_k]`.
#[pyclass(name = "Rect", module = "infmeasure_py", frozen)]
struct PyRect(IntervalSeq);

#[pymethods]
impl PyRect {
    /// Leading sides followed by `[0, 1]` in every later coordinate.
    #[new]
    fn new(sides: Vec<(f64, f64)>) -> PyResult<Self> {
        let head = sides
            .into_iter()
            .map(|(a, b)| Interval::new(a, b))
            .collect::<infmeasure::Result<Vec<_>>>()
            .py()?;
        Ok(Self(IntervalSeq::unit_tail(head)))
    }

    #[staticmethod]
    fn unit() -> Self {
        Self(IntervalSeq::unit())
    }

    /// `Δ_ε = ∏ [-a_k, a_k]` with `2 a_k = e^{-1/(2^k ε)}`.
    #[staticmethod]
    fn delta_box(epsilon: f64) -> PyResult<Self> {
        Ok(Self(infmeasure::DeltaBox::new(epsilon).py()?.to_rect()))
    }

    #[staticmethod]
    #[pyo3(signature = (name, epsilon=None))]
    fn preset(name: &str, epsilon: Option<f64>) -> PyResult<Self> {
        presets::rect_preset(name, epsilon).py().map(Self)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        RectSpec::from_json(s).and_then(|r| r.to_rect()).py().map(Self)
    }

    /// `(lo, hi)` of coordinate `k` (1-based).
    fn coord(&self, k: usize) -> PyResult<(f64, f64)> {
        let iv = self.0.coord(k).py()?;
        Ok((iv.lo(), iv.hi()))
    }

    /// Natural log of the side length of coordinate `k`.
    fn ln_side(&self, k: usize) -> PyResult<f64> {
        Ok(self.0.coord(k).py()?.ln_len())
    }

    fn translate(&self, t: Vec<f64>) -> PyResult<Self> {
        self.0.translate(&t).py().map(Self)
    }

    /// `(log_value, status)` of `μ_α` (ordinary) or `ν_α` (standard).
    #[pyo3(signature = (mode="ordinary", alpha=None))]
    fn measure(&self, mode: &str, alpha: Option<Vec<usize>>) -> PyResult<(f64, String)> {
        let m = rect::rect_measure(&self.0, &self::alpha(alpha)?, self::mode(mode)?).py()?;
        Ok((m.log_value, m.status.to_string()))
    }
}

fn product_dict<'py>(py: Python<'py>, r: &ProductResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("status", r.status.to_string())?;
    d.set_item("value", r.value())?;
    d.set_item("log_value", r.log_value)?;
    d.set_item("partials_inspected", r.partials_inspected)?;
    d.set_item("spread", r.spread)?;
    Ok(d)
}

/// Infinite product of a preset, a finite list (followed by ones), or a
/// callable `k -> β_k` (1-based).
#[pyfunction]
#[pyo3(signature = (preset=None, factors=None, factor=None, mode="ordinary", alpha=None, tol=products::DEFAULT_TOL, max_terms=products::DEFAULT_MAX_TERMS))]
#[allow(clippy::too_many_arguments)]
fn product<'py>(
    py: Python<'py>,
    preset: Option<&str>,
    factors: Option<Vec<f64>>,
    factor: Option<Py<PyAny>>,
    mode: &str,
    alpha: Option<Vec<usize>>,
    tol: f64,
    max_terms: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let seq = match (preset, factors, factor) {
        (Some(p), None, None) => presets::factor_preset(p).py()?,
        (None, Some(f), None) => FactorSeq::finite(f),
        (None, None, Some(c)) => FactorSeq::from_fn(TailKind::ClosedForm, 0, move |k| {
            Python::attach(|py| c.call1(py, (k,)).and_then(|v| v.extract::<f64>(py)).unwrap_or(f64::NAN))
        }),
        _ => return Err(PyValueError::new_err("give exactly one of preset, factors, factor")),
    };
    let r = products::grouped_product(&seq, &self::alpha(alpha)?, self::mode(mode)?, tol, max_terms).py()?;
    product_dict(py, &r)
}

/// Riemann average and integral of `f` over `rect` by grid refinement.
#[pyfunction]
#[pyo3(signature = (f, rect, tol=1e-3, best_effort=false))]
fn riemann_integral<'py>(
    py: Python<'py>,
    f: &PyCylinderFn,
    rect: &PyRect,
    tol: f64,
    best_effort: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = RiemannOptions {
        best_effort,
        ..RiemannOptions::new(tol)
    };
    let e = riemann::riemann_average(&f.0, &rect.0, &opts).py()?;
    let d = PyDict::new(py);
    d.set_item("integral", e.integral())?;
    d.set_item("average", e.average)?;
    d.set_item("lower_avg", e.lower_avg)?;
    d.set_item("upper_avg", e.upper_avg)?;
    d.set_item("log_measure", e.log_measure)?;
    d.set_item("cuts", e.cuts)?;
    d.set_item("cells", e.cells)?;
    d.set_item("converged", e.converged)?;
    Ok(d)
}

fn limit_dict<'py>(py: Python<'py>, r: LimitEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", r.value)?;
    d.set_item("cauchy_gap", r.cauchy_gap)?;
    d.set_item("eps_schedule", r.eps_schedule)?;
    d.set_item("n_schedule", r.n_schedule)?;
    let rows: Vec<(f64, Option<usize>, f64, bool)> = r
        .rows
        .iter()
        .map(|x| (x.epsilon, x.n, x.estimate, x.inner_converged))
        .collect();
    d.set_item("rows", rows)?;
    Ok(d)
}

/// `δ(f)` as the limit of box averages over `Δ_ε`.
#[pyfunction]
#[pyo3(signature = (f, eps=None, tol=1e-4))]
fn delta_via_integral<'py>(
    py: Python<'py>,
    f: &PyCylinderFn,
    eps: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    limit_dict(py, delta::delta_via_integral(&f.0, &eps_schedule(eps), tol).py()?)
}

/// `δ(f)` as the double limit of product-family averages inside `Δ_ε`.
#[pyfunction]
#[pyo3(signature = (f, eps=None, n=None, tol=2e-2))]
fn delta_via_families<'py>(
    py: Python<'py>,
    f: &PyCylinderFn,
    eps: Option<Vec<f64>>,
    n: Option<Vec<usize>>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let ns = n.unwrap_or_else(delta::default_n_schedule);
    limit_dict(py, delta::delta_via_families(&f.0, &eps_schedule(eps), &ns, tol).py()?)
}

/// `∫ δ(x - T) f(x) dλ(x)`.
#[pyfunction]
#[pyo3(signature = (f, shift, eps=None, tol=1e-4))]
fn sifting<'py>(
    py: Python<'py>,
    f: &PyCylinderFn,
    shift: Vec<f64>,
    eps: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    limit_dict(py, delta::sifting(&f.0, &shift, &eps_schedule(eps), tol).py()?)
}

/// `(log_ratio, status)` for the truncated scaling ratio.
#[pyfunction]
#[pyo3(signature = (alpha, depth, epsilon=0.1))]
fn scaling_ratio(alpha: f64, depth: usize, epsilon: f64) -> PyResult<(f64, String)> {
    let r = delta::scaling_ratio(alpha, depth, epsilon).py()?;
    Ok((r.log_ratio, r.status.to_string()))
}

/// `(point, average, residual)` with `f(point)` matching the `Δ_ε` average.
#[pyfunction]
#[pyo3(signature = (f, epsilon, avg_tol=1e-6, tol=1e-8))]
fn mean_value_point(f: &PyCylinderFn, epsilon: f64, avg_tol: f64, tol: f64) -> PyResult<(Vec<f64>, f64, f64)> {
    let r = delta::mean_value_point(&f.0, epsilon, avg_tol, tol).py()?;
    Ok((r.point, r.average, r.residual))
}

/// `(ratio, λ(U))` for each rectangle of the seeded corpus in `∏[0,1]`.
#[pyfunction]
#[pyo3(signature = (n, sequence="vdc", seed=0, count=20, budget=equidist::DEFAULT_FAMILY_BUDGET))]
fn equidist_corpus(n: usize, sequence: &str, seed: u64, count: usize, budget: u128) -> PyResult<Vec<(f64, f64)>> {
    let kind = match sequence.parse::<SequenceKind>().py()? {
        SequenceKind::SeededRandom { .. } => SequenceKind::SeededRandom { seed },
        k => k,
    };
    let fam = equidist::product_family_with(&IntervalSeq::unit(), &[kind], n, &[], budget).py()?;
    presets::u_corpus(seed, count)
        .iter()
        .map(|u| Ok((equidist::equidist_ratio(&fam, u)?, equidist::relative_measure(u)?)))
        .collect::<infmeasure::Result<Vec<_>>>()
        .py()
}

/// Image measure of `rect` under a block-diagonal map given as row-major
/// square blocks. `alpha` defaults to the block sizes followed by ones.
#[pyfunction]
#[pyo3(signature = (blocks, rect, alpha=None))]
fn map_rectangle_measure<'py>(
    py: Python<'py>,
    blocks: Vec<Vec<Vec<f64>>>,
    rect: &PyRect,
    alpha: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyDict>> {
    let map = BlockLinearMap::from_rows(&blocks).py()?;
    let a = match alpha {
        None => map.natural_alpha(),
        some => self::alpha(some)?,
    };
    let r = linmap::map_rectangle_measure(&map, &rect.0, &a).py()?;
    let d = PyDict::new(py);
    d.set_item("dets", r.jacobian.dets.clone())?;
    d.set_item("log_abs_det", r.jacobian.log_product)?;
    d.set_item("predicted_log_measure", r.predicted.log_value)?;
    d.set_item("direct_log_measure", r.direct.map(|m| m.log_value))?;
    d.set_item("agrees", r.agrees())?;
    Ok(d)
}

#[pymodule]
fn infmeasure_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NoConvergenceError", m.py().get_type::<NoConvergenceError>())?;
    m.add_class::<PyCylinderFn>()?;
    m.add_class::<PyRect>()?;
    m.add_function(wrap_pyfunction!(product, m)?)?;
    m.add_function(wrap_pyfunction!(riemann_integral, m)?)?;
    m.add_function(wrap_pyfunction!(delta_via_integral, m)?)?;
    m.add_function(wrap_pyfunction!(delta_via_families, m)?)?;
    m.add_function(wrap_pyfunction!(sifting, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(mean_value_point, m)?)?;
    m.add_function(wrap_pyfunction!(equidist_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(map_rectangle_measure, m)?)?;
    Ok(())
}
