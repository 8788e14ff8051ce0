//! Python bindings: datasets, mechanisms and quantizers as classes, audits,
//! information measures, code search and the membership game as functions.
//!
//! Exact quantities (domain bounds, sensitivities, quantizer ranges) are
//! accepted as `int`, `float` or strings such as `"3/8"`; floats are taken
//! at their exact binary value.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use noiseless_core::auditor::{self, AuditOptions, AuditReport, OutputCount};
use noiseless_core::capacity::DEFAULT_SEARCH_CAP;
use noiseless_core::measures::{information_i0, leakage_l0, symmetrized_leakage};
use noiseless_core::mechanisms::{self, QuantizerSpec, SensitivityResult};
use noiseless_core::text;
use noiseless_core::value::{format_rational, from_f64, parse_rational, to_f64};
use noiseless_core::{
    games, DatasetSpec, Direction, Error, GameConfig, LevelRule, MechanismChoice, MechanismSpec, Policy,
    ProfilePanel, Rational, SynthesisOptions, Value,
};

fn py_err(e: Error) -> PyErr {
    if e.is_internal() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn or_py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for noiseless_core::Result<T> {
    fn or_py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn rational(obj: &Bound<'_, PyAny>) -> PyResult<Rational> {
    if let Ok(s) = obj.extract::<String>() {
        return parse_rational(&s).or_py();
    }
    if let Ok(i) = obj.extract::<i64>() {
        return Ok(Rational::from_integer(i.into()));
    }
    from_f64(obj.extract::<f64>()?).or_py()
}

fn rule(name: &str) -> PyResult<LevelRule> {
    match name {
        "guarded" => Ok(LevelRule::Guarded),
        "stated" => Ok(LevelRule::Stated),
        _ => Err(PyValueError::new_err(format!("unknown rule `{name}` (expected guarded or stated)"))),
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Num(r) if r.is_integer() => r.to_integer().to_string().parse::<i64>().map_or_else(
            |_| to_f64(r).into_pyobject(py).map(|o| o.into_any()),
            |i| i.into_pyobject(py).map(|o| o.into_any()),
        )?,
        Value::Num(r) => to_f64(r).into_pyobject(py)?.into_any(),
        Value::Sym(s) => s.into_pyobject(py)?.into_any(),
        Value::Tuple(items) => {
            let parts = items.iter().map(|x| value_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            pyo3::types::PyTuple::new(py, parts)?.into_any()
        }
    })
}

/// Individuals' domains plus the query they feed.
#[pyclass(name = "Dataset", module = "noiseless", frozen)]
struct PyDataset {
    inner: DatasetSpec,
}

#[pymethods]
impl PyDataset {
    /// `domains` uses `;` between individuals, each a comma list or `lo..hi`;
    /// `query` is `mean`, `sum`, `affine:w1,w2[:offset]` or `table:...`.
    #[new]
    fn new(domains: &str, query: &str) -> PyResult<Self> {
        let inner = DatasetSpec::new(text::parse_domains(domains).or_py()?, text::parse_query(query).or_py()?, None)
            .or_py()?;
        Ok(PyDataset { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[pyo3(signature = (grid_step = None))]
    fn sensitivity(&self, grid_step: Option<&Bound<'_, PyAny>>) -> PyResult<(f64, bool)> {
        let step = grid_step.map(rational).transpose()?;
        let s = mechanisms::sensitivity(&self.inner, step.as_ref()).or_py()?;
        Ok((s.as_f64(), s.is_lower_bound()))
    }

    #[pyo3(signature = (epsilon, rule = "guarded"))]
    fn synthesize(&self, epsilon: f64, rule: &str) -> PyResult<PyQuantizer> {
        let opts = SynthesisOptions {
            rule: self::rule(rule)?,
            ..Default::default()
        };
        let s = mechanisms::synthesize_quantizer(&self.inner, epsilon, &opts).or_py()?;
        Ok(PyQuantizer { inner: s.quantizer })
    }

    #[pyo3(signature = (mechanism, grid_step = None, force_grid = false, local = false))]
    fn audit(
        &self,
        mechanism: &PyMechanism,
        grid_step: Option<&Bound<'_, PyAny>>,
        force_grid: bool,
        local: bool,
    ) -> PyResult<PyAuditReport> {
        let opts = AuditOptions {
            grid_step: grid_step.map(rational).transpose()?,
            force_grid,
            ..Default::default()
        };
        let inner = if local {
            auditor::audit_local(&self.inner, &mechanism.inner, &opts)
        } else {
            auditor::audit(&self.inner, &mechanism.inner, &opts)
        }
        .or_py()?;
        Ok(PyAuditReport { inner })
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, domains={:?})", self.inner.n(), text::format_domains(self.inner.domains()))
    }
}

/// A deterministic map from query responses to published outputs.
#[pyclass(name = "Mechanism", module = "noiseless", frozen, from_py_object)]
#[derive(Clone)]
struct PyMechanism {
    inner: MechanismSpec,
}

#[pymethods]
impl PyMechanism {
    /// Parses `identity`, `constant:v`, `quantizer:q:lo..hi[:labels]`,
    /// `compose(a,b)` or `post(inner,a->b|...)`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyMechanism {
            inner: text::parse_mechanism(spec).or_py()?,
        })
    }

    #[staticmethod]
    fn identity() -> Self {
        PyMechanism {
            inner: MechanismSpec::Identity,
        }
    }

    #[staticmethod]
    fn compose(parts: Vec<PyMechanism>) -> PyResult<Self> {
        let inner = MechanismSpec::Compose(parts.into_iter().map(|m| m.inner).collect());
        inner.validate().or_py()?;
        Ok(PyMechanism { inner })
    }

    /// `g ∘ self` for a finite map given as `{output: relabelled}` strings.
    fn post_process(&self, mapping: BTreeMap<String, String>) -> PyResult<Self> {
        let map = mapping
            .iter()
            .map(|(a, b)| Ok((text::parse_value(a)?, text::parse_value(b)?)))
            .collect::<noiseless_core::Result<BTreeMap<_, _>>>()
            .or_py()?;
        Ok(PyMechanism {
            inner: MechanismSpec::post_process(self.inner.clone(), map).or_py()?,
        })
    }

    fn apply<'py>(&self, py: Python<'py>, dataset: &PyDataset, data: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
        let x = data.iter().map(|s| text::parse_value(s)).collect::<noiseless_core::Result<Vec<_>>>().or_py()?;
        value_to_py(py, &mechanisms::apply(&self.inner, &dataset.inner, &x).or_py()?)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Mechanism({:?})", self.inner.to_string())
    }

    fn __eq__(&self, other: &PyMechanism) -> bool {
        self.inner == other.inner
    }
}

/// `q` equal-width cells over `[lo, hi]`, the last cell closed.
#[pyclass(name = "Quantizer", module = "noiseless", frozen)]
struct PyQuantizer {
    inner: QuantizerSpec,
}

#[pymethods]
impl PyQuantizer {
    #[new]
    fn new(levels: u64, lo: &Bound<'_, PyAny>, hi: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyQuantizer {
            inner: QuantizerSpec::new(levels, rational(lo)?, rational(hi)?).or_py()?,
        })
    }

    #[getter]
    fn levels(&self) -> u64 {
        self.inner.levels()
    }

    #[getter]
    fn lo(&self) -> String {
        format_rational(self.inner.lo())
    }

    #[getter]
    fn hi(&self) -> String {
        format_rational(self.inner.hi())
    }

    fn cell_index(&self, x: &Bound<'_, PyAny>) -> PyResult<u64> {
        self.inner.cell_index(&rational(x)?).or_py()
    }

    fn quantize<'py>(&self, py: Python<'py>, x: &Bound<'_, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        value_to_py(py, &self.inner.quantize(&rational(x)?).or_py()?)
    }

    fn boundaries(&self) -> Vec<f64> {
        self.inner.boundaries().iter().map(to_f64).collect()
    }

    fn mechanism(&self) -> PyMechanism {
        PyMechanism {
            inner: MechanismSpec::Quantizer(self.inner.clone()),
        }
    }

    fn __repr__(&self) -> String {
        format!("Quantizer({})", MechanismSpec::Quantizer(self.inner.clone()))
    }
}

#[pyclass(name = "AuditReport", module = "noiseless", frozen)]
struct PyAuditReport {
    inner: AuditReport,
}

#[pymethods]
impl PyAuditReport {
    #[getter]
    fn epsilon_star(&self) -> f64 {
        self.inner.epsilon_star
    }

    /// Worst-case output count per individual; `None` when uncountable.
    #[getter]
    fn counts(&self) -> Vec<Option<u64>> {
        self.inner
            .per_individual
            .iter()
            .map(|a| match a.count {
                OutputCount::Finite(k) => Some(k),
                OutputCount::Infinite => None,
            })
            .collect()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }

    #[getter]
    fn is_lower_bound(&self) -> bool {
        self.inner.is_lower_bound()
    }

    fn satisfies(&self, epsilon: f64) -> bool {
        self.inner.satisfies(epsilon)
    }

    fn csv(&self) -> String {
        self.inner.csv_rows()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

/// Level count for budget `epsilon`, output range `[y_min, y_max]` and
/// sensitivity `sens`.
#[pyfunction]
#[pyo3(signature = (epsilon, y_min, y_max, sens, rule = "guarded"))]
fn synthesize_levels(
    epsilon: f64,
    y_min: &Bound<'_, PyAny>,
    y_max: &Bound<'_, PyAny>,
    sens: &Bound<'_, PyAny>,
    rule: &str,
) -> PyResult<u64> {
    let opts = SynthesisOptions {
        rule: self::rule(rule)?,
        ..Default::default()
    };
    let sens = SensitivityResult::exact(rational(sens)?);
    Ok(mechanisms::synthesize_levels(epsilon, &rational(y_min)?, &rational(y_max)?, &sens, &opts)
        .or_py()?
        .levels)
}

/// Hartley entropies, leakages, informations and maximin information of a
/// joint range written `x:y,x:y,...`.
#[pyfunction]
fn measures<'py>(py: Python<'py>, relation: &str) -> PyResult<Bound<'py, PyDict>> {
    let rel = text::parse_relation(relation).or_py()?;
    let star = noiseless_core::maximin_info(&rel).or_py()?;
    let d = PyDict::new(py);
    d.set_item("h0_x", (rel.x_range().len() as f64).log2())?;
    d.set_item("h0_y", (rel.y_range().len() as f64).log2())?;
    d.set_item("l0_xy", leakage_l0(&rel, Direction::XY))?;
    d.set_item("l0_yx", leakage_l0(&rel, Direction::YX))?;
    d.set_item("i0_xy", information_i0(&rel, Direction::XY))?;
    d.set_item("i0_yx", information_i0(&rel, Direction::YX))?;
    d.set_item("l0_sym", symmetrized_leakage(&rel))?;
    d.set_item("maximin", star.bits)?;
    let blocks: Vec<Vec<String>> = star
        .partition
        .blocks()
        .iter()
        .map(|b| b.iter().map(Value::to_string).collect())
        .collect();
    d.set_item("partition", blocks)?;
    Ok(d)
}

/// Maximal leakage (bits) of the deterministic channel `{x: y}` under a
/// prior written as for the command line (`uniform` or `x:mass,...`).
#[pyfunction]
fn maximal_leakage(channel: BTreeMap<String, String>, prior: &str) -> PyResult<f64> {
    let map = channel
        .iter()
        .map(|(x, y)| Ok((text::parse_value(x)?, text::parse_value(y)?)))
        .collect::<noiseless_core::Result<BTreeMap<_, _>>>()
        .or_py()?;
    let support = noiseless_core::Domain::Finite(map.keys().cloned().collect());
    let prior = text::parse_prior(prior, &support).or_py()?;
    noiseless_core::maximal_leakage(&map, &prior).or_py()
}

/// Largest zero-error code at block length `k`: `(size, rate, codewords)`.
#[pyfunction]
#[pyo3(signature = (channel, k, cap = DEFAULT_SEARCH_CAP))]
fn zero_error_code(channel: &str, k: usize, cap: u64) -> PyResult<(usize, f64, Vec<Vec<String>>)> {
    let r = noiseless_core::zero_error_code_search(&text::parse_channel(channel).or_py()?, k, cap).or_py()?;
    let code = r.code.iter().map(|w| w.iter().map(Value::to_string).collect()).collect();
    Ok((r.size(), r.rate, code))
}

/// Deterministic synthetic daily profiles, one list per individual.
#[pyfunction]
fn synthesize_panel(count: usize, horizon: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(games::synthesize_panel(count, horizon, seed).or_py()?.profiles().to_vec())
}

/// Plays the membership game. `mechanism` is `"quantized"` (needs
/// `epsilon`), `"identity"` or `"constant"`; `panel` is a list of profiles.
#[pyfunction]
#[pyo3(signature = (panel, policy, n, trials, seed, mechanism = "quantized", epsilon = None, rule = "guarded"))]
#[allow(clippy::too_many_arguments)]
fn play_game<'py>(
    py: Python<'py>,
    panel: Vec<Vec<f64>>,
    policy: &str,
    n: usize,
    trials: u64,
    seed: u64,
    mechanism: &str,
    epsilon: Option<f64>,
    rule: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let ids = (1..=panel.len()).map(|k| format!("h{k}")).collect();
    let panel = ProfilePanel::new(ids, panel).or_py()?;
    let choice = match (mechanism, epsilon) {
        ("quantized", Some(epsilon)) => MechanismChoice::Quantized { epsilon },
        ("quantized", None) => return Err(PyValueError::new_err("the quantized mechanism needs epsilon")),
        ("identity", _) => MechanismChoice::Identity,
        ("constant", _) => MechanismChoice::Constant,
        (other, _) => return Err(PyValueError::new_err(format!("unknown mechanism `{other}`"))),
    };
    let mut cfg = GameConfig::new(n, choice, trials, seed, policy.parse::<Policy>().or_py()?);
    cfg.rule = self::rule(rule)?;
    let r = py.detach(|| games::play_game(&panel, &cfg)).or_py()?;
    let d = PyDict::new(py);
    d.set_item("policy", r.policy.to_string())?;
    d.set_item("n", r.n)?;
    d.set_item("epsilon", r.epsilon)?;
    d.set_item("trials", r.trials)?;
    d.set_item("wins", r.wins)?;
    d.set_item("ties", r.ties)?;
    d.set_item("fallbacks", r.fallbacks)?;
    d.set_item("adv", r.adv)?;
    d.set_item("ci_halfwidth", r.ci_halfwidth)?;
    d.set_item("levels", r.levels)?;
    Ok(d)
}

#[pymodule]
fn noiseless(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyMechanism>()?;
    m.add_class::<PyQuantizer>()?;
    m.add_class::<PyAuditReport>()?;
    m.add_function(wrap_pyfunction!(synthesize_levels, m)?)?;
    m.add_function(wrap_pyfunction!(measures, m)?)?;
    m.add_function(wrap_pyfunction!(maximal_leakage, m)?)?;
    m.add_function(wrap_pyfunction!(zero_error_code, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_panel, m)?)?;
    m.add_function(wrap_pyfunction!(play_game, m)?)?;
    Ok(())
}
