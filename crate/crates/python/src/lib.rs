//! Python bindings: fair LPs, slack transforms and seeded simulations.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fairdiv::bandit::{etc_warmup_length, PolicyKind, ValueModel};
use fairdiv::experiment::{fit_regret_slope, run_single, trace_csv};
use fairdiv::lp::{solve_optimal_fair, solve_robust_fair, FairSolution};
use fairdiv::transform::{efe_slack_transform, proportional_slack_transform, TransformReport};
use fairdiv::{ConfidenceBox, Error, Family, FractionalAllocation, Matrix, MeanMatrix, ProblemSpec};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::ShapeMismatch { .. } | Error::Config { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn family(name: &str) -> PyResult<Family> {
    name.parse().map_err(py_err)
}

fn policy(name: &str) -> PyResult<PolicyKind> {
    match name {
        "etc" => Ok(PolicyKind::Etc),
        "oracle" => Ok(PolicyKind::Oracle),
        "uar" => Ok(PolicyKind::Uar),
        "greedy_unfair" => Ok(PolicyKind::GreedyUnfair),
        other => Err(PyValueError::new_err(format!(
            "unknown policy `{other}` (expected etc, oracle, uar or greedy_unfair)"
        ))),
    }
}

fn means(rows: Vec<Vec<f64>>) -> PyResult<MeanMatrix> {
    MeanMatrix::from_rows(rows).map_err(py_err)
}

/// Optimal allocation of a fairness-constrained welfare LP.
#[pyclass(name = "FairSolution", frozen, get_all)]
struct PyFairSolution {
    allocation: Vec<Vec<f64>>,
    value: f64,
    pivots: usize,
}

impl From<FairSolution> for PyFairSolution {
    fn from(s: FairSolution) -> Self {
        Self {
            allocation: s.allocation.to_rows(),
            value: s.value,
            pivots: s.pivots,
        }
    }
}

#[pymethods]
impl PyFairSolution {
    fn __repr__(&self) -> String {
        format!("FairSolution(value={}, allocation={:?})", self.value, self.allocation)
    }
}

#[pyclass(name = "TransformReport", frozen, get_all)]
struct PyTransformReport {
    output: Vec<Vec<f64>>,
    gamma: f64,
    sw_loss: f64,
    iterations: usize,
    final_alpha: f64,
    /// Every constraint holds with slack or by equal rows.
    all_hold: bool,
    branches: Vec<String>,
}

impl From<TransformReport> for PyTransformReport {
    fn from(r: TransformReport) -> Self {
        Self {
            output: r.output.to_rows(),
            gamma: r.gamma,
            sw_loss: r.sw_loss,
            iterations: r.iterations,
            final_alpha: r.final_alpha,
            all_hold: r.all_hold(),
            branches: r.log.iter().map(|l| format!("{:?}", l.branch)).collect(),
        }
    }
}

#[pymethods]
impl PyTransformReport {
    fn __repr__(&self) -> String {
        format!(
            "TransformReport(iterations={}, sw_loss={}, all_hold={})",
            self.iterations, self.sw_loss, self.all_hold
        )
    }
}

/// One simulated episode.
#[pyclass(name = "Run", frozen, get_all)]
struct PyRun {
    horizon: u64,
    seed: u64,
    policy: String,
    cumulative_regret: f64,
    per_step_regret: Vec<f64>,
    committed: Option<Vec<Vec<f64>>>,
    committed_satisfies: Option<bool>,
    mu_in_box: Option<bool>,
    realized_envy: Vec<f64>,
    realized_prop_gap: Vec<f64>,
    trace_csv: String,
}

#[pymethods]
impl PyRun {
    fn __repr__(&self) -> String {
        format!(
            "Run(policy={}, horizon={}, seed={}, cumulative_regret={})",
            self.policy, self.horizon, self.seed, self.cumulative_regret
        )
    }
}

/// Maximizes welfare subject to EFE or PE constraints.
#[pyfunction]
#[pyo3(signature = (mu, family="efe"))]
fn solve_fair(mu: Vec<Vec<f64>>, family: &str) -> PyResult<PyFairSolution> {
    let sol = solve_optimal_fair(&means(mu)?, self::family(family)?).map_err(py_err)?;
    Ok(sol.into())
}

/// The robust program: constraints hold for every mean in the clamped box.
#[pyfunction]
#[pyo3(signature = (center, radius, a, b, family="efe"))]
fn solve_robust(center: Vec<Vec<f64>>, radius: Vec<Vec<f64>>, a: f64, b: f64, family: &str) -> PyResult<PyFairSolution> {
    let radius = Matrix::from_rows(radius).map_err(py_err)?;
    let bx = ConfidenceBox::new(means(center)?, radius, a, b).map_err(py_err)?;
    let sol = solve_robust_fair(&bx, self::family(family)?).map_err(py_err)?;
    Ok(sol.into())
}

/// Largest slack the envy-freeness transform accepts.
#[pyfunction]
fn efe_gamma_max(n: usize, a: f64, b: f64) -> PyResult<f64> {
    fairdiv::transform::efe_gamma_max(n, a, b).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (mu, y, gamma, a, b, family="efe"))]
fn slack_transform(
    mu: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    gamma: f64,
    a: f64,
    b: f64,
    family: &str,
) -> PyResult<PyTransformReport> {
    let mu = means(mu)?;
    let y = FractionalAllocation::from_rows(y).map_err(py_err)?;
    let report = match self::family(family)? {
        Family::Efe => efe_slack_transform(&mu, &y, gamma, a, b),
        Family::Pe => proportional_slack_transform(&mu, &y, gamma, a, b),
    }
    .map_err(py_err)?;
    Ok(report.into())
}

/// Warm-up rounds before the explore-then-commit policy commits.
#[pyfunction]
fn warmup_length(horizon: u64) -> u64 {
    etc_warmup_length(horizon)
}

/// Runs one seeded episode with Gaussian noise around `mu`.
#[pyfunction]
#[pyo3(signature = (mu, horizon, seed, a, b, family="efe", policy="etc", distribution=None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    mu: Vec<Vec<f64>>,
    horizon: u64,
    seed: u64,
    a: f64,
    b: f64,
    family: &str,
    policy: &str,
    distribution: Option<Vec<f64>>,
) -> PyResult<PyRun> {
    let mu = means(mu)?;
    let (n, m) = mu.matrix().shape();
    let mut spec = ProblemSpec::uniform(n, m, horizon, a, b, self::family(family)?).map_err(py_err)?;
    if let Some(d) = distribution {
        spec.item_distribution = d;
        spec.validate().map_err(py_err)?;
    }
    let kind = self::policy(policy)?;
    let run = py
        .detach(|| run_single(&spec, &mu, ValueModel::Gaussian, kind, seed))
        .map_err(py_err)?;
    let csv = trace_csv(&run).map_err(py_err)?;
    Ok(PyRun {
        horizon,
        seed,
        policy: kind.as_str().to_string(),
        cumulative_regret: run.regret.cumulative,
        per_step_regret: run.regret.per_step.clone(),
        committed: run.trace.committed.as_ref().map(|x| x.to_rows()),
        committed_satisfies: run.committed_satisfies,
        mu_in_box: run.mu_in_box,
        realized_envy: run.fairness.envy.clone(),
        realized_prop_gap: run.fairness.prop_gap.clone(),
        trace_csv: String::from_utf8(csv).map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
    })
}

/// Least-squares slope of log regret against log horizon: `(slope, stderr)`.
#[pyfunction]
fn fit_slope(points: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    let fit = fit_regret_slope(&points).map_err(py_err)?;
    Ok((fit.slope, fit.stderr))
}

#[pymodule]
fn fairdiv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFairSolution>()?;
    m.add_class::<PyTransformReport>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(solve_fair, m)?)?;
    m.add_function(wrap_pyfunction!(solve_robust, m)?)?;
    m.add_function(wrap_pyfunction!(efe_gamma_max, m)?)?;
    m.add_function(wrap_pyfunction!(slack_transform, m)?)?;
    m.add_function(wrap_pyfunction!(warmup_length, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_slope, m)?)?;
    Ok(())
}
