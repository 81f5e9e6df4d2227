//! Python bindings: `import pyclipaudit`.
//!
//! Scalars and lists cross the boundary as native Python values. Structured
//! audit state (snapshots, plans) is exchanged as JSON text in the same shape
//! the command line and service emit.

use std::collections::BTreeMap;

use clipaudit::beta::{self, CalibrationJob};
use clipaudit::engine::{self, make_plan, BetaChoice, IngestReport, Verdict};
use clipaudit::estimator::{self, ScenarioSpec};
use clipaudit::live::LiveAudit;
use clipaudit::sampler::parse_manifest;
use clipaudit::types::{Choice, ContestSpec};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pyclipaudit, ClipAuditError, PyValueError);

fn err(e: clipaudit::Error) -> PyErr {
    ClipAuditError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    ClipAuditError::new_err(e.to_string())
}

fn default_jobs(jobs: Option<usize>) -> usize {
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Reference-table value, rounding `n` up and `alpha` down.
#[pyfunction]
fn beta_lookup(n: u64, alpha: f64) -> PyResult<f64> {
    beta::beta_lookup(n, alpha).map(|r| r.beta).map_err(err)
}

#[pyfunction]
fn beta_formula(n: u64, alpha: f64) -> PyResult<f64> {
    beta::beta_formula(n, alpha).map_err(err)
}

#[pyfunction]
fn beta_formula_upper(n: u64, alpha: f64) -> PyResult<f64> {
    beta::beta_formula_upper(n, alpha).map_err(err)
}

#[pyfunction]
fn exhaustive_beta(n: u64, alpha: f64) -> PyResult<f64> {
    beta::exhaustive_beta(n, alpha).map_err(err)
}

/// Monte Carlo `beta` for each alpha, in order. Releases the GIL while running.
#[pyfunction]
#[pyo3(signature = (n, alphas, trials=1_000_000, seed=1, jobs=None))]
fn simulate_beta(py: Python<'_>, n: u64, alphas: Vec<f64>, trials: u64, seed: u64, jobs: Option<usize>) -> PyResult<Vec<f64>> {
    let job = CalibrationJob { n, alphas, trials, seed, parallelism: default_jobs(jobs) };
    let rows = py.detach(|| beta::simulate_beta(&job, None)).map_err(err)?;
    Ok(rows.into_iter().map(|r| r.beta).collect())
}

/// True if the pair with `a` winner and `b` loser votes is accepted.
#[pyfunction]
fn stops(a: u64, b: u64, beta: f64) -> bool {
    engine::stops(a, b, beta)
}

#[pyfunction]
fn threshold(a: u64, b: u64, beta: f64) -> f64 {
    engine::threshold(a, b, beta)
}

/// `(expected, ceiled)`.
#[pyfunction]
fn expected_sample_size_clip(beta: f64, margin: f64) -> PyResult<(f64, u64)> {
    let e = estimator::expected_sample_size_clip(beta, margin).map_err(err)?;
    Ok((e.expected, e.ceiled))
}

/// `(expected, ceiled)`.
#[pyfunction]
fn expected_sample_size_bravo(alpha: f64, margin: f64) -> PyResult<(f64, u64)> {
    let e = estimator::expected_sample_size_bravo(alpha, margin).map_err(err)?;
    Ok((e.expected, e.ceiled))
}

#[pyclass(frozen, get_all, module = "pyclipaudit")]
struct AsnReport {
    mean: f64,
    stddev: f64,
    accepted_fraction: f64,
    full_count_fraction: f64,
    /// `(p, sample size)` pairs.
    quantiles: Vec<(f64, u64)>,
    /// Final sample size of every trial, in trial order.
    sample_sizes: Vec<u64>,
}

#[pymethods]
impl AsnReport {
    fn __repr__(&self) -> String {
        format!(
            "AsnReport(mean={:.3}, stddev={:.3}, accepted_fraction={:.5}, trials={})",
            self.mean,
            self.stddev,
            self.accepted_fraction,
            self.sample_sizes.len()
        )
    }
}

/// Simulated sample sizes for a two-candidate election with true `margin`.
#[pyfunction]
#[pyo3(signature = (n, margin, alpha, beta, trials=10_000, seed=1, jobs=None))]
#[allow(clippy::too_many_arguments)]
fn measure_asn(
    py: Python<'_>,
    n: u64,
    margin: f64,
    alpha: f64,
    beta: f64,
    trials: u64,
    seed: u64,
    jobs: Option<usize>,
) -> PyResult<AsnReport> {
    let scenario = ScenarioSpec { n, margin, alpha, beta, trials, seed };
    let parallelism = default_jobs(jobs);
    let r = py.detach(|| estimator::measure_asn(&scenario, parallelism)).map_err(err)?;
    Ok(AsnReport {
        mean: r.mean,
        stddev: r.stddev,
        accepted_fraction: r.accepted_fraction,
        full_count_fraction: r.full_count_fraction,
        quantiles: r.quantiles.iter().map(|q| (q.p, q.sample_size)).collect(),
        sample_sizes: r.trials.iter().map(|t| t.final_sample_size).collect(),
    })
}

/// A live audit over a ballot manifest. The sampler announces one ballot at
/// a time; `submit` records its interpretation and announces the next.
#[pyclass(module = "pyclipaudit")]
struct Audit {
    inner: LiveAudit,
}

#[pymethods]
impl Audit {
    /// `contests` is JSON: one contest spec or a list of them. `beta=None`
    /// looks each contest up in the reference table.
    #[new]
    #[pyo3(signature = (manifest_csv, contests, alpha, seed, beta=None))]
    fn new(manifest_csv: &str, contests: &str, alpha: f64, seed: u64, beta: Option<f64>) -> PyResult<Self> {
        let value: serde_json::Value = serde_json::from_str(contests).map_err(json_err)?;
        let specs: Vec<ContestSpec> = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|s| vec![s])
        }
        .map_err(json_err)?;
        let profile = parse_manifest(manifest_csv.as_bytes(), Some(&specs)).map_err(err)?;
        let choice = match beta {
            Some(beta) => BetaChoice::Manual { beta },
            None => BetaChoice::Table,
        };
        let plan = make_plan(&specs, alpha, &choice).map_err(err)?;
        let inner = LiveAudit::new(plan, profile, seed).map_err(err)?;
        Ok(Self { inner })
    }

    /// The ballot to retrieve next, or `None` once the audit is over.
    #[getter]
    fn announced(&self) -> Option<String> {
        self.inner.announced().map(str::to_string)
    }

    #[getter]
    fn draws(&self) -> usize {
        self.inner.session().drawn().len()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.session().is_finished()
    }

    /// `"in_progress"`, `"all_accepted"` or `"full_count"`.
    #[getter]
    fn verdict(&self) -> &'static str {
        match self.inner.session().verdict() {
            Verdict::InProgress => "in_progress",
            Verdict::AllAccepted => "all_accepted",
            Verdict::FullCount { .. } => "full_count",
        }
    }

    /// Contests on `ballot_id` that still need an interpretation.
    fn contests_to_interpret(&self, ballot_id: &str) -> Vec<String> {
        self.inner.contests_to_interpret(ballot_id)
    }

    /// Records the announced ballot. Returns a dict with `newly_accepted`
    /// (`(contest, winner, loser)` tuples) and `contests_closed`.
    fn submit<'py>(
        &mut self,
        py: Python<'py>,
        ballot_id: &str,
        interpretations: BTreeMap<String, String>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let choices = interpretations
            .into_iter()
            .map(|(k, v)| Ok((k, Choice::parse(&v)?)))
            .collect::<clipaudit::Result<BTreeMap<_, _>>>()
            .map_err(err)?;
        let report = self.inner.submit(ballot_id, choices).map_err(err)?;
        report_dict(py, &report)
    }

    /// Submits the announced ballot with the choices recorded on the
    /// manifest. Returns `None` once the audit is over.
    fn submit_recorded<'py>(&mut self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        match self.inner.submit_recorded().map_err(err)? {
            Some(report) => report_dict(py, &report).map(Some),
            None => Ok(None),
        }
    }

    /// Current state as JSON, the `snapshot` object of the CLI transcript.
    fn snapshot_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.session().snapshot()).map_err(json_err)
    }

    fn __repr__(&self) -> String {
        format!("Audit(draws={}, verdict={:?})", self.draws(), self.verdict())
    }
}

fn report_dict<'py>(py: Python<'py>, report: &IngestReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let pairs: Vec<(String, String, String)> = report
        .newly_accepted
        .iter()
        .map(|p| (p.contest_id.clone(), p.winner.as_str().to_string(), p.loser.as_str().to_string()))
        .collect();
    d.set_item("newly_accepted", pairs)?;
    d.set_item("contests_closed", report.contests_closed.clone())?;
    Ok(d)
}

#[pymodule]
fn pyclipaudit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ClipAuditError", m.py().get_type::<ClipAuditError>())?;
    m.add("GENERATOR_ID", clipaudit::rng::GENERATOR_ID)?;
    m.add_function(wrap_pyfunction!(beta_lookup, m)?)?;
    m.add_function(wrap_pyfunction!(beta_formula, m)?)?;
    m.add_function(wrap_pyfunction!(beta_formula_upper, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_beta, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_beta, m)?)?;
    m.add_function(wrap_pyfunction!(stops, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(expected_sample_size_clip, m)?)?;
    m.add_function(wrap_pyfunction!(expected_sample_size_bravo, m)?)?;
    m.add_function(wrap_pyfunction!(measure_asn, m)?)?;
    m.add_class::<AsnReport>()?;
    m.add_class::<Audit>()?;
    Ok(())
}
