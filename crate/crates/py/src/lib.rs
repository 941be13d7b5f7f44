use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use locprob_core::analytic::{self, BStarForm, CoefficientVariant};
use locprob_core::error::Error;
use locprob_core::experiment::{self, ExperimentConfig};
use locprob_core::model;
use locprob_core::montecarlo::{self, RunOptions, ShadowParams, TrialProtocol};
use locprob_core::shadowing::{self, ShadowFailureMethod};

create_exception!(locprob, LocprobError, PyValueError);
create_exception!(locprob, NumericalError, LocprobError);

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        LocprobError::new_err(e.to_string())
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

#[pyclass(frozen, module = "locprob")]
struct NetworkParams {
    inner: model::NetworkParams,
}

#[pymethods]
impl NetworkParams {
    /// Network of `n` nodes with `k` L-nodes, or with NL-fraction `a`.
    #[new]
    #[pyo3(signature = (n, k=None, a=None))]
    fn new(n: u32, k: Option<u32>, a: Option<f64>) -> PyResult<Self> {
        let inner = match (k, a) {
            (Some(k), None) => model::NetworkParams::new(n, k),
            (None, Some(a)) => model::NetworkParams::with_fraction(n, a),
            _ => return Err(LocprobError::new_err("give exactly one of k or a")),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkParams(n={}, k={}, a={})",
            self.inner.n(),
            self.inner.k(),
            self.inner.a()
        )
    }
}

#[pyclass(frozen, module = "locprob")]
struct ShadowModel {
    inner: model::ShadowModel,
}

#[pymethods]
impl ShadowModel {
    #[new]
    #[pyo3(signature = (p0_dbm=0.0, gamma_dbm=-80.0, d0=0.1, n_p=3.5, sigma_s=12.0, domain_radius=40.0))]
    fn new(p0_dbm: f64, gamma_dbm: f64, d0: f64, n_p: f64, sigma_s: f64, domain_radius: f64) -> PyResult<Self> {
        let inner = model::ShadowModel::new(p0_dbm, gamma_dbm, d0, n_p, sigma_s, domain_radius).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn sigma1(&self) -> f64 {
        self.inner.sigma1
    }

    #[getter]
    fn d_hat_max(&self) -> f64 {
        self.inner.d_hat_max
    }

    #[getter]
    fn b_hat_max(&self) -> f64 {
        self.inner.b_hat_max
    }

    /// Estimated-coverage distribution for a true coverage ratio `b_o`.
    fn distribution(&self, b_o: f64) -> PyResult<BhatDistribution> {
        let inner = model::BhatDistribution::new(b_o, self.inner.sigma1, self.inner.b_hat_max).map_err(to_py)?;
        Ok(BhatDistribution { inner })
    }
}

#[pyclass(frozen, module = "locprob")]
struct BhatDistribution {
    inner: model::BhatDistribution,
}

#[pymethods]
impl BhatDistribution {
    #[new]
    fn new(b_o: f64, sigma1: f64, b_hat_max: f64) -> PyResult<Self> {
        let inner = model::BhatDistribution::new(b_o, sigma1, b_hat_max).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn b_o(&self) -> f64 {
        self.inner.b_o
    }

    #[getter]
    fn zero_mass(&self) -> f64 {
        self.inner.zero_mass
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        shadowing::bhat_pdf(&self.inner, x).map_err(to_py)
    }

    fn continuous_mass(&self) -> PyResult<f64> {
        shadowing::continuous_mass(&self.inner).map_err(to_py)
    }
}

#[pyclass(frozen, get_all, module = "locprob")]
struct ProbEstimate {
    realizations: u64,
    trials: u64,
    successes: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    seed: u64,
}

#[pymethods]
impl ProbEstimate {
    fn __repr__(&self) -> String {
        format!(
            "ProbEstimate(p_hat={}, ci=({}, {}), trials={})",
            self.p_hat, self.ci_low, self.ci_high, self.trials
        )
    }
}

/// Counting-sum failure probability; returns `(p_f, p_loc)`.
#[pyfunction]
fn failure_prob_sum(net: &NetworkParams, b: f64) -> PyResult<(f64, f64)> {
    let r = analytic::failure_prob_sum(&net.inner, b).map_err(to_py)?;
    Ok((r.p_f, r.p_loc))
}

#[pyfunction]
#[pyo3(signature = (net, b, variant="corrected"))]
fn failure_prob_closed(net: &NetworkParams, b: f64, variant: &str) -> PyResult<(f64, f64)> {
    let r = analytic::failure_prob_closed(&net.inner, b, parse(variant)?).map_err(to_py)?;
    Ok((r.p_f, r.p_loc))
}

#[pyfunction]
fn threshold_a_star(n: u32, b: f64) -> PyResult<Option<f64>> {
    analytic::threshold_a_star(n, b).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (n, a, form="exact"))]
fn threshold_b_star(n: u32, a: f64, form: &str) -> PyResult<f64> {
    let form = match form {
        "exact" => BStarForm::Exact,
        "large_n" => BStarForm::LargeN,
        other => {
            return Err(LocprobError::new_err(format!(
                "form must be exact|large_n, got {other}"
            )))
        }
    };
    analytic::threshold_b_star(n, a, form).map_err(to_py)
}

#[pyfunction]
fn iterative_failure_floor(n: u32, b: f64) -> PyResult<f64> {
    analytic::iterative_failure_floor(n, b).map_err(to_py)
}

/// Shadowed failure probability; returns `(p_f, p_loc)`.
#[pyfunction]
#[pyo3(signature = (net, dist, method="integrate_conditional", variant="corrected"))]
fn failure_prob_shadow(
    net: &NetworkParams,
    dist: &BhatDistribution,
    method: &str,
    variant: &str,
) -> PyResult<(f64, f64)> {
    let method: ShadowFailureMethod = parse(method)?;
    let variant: CoefficientVariant = parse(variant)?;
    let r = shadowing::failure_prob_shadow(&net.inner, &dist.inner, method, variant).map_err(to_py)?;
    Ok((r.p_f, r.p_loc))
}

#[pyfunction]
#[pyo3(signature = (net, b, trials=1000, seed=1, protocol="center", shadow_draw="none", shadow=None, workers=None))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    net: &NetworkParams,
    b: f64,
    trials: u64,
    seed: u64,
    protocol: &str,
    shadow_draw: &str,
    shadow: Option<&ShadowModel>,
    workers: Option<usize>,
) -> PyResult<ProbEstimate> {
    let base = match parse::<montecarlo::Probe>(protocol)? {
        montecarlo::Probe::CenterNode => TrialProtocol::center(),
        montecarlo::Probe::AllNlNodes => TrialProtocol::all_nl(),
    };
    let protocol = base.with_shadow(parse(shadow_draw)?);
    let params = shadow.map(|s| ShadowParams {
        sigma1: s.inner.sigma1,
        b_hat_max: s.inner.b_hat_max,
    });
    let net = net.inner;
    let est = py
        .detach(|| {
            montecarlo::estimate_with(
                &net,
                b,
                &protocol,
                params.as_ref(),
                trials,
                seed,
                RunOptions { workers },
            )
        })
        .map_err(to_py)?;
    Ok(ProbEstimate {
        realizations: est.realizations,
        trials: est.trials,
        successes: est.successes,
        p_hat: est.p_hat,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        seed: est.seed,
    })
}

/// CSV text of a named figure table.
#[pyfunction]
#[pyo3(signature = (name, seed=None, trials=None))]
fn run_figure(py: Python<'_>, name: &str, seed: Option<u64>, trials: Option<u64>) -> PyResult<String> {
    let figure: experiment::FigureName = parse(name)?;
    let mut config = ExperimentConfig::figure(figure.as_str());
    config.seed = seed;
    config.trials = trials;
    let out = py
        .detach(|| experiment::run_figure(figure, &config, RunOptions::default()))
        .map_err(to_py)?;
    out.table.to_csv_string().map_err(to_py)
}

/// CSV text for a JSON experiment config.
#[pyfunction]
fn run_config(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let table = py
        .detach(|| experiment::run_config(&config, RunOptions::default()))
        .map_err(to_py)?;
    table.to_csv_string().map_err(to_py)
}

#[pymodule]
fn locprob(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", experiment::TOOL_VERSION)?;
    m.add("LocprobError", m.py().get_type::<LocprobError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<NetworkParams>()?;
    m.add_class::<ShadowModel>()?;
    m.add_class::<BhatDistribution>()?;
    m.add_class::<ProbEstimate>()?;
    m.add_function(wrap_pyfunction!(failure_prob_sum, m)?)?;
    m.add_function(wrap_pyfunction!(failure_prob_closed, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_a_star, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_b_star, m)?)?;
    m.add_function(wrap_pyfunction!(iterative_failure_floor, m)?)?;
    m.add_function(wrap_pyfunction!(failure_prob_shadow, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_figure, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
