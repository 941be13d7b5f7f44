//! Failure probability of one-shot localization with a fixed coverage
//! radius, its small-coverage approximation, and the transition thresholds.
//!
//! An NL-node fails when fewer than three L-nodes fall within its coverage
//! disk. With `n - 1` other nodes, each inside the disk with probability
//! `b^2` and an L-node with probability `1 - a`, the number of audible
//! L-nodes is `Binomial(n - 1, (1 - a) b^2)`, so
//!
//! ```text
//! P_F = u^(n-3) [1 + (n-3) c + (n-2)(n-3)/2 c^2],   c = (1-a) b^2,  u = 1 - c.
//! ```
//!
//! The same quantity is also available as the direct sum over the number of
//! nodes in coverage, which is the form the closed expression is checked
//! against.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_ratio, NetworkParams};
use crate::numerics::{
    binomial_cdf, binomial_upper_tail, find_sign_change, ln_binomial_pmf, second_derivative_fd, CompensatedSum,
};

/// Finite-difference step used when locating curvature roots.
pub const FD_STEP: f64 = 1e-4;

/// Which coefficient multiplies the `b^4` term of the closed form.
///
/// `Corrected` uses `(n-2)(n-3)/2`, the exact expansion of the counting
/// sum. `Paper` keeps the published `(n-1)(n-2)/2`, which overshoots and can
/// exceed one; it exists only to document that discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientVariant {
    Paper,
    #[default]
    Corrected,
}

impl CoefficientVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoefficientVariant::Paper => "paper",
            CoefficientVariant::Corrected => "corrected",
        }
    }

    /// Coefficient of `c^2` inside the bracket.
    pub fn quadratic_coefficient(&self, n: u32) -> f64 {
        let n = f64::from(n);
        match self {
            CoefficientVariant::Paper => (n - 1.0) * (n - 2.0) / 2.0,
            CoefficientVariant::Corrected => (n - 2.0) * (n - 3.0) / 2.0,
        }
    }
}

impl fmt::Display for CoefficientVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoefficientVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(CoefficientVariant::Paper),
            "corrected" => Ok(CoefficientVariant::Corrected),
            other => Err(Error::invalid(
                "variant",
                format!("expected paper|corrected, got `{other}`"),
            )),
        }
    }
}

/// Formula that produced a [`FailureProbResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sum,
    Closed(CoefficientVariant),
    ApproxSmall,
    IntegrateConditional,
    AlternatingSum,
    MomentApprox,
    NoThreshold,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sum => "sum",
            Method::Closed(CoefficientVariant::Corrected) => "closed_corrected",
            Method::Closed(CoefficientVariant::Paper) => "closed_paper",
            Method::ApproxSmall => "approx_small",
            Method::IntegrateConditional => "integrate_conditional",
            Method::AlternatingSum => "alternating_sum",
            Method::MomentApprox => "moment_approx",
            Method::NoThreshold => "no_threshold",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureProbResult {
    pub p_f: f64,
    pub p_loc: f64,
    pub method: Method,
}

impl FailureProbResult {
    pub(crate) fn from_failure(p_f: f64, method: Method) -> Self {
        Self {
            p_f,
            p_loc: 1.0 - p_f,
            method,
        }
    }
}

/// Direct sum over the number `p` of other nodes inside the coverage disk,
/// each term weighted by the probability that at most two of them are
/// L-nodes. Terms are formed in the log domain and summed with
/// compensation.
pub fn failure_prob_sum(net: &NetworkParams, b: f64) -> Result<FailureProbResult> {
    check_ratio("b", b)?;
    let trials = u64::from(net.n() - 1);
    let a = net.a();
    let s = b * b;
    let q = (1.0 - b) * (1.0 + b);
    let ln_a = a.ln();
    let ln_l = (1.0 - a).ln();
    let mut acc = CompensatedSum::new();
    for p in 0..=trials {
        let ln_mass = ln_binomial_pmf(p, trials, s, q);
        if ln_mass == f64::NEG_INFINITY {
            continue;
        }
        // p NL-nodes; one L-node among p; two L-nodes among p.
        acc.add((ln_mass + ln_pow(ln_a, p)).exp());
        if p >= 1 {
            acc.add((ln_mass + (p as f64).ln() + ln_pow(ln_a, p - 1) + ln_l).exp());
        }
        if p >= 2 {
            let pairs = (p * (p - 1) / 2) as f64;
            acc.add((ln_mass + pairs.ln() + ln_pow(ln_a, p - 2) + 2.0 * ln_l).exp());
        }
    }
    Ok(FailureProbResult::from_failure(
        acc.value().clamp(0.0, 1.0),
        Method::Sum,
    ))
}

/// `exponent * ln_x` with the convention `0^0 = 1` (no factor when the
/// exponent is zero, even for `ln_x = -inf`).
fn ln_pow(ln_x: f64, exponent: u64) -> f64 {
    if exponent == 0 {
        0.0
    } else {
        exponent as f64 * ln_x
    }
}

/// `u^(n-3) [1 + (n-3) c + K c^2]` with `c = (1-a) b^2`, evaluated for any
/// real `a`, `b` (finite differences step slightly outside `[0, 1]`).
pub fn closed_form(n: u32, a: f64, b: f64, variant: CoefficientVariant) -> f64 {
    let c = (1.0 - a) * b * b;
    let m = f64::from(n) - 3.0;
    let power = if (0.0..1.0).contains(&c) {
        (m * (-c).ln_1p()).exp()
    } else {
        (1.0 - c).powi(n as i32 - 3)
    };
    power * (1.0 + m * c + variant.quadratic_coefficient(n) * c * c)
}

/// Closed form of the failure probability.
///
/// Only the `Corrected` variant is guaranteed to lie in `[0, 1]`;
/// `Paper` is returned unclamped.
pub fn failure_prob_closed(net: &NetworkParams, b: f64, variant: CoefficientVariant) -> Result<FailureProbResult> {
    check_ratio("b", b)?;
    let p_f = closed_form(net.n(), net.a(), b, variant);
    let p_f = match variant {
        CoefficientVariant::Corrected => p_f.clamp(0.0, 1.0),
        CoefficientVariant::Paper => p_f,
    };
    Ok(FailureProbResult::from_failure(p_f, Method::Closed(variant)))
}

/// Localization probability `P(Binomial(n-1, (1-a) b^2) >= 3)`, summed from
/// the upper tail so small values keep their relative precision.
pub fn localization_prob(net: &NetworkParams, b: f64) -> Result<f64> {
    check_ratio("b", b)?;
    binomial_upper_tail(u64::from(net.n() - 1), (1.0 - net.a()) * b * b, 3)
}

/// `1 - [(n-3)(1-a) b^2]^2`, valid while `(1-a) b^2 < 2/n`. Set `force` to
/// evaluate outside that domain anyway.
pub fn failure_prob_approx_small(net: &NetworkParams, b: f64, force: bool) -> Result<FailureProbResult> {
    check_ratio("b", b)?;
    let c = (1.0 - net.a()) * b * b;
    let n = f64::from(net.n());
    if !force && c >= 2.0 / n {
        return Err(Error::OutsideValidity(format!(
            "(1-a) b^2 = {c:.4} is not below 2/n = {:.4}",
            2.0 / n
        )));
    }
    let x = (n - 3.0) * c;
    Ok(FailureProbResult::from_failure(1.0 - x * x, Method::ApproxSmall))
}

/// Threshold on `a` where `d^2 P_F / da^2` vanishes:
/// `a* = 1 - 1 / (b^2 (n/2 - 1))`. `None` when `a* <= 0`.
pub fn threshold_a_star(n: u32, b: f64) -> Result<Option<f64>> {
    if n < 5 {
        return Err(Error::TooFewNodes { n, min: 5 });
    }
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::invalid("b", format!("must lie in (0, 1], got {b}")));
    }
    let a_star = 1.0 - 1.0 / (b * b * (0.5 * f64::from(n) - 1.0));
    Ok((a_star > 0.0).then_some(a_star))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BStarForm {
    Exact,
    LargeN,
}

/// Threshold on `b` in the published closed form, or its large-`n` limit
/// `sqrt((1 + sqrt(1.75)) / ((1-a) n))`.
///
/// These expressions do not coincide with the curvature root of the
/// corrected failure probability; see [`threshold_b_numeric`].
pub fn threshold_b_star(n: u32, a: f64, form: BStarForm) -> Result<f64> {
    if n < 10 {
        return Err(Error::TooFewNodes { n, min: 10 });
    }
    if a == 1.0 {
        return Err(Error::NoThreshold("no L-nodes".into()));
    }
    if !(0.0..1.0).contains(&a) {
        return Err(Error::invalid("a", format!("must lie in [0, 1), got {a}")));
    }
    let nf = f64::from(n);
    let b2 = match form {
        BStarForm::LargeN => (1.0 + 1.75f64.sqrt()) / ((1.0 - a) * nf),
        BStarForm::Exact => {
            let quad = 4.0 * nf * nf - nf - 15.0;
            let cubic = 2.0 * nf.powi(3) - 8.0 * nf * nf + 10.5 * nf - 4.5;
            let root = (1.0 + 6.0 * (nf - 9.0) * cubic / (quad * quad)).sqrt();
            quad / (2.0 * (1.0 - a) * cubic) * (1.0 + root)
        }
    };
    Ok(b2.sqrt())
}

/// Locate the sign change of a curvature profile on `[lo, hi]`.
///
/// The scan keeps the bracket with the largest magnitudes on either side,
/// which skips spurious sign flips where the second difference is at the
/// rounding floor.
fn curvature_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    const STEPS: usize = 500;
    let d2 = |x: f64| second_derivative_fd(&f, x, FD_STEP).unwrap_or(f64::NAN);
    let xs: Vec<f64> = (0..=STEPS).map(|i| lo + (hi - lo) * i as f64 / STEPS as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| d2(x)).collect();
    let bracket = (0..STEPS)
        .filter(|&i| ys[i].is_finite() && ys[i + 1].is_finite() && ys[i].signum() != ys[i + 1].signum())
        .max_by(|&i, &j| {
            let wi = ys[i].abs().min(ys[i + 1].abs());
            let wj = ys[j].abs().min(ys[j + 1].abs());
            wi.total_cmp(&wj)
        })
        .ok_or(Error::NoSignChange { lo, hi })?;
    find_sign_change(d2, xs[bracket], xs[bracket + 1], 1e-10)
}

/// Root of the finite-difference `d^2 P_F / da^2` (corrected closed form).
pub fn threshold_a_numeric(n: u32, b: f64) -> Result<f64> {
    if threshold_a_star(n, b)?.is_none() {
        return Err(Error::NoThreshold(format!(
            "no curvature change in a for n = {n}, b = {b}"
        )));
    }
    curvature_root(|a| closed_form(n, a, b, CoefficientVariant::Corrected), 0.0, 1.0)
}

/// Root of the finite-difference `d^2 P_F / db^2` (corrected closed form).
pub fn threshold_b_numeric(n: u32, a: f64) -> Result<f64> {
    if n < 5 {
        return Err(Error::TooFewNodes { n, min: 5 });
    }
    if !(0.0..1.0).contains(&a) {
        return Err(Error::NoThreshold(format!("a = {a} leaves no L-nodes")));
    }
    curvature_root(|b| closed_form(n, a, b, CoefficientVariant::Corrected), 1e-3, 1.0)
}

/// Failure floor of unlimited iterative localization: the chance that fewer
/// than three of the other `n - 1` nodes are in coverage at all.
pub fn iterative_failure_floor(n: u32, b: f64) -> Result<f64> {
    if n < crate::model::MIN_NODES {
        return Err(Error::TooFewNodes {
            n,
            min: crate::model::MIN_NODES,
        });
    }
    check_ratio("b", b)?;
    binomial_cdf(u64::from(n - 1), b * b, 2)
}
