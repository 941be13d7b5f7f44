//! Failure probability when each node's coverage is set by a log-normally
//! shadowed power measurement.
//!
//! The probe's coverage ratio `b_hat` follows the mixed distribution of
//! [`BhatDistribution`]: an atom at zero (signal below the detection
//! threshold) plus a truncated log-normal density. Conditioned on `b_hat`
//! the failure probability is the fixed-coverage closed form, so
//!
//! ```text
//! P_F = zero_mass + int_0^b_hat_max P_F(b_hat = x) f(x) dx.
//! ```
//!
//! Expanding `(1 - k1 b_hat^2)^(n-3)` turns this into an alternating sum
//! over even moments of `b_hat`, which is kept for cross-checking at small
//! `n`; it cancels catastrophically as `n` grows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{closed_form, CoefficientVariant, FailureProbResult, Method};
use crate::error::{Error, Result};
use crate::model::{BhatDistribution, NetworkParams, ALPHA};
use crate::numerics::{binomial_upper_tail, integrate_with_breaks, CompensatedSum, QuadratureSpec};

/// Largest `n` accepted by the alternating moment sum.
pub const ALTERNATING_SUM_MAX_N: u32 = 30;
/// Largest `n` accepted by the log-normal moment approximation.
pub const MOMENT_APPROX_MAX_N: u32 = 10;

/// Half-width, in standard deviations of `ln(b_hat)`, beyond which the
/// density is treated as zero.
const TAIL_SDS: f64 = 40.0;
/// Lower cut-off of the density support relative to `b_o`.
const ORIGIN_CUTOFF: f64 = 1e-12;

fn expectation_spec() -> QuadratureSpec {
    QuadratureSpec::with_tol(1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowFailureMethod {
    #[default]
    IntegrateConditional,
    AlternatingSum,
    MomentApprox,
}

impl ShadowFailureMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShadowFailureMethod::IntegrateConditional => "integrate_conditional",
            ShadowFailureMethod::AlternatingSum => "alternating_sum",
            ShadowFailureMethod::MomentApprox => "moment_approx",
        }
    }
}

impl fmt::Display for ShadowFailureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShadowFailureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integrate_conditional" => Ok(Self::IntegrateConditional),
            "alternating_sum" => Ok(Self::AlternatingSum),
            "moment_approx" => Ok(Self::MomentApprox),
            other => Err(Error::invalid("method", format!("unknown shadow method `{other}`"))),
        }
    }
}

/// Coefficients of the conditional failure probability
/// `(1 - k1 x^2)^(n-3) (1 + k2 x^2 + k3 x^4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl ShadowConstants {
    pub fn new(net: &NetworkParams, variant: CoefficientVariant) -> Self {
        let l = 1.0 - net.a();
        Self {
            k1: l,
            k2: l * (f64::from(net.n()) - 3.0),
            k3: l * l * variant.quadratic_coefficient(net.n()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    /// Numerical integration over the truncated mixed distribution.
    Quadrature,
    /// Untruncated log-normal moment `exp((k/alpha) mu + (k/alpha)^2 sigma1^2 / 2)`.
    LognormalApprox,
}

/// Continuous part of the density of `b_hat`. The atom at zero is
/// `dist.zero_mass` and is not represented here.
pub fn bhat_pdf(dist: &BhatDistribution, bhat: f64) -> Result<f64> {
    if dist.is_degenerate() {
        return Err(Error::DegenerateDistribution);
    }
    if !(bhat >= 0.0) {
        return Err(Error::invalid("bhat", format!("must be non-negative, got {bhat}")));
    }
    if bhat == 0.0 || bhat > dist.b_hat_max {
        return Ok(0.0);
    }
    Ok(density(dist, bhat))
}

fn density(dist: &BhatDistribution, x: f64) -> f64 {
    let z = (10.0 * x.log10() - dist.mu) / dist.sigma1;
    ALPHA / ((2.0 * std::f64::consts::PI).sqrt() * dist.sigma1 * x) * (-0.5 * z * z).exp()
}

/// `int g(x) f(x) dx` over the continuous part, integrated in `ln x` with
/// breakpoints spread over the bulk of the log-normal.
fn continuous_expectation<G: Fn(f64) -> f64>(dist: &BhatDistribution, g: G) -> Result<f64> {
    let centre = dist.b_o.ln();
    let sd = dist.log_sd();
    let lo = (dist.b_o * ORIGIN_CUTOFF).ln().max(centre - TAIL_SDS * sd);
    let hi = dist.b_hat_max.ln().min(centre + TAIL_SDS * sd);
    if hi <= lo {
        return Ok(0.0);
    }
    let mut points = vec![lo, hi];
    for j in [
        -16.0, -12.0, -8.0, -6.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0,
    ] {
        points.push(centre + j * sd);
    }
    // kink of integrands clamped at the domain edge
    points.push(0.0);
    points.retain(|&t| t >= lo && t <= hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    integrate_with_breaks(
        |t| {
            let x = t.exp();
            if x > dist.b_hat_max {
                0.0
            } else {
                g(x) * density(dist, x) * x
            }
        },
        &points,
        expectation_spec(),
    )
}

/// `E[g(b_hat)]` over the mixed distribution, including the atom at zero.
pub fn expectation<G: Fn(f64) -> f64>(dist: &BhatDistribution, g: G) -> Result<f64> {
    let atom = if dist.zero_mass > 0.0 {
        dist.zero_mass * g(0.0)
    } else {
        0.0
    };
    if dist.is_degenerate() {
        return Ok(atom + (1.0 - dist.zero_mass) * g(dist.b_o));
    }
    Ok(atom + continuous_expectation(dist, g)?)
}

/// Probability carried by the continuous part, by quadrature of the density.
pub fn continuous_mass(dist: &BhatDistribution) -> Result<f64> {
    if dist.is_degenerate() {
        return Ok(1.0 - dist.zero_mass);
    }
    continuous_expectation(dist, |_| 1.0)
}

/// Even non-central moment `E[b_hat^order]`.
///
/// The atom at zero only contributes to the zeroth moment, so
/// `E[b_hat^0] = 1` for the quadrature route.
pub fn bhat_moment(dist: &BhatDistribution, order: u32, method: MomentMethod) -> Result<f64> {
    if order % 2 == 1 {
        return Err(Error::invalid(
            "order",
            format!("only even moments are supported, got {order}"),
        ));
    }
    let k = f64::from(order);
    match method {
        MomentMethod::LognormalApprox => Ok(lognormal_moment(dist.b_o, dist.sigma1, order)),
        MomentMethod::Quadrature if order == 0 => Ok(1.0),
        MomentMethod::Quadrature if dist.is_degenerate() => Ok((1.0 - dist.zero_mass) * dist.b_o.powf(k)),
        MomentMethod::Quadrature => continuous_expectation(dist, |x| x.powi(order as i32)),
    }
}

/// Untruncated log-normal moment written as `b_o^k exp(sigma1^2 k^2 / (2 alpha^2))`.
fn lognormal_moment(b_o: f64, sigma1: f64, order: u32) -> f64 {
    let k = f64::from(order);
    b_o.powi(order as i32) * (sigma1 * sigma1 * k * k / (2.0 * ALPHA * ALPHA)).exp()
}

/// Conditional localization probability at coverage ratio `x`.
fn conditional_localization(net: &NetworkParams, x: f64, variant: CoefficientVariant) -> f64 {
    match variant {
        CoefficientVariant::Corrected => {
            binomial_upper_tail(u64::from(net.n() - 1), (1.0 - net.a()) * x * x, 3).unwrap_or(f64::NAN)
        }
        CoefficientVariant::Paper => 1.0 - closed_form(net.n(), net.a(), x, variant),
    }
}

fn alternating_sum(net: &NetworkParams, moments: &[f64], consts: ShadowConstants) -> f64 {
    let m = (net.n() - 3) as usize;
    let mut binom = 1.0f64;
    let mut acc = CompensatedSum::new();
    for l in 0..=m {
        if l > 0 {
            binom = binom * (m - l + 1) as f64 / l as f64;
        }
        let sign_power = (-consts.k1).powi(l as i32);
        let bracket = moments[l] + consts.k2 * moments[l + 1] + consts.k3 * moments[l + 2];
        acc.add(binom * sign_power * bracket);
    }
    acc.value()
}

/// Failure probability of an NL-node under log-normal shadowing.
pub fn failure_prob_shadow(
    net: &NetworkParams,
    dist: &BhatDistribution,
    method: ShadowFailureMethod,
    variant: CoefficientVariant,
) -> Result<FailureProbResult> {
    if dist.b_hat_max > 1.0 {
        return Err(Error::invalid(
            "b_hat_max",
            format!("coverage cannot exceed the domain, got {}", dist.b_hat_max),
        ));
    }
    match method {
        ShadowFailureMethod::IntegrateConditional => {
            let p_loc = expectation(dist, |x| {
                if x == 0.0 {
                    0.0
                } else {
                    conditional_localization(net, x, variant)
                }
            })?;
            Ok(FailureProbResult {
                p_f: 1.0 - p_loc,
                p_loc,
                method: Method::IntegrateConditional,
            })
        }
        ShadowFailureMethod::AlternatingSum => {
            if net.n() > ALTERNATING_SUM_MAX_N {
                return Err(Error::NumericallyUnstable {
                    n: net.n(),
                    max: ALTERNATING_SUM_MAX_N,
                });
            }
            let moments = (0..net.n())
                .map(|j| bhat_moment(dist, 2 * j, MomentMethod::Quadrature))
                .collect::<Result<Vec<_>>>()?;
            let p_f = alternating_sum(net, &moments, ShadowConstants::new(net, variant));
            Ok(FailureProbResult::from_failure(p_f, Method::AlternatingSum))
        }
        ShadowFailureMethod::MomentApprox => {
            if net.n() > MOMENT_APPROX_MAX_N {
                return Err(Error::OutsideValidity(format!(
                    "moment approximation needs n <= {MOMENT_APPROX_MAX_N}, got {}",
                    net.n()
                )));
            }
            let moments: Vec<f64> = (0..net.n())
                .map(|j| lognormal_moment(dist.b_o, dist.sigma1, 2 * j))
                .collect();
            let p_f = alternating_sum(net, &moments, ShadowConstants::new(net, variant));
            Ok(FailureProbResult::from_failure(p_f, Method::MomentApprox))
        }
    }
}

/// Shadowed failure probability without a detection threshold: coverage
/// ratio `min(b_o Y, 1)` with no atom at zero.
pub fn failure_prob_shadow_no_threshold(
    net: &NetworkParams,
    b_o: f64,
    sigma1: f64,
    variant: CoefficientVariant,
) -> Result<FailureProbResult> {
    let dist = BhatDistribution::new(b_o, sigma1, f64::INFINITY)?;
    let p_loc = expectation(&dist, |x| conditional_localization(net, x.min(1.0), variant))?;
    Ok(FailureProbResult {
        p_f: 1.0 - p_loc,
        p_loc,
        method: Method::IntegrateConditional,
    })
}
