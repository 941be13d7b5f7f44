//! Domain types shared by the analytic, shadowing and simulation code.
//!
//! Every type here is validated at construction and immutable afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::normal_lower_tail;

/// Smallest network the counting argument supports.
pub const MIN_NODES: u32 = 4;

/// `10 / ln 10`, the factor between natural-log and decibel scales.
pub const ALPHA: f64 = 10.0 / std::f64::consts::LN_10;

/// Node counts of a network: `n` nodes in total, `k` of them L-nodes
/// (positions known), the remaining fraction `a = 1 - k/n` NL-nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    n: u32,
    k: u32,
    a: f64,
}

impl NetworkParams {
    pub fn new(n: u32, k: u32) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::TooFewNodes { n, min: MIN_NODES });
        }
        if k > n {
            return Err(Error::invalid("k", format!("must lie in [0, n = {n}], got {k}")));
        }
        Ok(Self {
            n,
            k,
            a: f64::from(n - k) / f64::from(n),
        })
    }

    /// Network described by its NL-fraction directly.
    ///
    /// The closed forms are polynomials in `a` and are evaluated at `a` as
    /// given; `k` is the nearest integer count, used only by the simulator.
    pub fn with_fraction(n: u32, a: f64) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::TooFewNodes { n, min: MIN_NODES });
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::invalid("a", format!("must lie in [0, 1], got {a}")));
        }
        let k = ((1.0 - a) * f64::from(n)).round() as u32;
        Ok(Self { n, k: k.min(n), a })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Fraction of NL-nodes.
    pub fn a(&self) -> f64 {
        self.a
    }
}

/// Radio coverage geometry: domain radius `R`, coverage radius `d`, `b = d/R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageParams {
    domain_radius: f64,
    coverage_radius: f64,
    b: f64,
}

impl CoverageParams {
    pub fn new(domain_radius: f64, coverage_radius: f64) -> Result<Self> {
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(Error::invalid("R", format!("must be positive, got {domain_radius}")));
        }
        if !(coverage_radius >= 0.0) {
            return Err(Error::invalid(
                "d",
                format!("must be non-negative, got {coverage_radius}"),
            ));
        }
        let b = coverage_radius / domain_radius;
        check_ratio("b", b)?;
        Ok(Self {
            domain_radius,
            coverage_radius,
            b,
        })
    }

    /// Coverage on the unit-radius domain.
    pub fn from_ratio(b: f64) -> Result<Self> {
        check_ratio("b", b)?;
        Ok(Self {
            domain_radius: 1.0,
            coverage_radius: b,
            b,
        })
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn coverage_radius(&self) -> f64 {
        self.coverage_radius
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

pub(crate) fn check_ratio(field: &'static str, b: f64) -> Result<()> {
    if (0.0..=1.0).contains(&b) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("ratio must lie in [0, 1], got {b}")))
    }
}

/// Log-normal shadowing propagation constants.
///
/// Received power at distance `t` is `P0 - 10 n_p log10(t / d0) + X_s`
/// with `X_s ~ N(0, sigma_s^2)`; a link is detectable while the power stays
/// above `gamma`. Powers are in dBm, lengths in the same unit as `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowModel {
    pub p0_dbm: f64,
    pub gamma_dbm: f64,
    pub d0: f64,
    pub n_p: f64,
    pub sigma_s: f64,
    pub domain_radius: f64,
    /// `sigma_s / n_p`, the spread of the distance estimate in dB.
    pub sigma1: f64,
    /// Largest measurable estimated distance, same unit as `d0`.
    pub d_hat_max: f64,
    /// `d_hat_max / R`.
    pub b_hat_max: f64,
}

impl ShadowModel {
    pub fn new(p0_dbm: f64, gamma_dbm: f64, d0: f64, n_p: f64, sigma_s: f64, domain_radius: f64) -> Result<Self> {
        if !(n_p > 0.0 && n_p.is_finite()) {
            return Err(Error::invalid("n_p", format!("must be positive, got {n_p}")));
        }
        if !(d0 > 0.0 && d0.is_finite()) {
            return Err(Error::invalid("d0", format!("must be positive, got {d0}")));
        }
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(Error::invalid("R", format!("must be positive, got {domain_radius}")));
        }
        if !(sigma_s >= 0.0 && sigma_s.is_finite()) {
            return Err(Error::invalid(
                "sigma_s",
                format!("must be non-negative, got {sigma_s}"),
            ));
        }
        if !(p0_dbm.is_finite() && gamma_dbm.is_finite()) {
            return Err(Error::invalid("gamma_dbm", "powers must be finite"));
        }
        // The exponent yields a distance in multiples of d0.
        let d_hat_max = d0 * 10f64.powf((p0_dbm - gamma_dbm) / (10.0 * n_p));
        let b_hat_max = d_hat_max / domain_radius;
        if b_hat_max >= 1.0 {
            return Err(Error::invalid(
                "gamma_dbm",
                format!("maximum estimated range ratio d_hat_max/R = {b_hat_max:.4} must be < 1"),
            ));
        }
        Ok(Self {
            p0_dbm,
            gamma_dbm,
            d0,
            n_p,
            sigma_s,
            domain_radius,
            sigma1: sigma_s / n_p,
            d_hat_max,
            b_hat_max,
        })
    }

    /// Distribution of the estimated coverage ratio for a node whose true
    /// coverage radius is `d`.
    pub fn bhat_distribution(&self, d: f64) -> Result<BhatDistribution> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid("d", format!("must be positive, got {d}")));
        }
        BhatDistribution::new(d / self.domain_radius, self.sigma1, self.b_hat_max)
    }
}

/// Mixed distribution of the estimated coverage ratio `b_hat = b_o * Y`,
/// `Y = 10^(-X_1/10)`, `X_1 ~ N(0, sigma1^2)`.
///
/// Estimates beyond `b_hat_max` are undetectable and collapse onto an atom
/// at zero of weight `zero_mass`; the rest is a log-normal density on
/// `(0, b_hat_max]`. With `sigma1 == 0` the distribution is a single atom,
/// see [`BhatDistribution::is_degenerate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BhatDistribution {
    pub b_o: f64,
    pub sigma1: f64,
    pub b_hat_max: f64,
    pub zero_mass: f64,
    /// `10 log10(b_o)`, the mean of `10 log10(b_hat)` before truncation.
    pub mu: f64,
}

impl BhatDistribution {
    /// `b_hat_max` may be `+inf` for the untruncated distribution.
    pub fn new(b_o: f64, sigma1: f64, b_hat_max: f64) -> Result<Self> {
        if !(b_o > 0.0 && b_o.is_finite()) {
            return Err(Error::invalid("b_o", format!("must be positive, got {b_o}")));
        }
        if !(sigma1 >= 0.0 && sigma1.is_finite()) {
            return Err(Error::invalid("sigma1", format!("must be non-negative, got {sigma1}")));
        }
        if !(b_hat_max > 0.0) {
            return Err(Error::invalid(
                "b_hat_max",
                format!("must be positive, got {b_hat_max}"),
            ));
        }
        let zero_mass = if sigma1 == 0.0 {
            if b_o > b_hat_max {
                1.0
            } else {
                0.0
            }
        } else {
            normal_lower_tail(-10.0 * (b_hat_max / b_o).log10() / sigma1)
        };
        Ok(Self {
            b_o,
            sigma1,
            b_hat_max,
            zero_mass,
            mu: 10.0 * b_o.log10(),
        })
    }

    /// No shadowing spread: all mass sits on `b_o` (or on zero when
    /// `b_o > b_hat_max`).
    pub fn is_degenerate(&self) -> bool {
        self.sigma1 == 0.0
    }

    /// Standard deviation of `ln(b_hat)` before truncation.
    pub fn log_sd(&self) -> f64 {
        self.sigma1 / ALPHA
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_fraction() {
        let net = NetworkParams::new(300, 240).unwrap();
        assert_eq!(net.a(), 0.2);
        let net = NetworkParams::new(50, 10).unwrap();
        assert_eq!(net.a(), 0.8);
        assert_eq!(NetworkParams::new(4, 4).unwrap().a(), 0.0);
        assert_eq!(NetworkParams::new(4, 0).unwrap().a(), 1.0);
    }

    #[test]
    fn network_rejects_bad_counts() {
        let err = NetworkParams::new(3, 1).unwrap_err();
        assert!(err.to_string().contains("n too small"), "{err}");
        assert!(matches!(
            NetworkParams::new(10, 11),
            Err(Error::InvalidParameter { field: "k", .. })
        ));
        assert!(NetworkParams::with_fraction(10, 1.5).is_err());
    }

    #[test]
    fn fraction_rounds_k() {
        let net = NetworkParams::with_fraction(3000, 0.05).unwrap();
        assert_eq!(net.k(), 2850);
        assert_eq!(net.a(), 0.05);
    }

    #[test]
    fn coverage_ratio() {
        let c = CoverageParams::new(40.0, 10.0).unwrap();
        assert_eq!(c.b(), 0.25);
        assert_eq!(CoverageParams::from_ratio(1.0).unwrap().b(), 1.0);
        assert!(CoverageParams::new(1.0, 2.0).is_err());
        assert!(CoverageParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn worked_shadow_example() {
        let m = ShadowModel::new(0.0, -80.0, 0.1, 3.5, 12.0, 40.0).unwrap();
        assert!((m.sigma1 - 3.43).abs() < 0.005);
        assert!((m.d_hat_max - 19.3).abs() < 0.05);
        assert!((m.b_hat_max - 0.48).abs() < 0.005);
        let short = ShadowModel::new(0.0, -80.0, 0.1, 3.5, 12.0, 10.0);
        assert!(matches!(short, Err(Error::InvalidParameter { field: "gamma_dbm", .. })));
    }

    #[test]
    fn threshold_at_reference_power() {
        let m = ShadowModel::new(-40.0, -40.0, 0.25, 2.0, 4.0, 10.0).unwrap();
        assert_eq!(m.d_hat_max, 0.25);
    }

    #[test]
    fn shadow_model_rejects_bad_constants() {
        assert!(ShadowModel::new(0.0, -80.0, 0.1, 0.0, 12.0, 40.0).is_err());
        assert!(ShadowModel::new(0.0, -80.0, -0.1, 3.5, 12.0, 40.0).is_err());
        assert!(ShadowModel::new(0.0, -80.0, 0.1, 3.5, 12.0, 0.0).is_err());
        assert!(ShadowModel::new(0.0, -80.0, 0.1, 3.5, -1.0, 40.0).is_err());
    }

    #[test]
    fn scale_consistent() {
        let m1 = ShadowModel::new(0.0, -80.0, 0.1, 3.5, 12.0, 40.0).unwrap();
        let m2 = ShadowModel::new(0.0, -80.0, 0.2, 3.5, 12.0, 80.0).unwrap();
        assert!((m1.b_hat_max - m2.b_hat_max).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_at_truncation_is_half() {
        let d = BhatDistribution::new(0.48, 3.43, 0.48).unwrap();
        assert!((d.zero_mass - 0.5).abs() < 1e-15);
        let d = BhatDistribution::new(0.01, 0.5, 0.48).unwrap();
        assert!(d.zero_mass < 1e-200);
    }

    #[test]
    fn degenerate_zero_mass() {
        let inside = BhatDistribution::new(0.2, 0.0, 0.48).unwrap();
        assert!(inside.is_degenerate());
        assert_eq!(inside.zero_mass, 0.0);
        let outside = BhatDistribution::new(0.5, 0.0, 0.48).unwrap();
        assert_eq!(outside.zero_mass, 1.0);
    }

    #[test]
    fn bhat_from_model() {
        let m = ShadowModel::new(0.0, -80.0, 0.1, 3.5, 12.0, 40.0).unwrap();
        let dist = m.bhat_distribution(8.0).unwrap();
        assert!((dist.b_o - 0.2).abs() < 1e-15);
        assert!((dist.mu - 10.0 * 0.2f64.log10()).abs() < 1e-15);
        assert!(m.bhat_distribution(0.0).is_err());
    }
}
