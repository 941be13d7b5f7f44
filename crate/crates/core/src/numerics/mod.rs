//! Numerical kernels: log-domain binomial combinatorics, the Gaussian tail,
//! adaptive quadrature, finite differences and bisection.
//!
//! Everything here is a pure function; callables passed in must be free of
//! side effects so the routines stay re-entrant.

mod binomial;
mod quadrature;

pub use binomial::{binomial_cdf, binomial_pmf, binomial_upper_tail, ln_binomial_pmf, log_binomial};
pub use quadrature::{integrate, integrate_with_breaks, QuadratureSpec};

use crate::error::{Error, Result};

/// Standard normal CDF `Phi(z)`.
pub fn normal_lower_tail(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Central second difference `(f(x+h) - 2 f(x) + f(x-h)) / h^2`.
pub fn second_derivative_fd<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("step must be positive, got {h}")));
    }
    Ok((f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h))
}

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `tol`. Returns the bracket midpoint.
pub fn find_sign_change<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.signum() != f_hi.signum()) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson on a fine grid, independent of the adaptive code.
    fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
        let h = (hi - lo) / panels as f64;
        let mut acc = CompensatedSum::new();
        for i in 0..=panels {
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc.add(w * f(lo + i as f64 * h));
        }
        acc.value() * h / 3.0
    }

    #[test]
    fn normal_tail_limits() {
        assert_eq!(normal_lower_tail(0.0), 0.5);
        assert_eq!(normal_lower_tail(f64::INFINITY), 1.0);
        assert_eq!(normal_lower_tail(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn normal_tail_matches_simpson() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        // Phi(1) = 1/2 + int_0^1 phi
        let oracle = 0.5 + simpson(phi, 0.0, 1.0, 20_000);
        assert!((normal_lower_tail(1.0) - oracle).abs() < 1e-10);
        let oracle = 0.5 - simpson(phi, 0.0, 2.5, 20_000);
        assert!((normal_lower_tail(-2.5) - oracle).abs() < 1e-10);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1.0];
        values.extend(std::iter::repeat_n(1e-16, 10_000));
        values.push(-1.0);
        assert!((compensated_sum(values) - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn fd_second_derivative_of_square() {
        let d2 = second_derivative_fd(|x| x * x, 0.7, 1e-4).unwrap();
        assert!((d2 - 2.0).abs() < 1e-6);
        assert!(second_derivative_fd(|x| x, 0.0, 0.0).is_err());
    }

    #[test]
    fn root_of_cubic_curvature() {
        let d2 = |x: f64| second_derivative_fd(|t| t * t * t, x, 1e-4).unwrap();
        let root = find_sign_change(d2, -0.37, 0.81, 1e-9).unwrap();
        assert!(root.abs() < 1e-8, "{root}");
    }

    #[test]
    fn bisection_requires_bracket() {
        let err = find_sign_change(|x| x * x + 1.0, -1.0, 1.0, 1e-6).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }
}
