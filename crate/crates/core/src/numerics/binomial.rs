//! Binomial coefficients and probabilities in the log domain.
//!
//! Probability masses use Loader's saddle-point expansion
//! (`stirlerr` / `bd0`), which keeps full relative precision for thousands
//! of trials where `ln C(n, k)` built from log-gamma differences loses
//! several digits to cancellation.

use statrs::function::gamma::ln_gamma;

use super::CompensatedSum;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln C(n, k)`.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::invalid("k", format!("must not exceed n = {n}, got {k}")));
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    // Log-gamma differences cancel badly when one factor is small, so sum
    // the ratio form directly there.
    if k <= 64 {
        let base = (n - k) as f64;
        let mut acc = CompensatedSum::new();
        for i in 1..=k {
            acc.add(((base + i as f64) / i as f64).ln());
        }
        return Ok(acc.value());
    }
    let (n, k) = (n as f64, k as f64);
    Ok(ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0))
}

/// `ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)]`, integer `n` only.
fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    // stirlerr(n) for n = 0..=15
    #[allow(clippy::excessive_precision)]
    const TABLE: [f64; 16] = [
        0.0,
        0.081_061_466_795_327_258_219_670_2,
        0.041_340_695_955_409_294_093_822_1,
        0.027_677_925_684_998_339_148_789_29,
        0.020_790_672_103_765_093_111_522_77,
        0.016_644_691_189_821_192_163_194_87,
        0.013_876_128_823_070_747_998_745_73,
        0.011_896_709_945_891_770_095_055_72,
        0.010_411_265_261_972_096_497_478_567,
        0.009_255_462_182_712_732_917_728_637,
        0.008_330_563_433_362_871_256_469_318,
        0.007_573_675_487_951_840_794_972_024,
        0.006_942_840_107_209_529_865_664_152,
        0.006_408_994_188_004_207_068_439_631,
        0.005_951_370_112_758_847_735_624_416,
        0.005_554_733_551_962_801_371_038_690,
    ];
    if n <= 15 {
        return TABLE[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation
/// when `x` is close to `np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let next = s + ej / f64::from(2 * j + 1);
            if next == s {
                return next;
            }
            s = next;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

/// `ln P(X = x)` for `X ~ Binomial(trials, p)`, with `q = 1 - p` passed
/// separately so callers can supply it without rounding.
pub fn ln_binomial_pmf(x: u64, trials: u64, p: f64, q: f64) -> f64 {
    if x > trials {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == trials { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = trials as f64;
    if x == 0 {
        if trials == 0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
    }
    if x == trials {
        return if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
    }
    let xf = x as f64;
    let lc = stirlerr(trials) - stirlerr(x) - stirlerr(trials - x) - bd0(xf, n * p) - bd0(n - xf, n * q);
    let lf = LN_2PI + xf.ln() + (-xf / n).ln_1p();
    lc - 0.5 * lf
}

pub fn binomial_pmf(x: u64, trials: u64, p: f64) -> f64 {
    ln_binomial_pmf(x, trials, p, 1.0 - p).exp()
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid("p", format!("probability must lie in [0, 1], got {p}")))
    }
}

/// `P(X <= k)` for `X ~ Binomial(trials, p)`.
pub fn binomial_cdf(trials: u64, p: f64, k: u64) -> Result<f64> {
    check_probability(p)?;
    if k >= trials {
        return Ok(1.0);
    }
    let q = 1.0 - p;
    if k <= trials / 2 {
        return Ok(compensated_sum_pmf(0..=k, trials, p, q).min(1.0));
    }
    Ok((1.0 - compensated_sum_pmf(k + 1..=trials, trials, p, q)).max(0.0))
}

/// `P(X >= k)` for `X ~ Binomial(trials, p)`, accurate when tiny.
pub fn binomial_upper_tail(trials: u64, p: f64, k: u64) -> Result<f64> {
    check_probability(p)?;
    if k == 0 {
        return Ok(1.0);
    }
    if k > trials {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let lower = compensated_sum_pmf(0..k, trials, p, q);
    if lower <= 0.5 {
        return Ok((1.0 - lower).max(0.0));
    }
    // The mode lies below k, so terms decrease from here on.
    let mut acc = CompensatedSum::new();
    for x in k..=trials {
        let term = ln_binomial_pmf(x, trials, p, q).exp();
        acc.add(term);
        if term <= acc.value() * 1e-18 {
            break;
        }
    }
    Ok(acc.value().min(1.0))
}

fn compensated_sum_pmf(range: impl Iterator<Item = u64>, trials: u64, p: f64, q: f64) -> f64 {
    range
        .map(|x| ln_binomial_pmf(x, trials, p, q).exp())
        .collect::<CompensatedSum>()
        .value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_binomial(n: u64, k: u64) -> f64 {
        // Integer recurrence is exact while the result fits in u128.
        let k = k.min(n - k);
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * u128::from(n - i) / u128::from(i + 1);
        }
        c as f64
    }

    #[test]
    fn small_coefficients() {
        assert!((log_binomial(3, 2).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(log_binomial(17, 0).unwrap(), 0.0);
        assert_eq!(log_binomial(17, 17).unwrap(), 0.0);
        assert!(log_binomial(3, 4).is_err());
    }

    #[test]
    fn moderate_coefficients_match_integers() {
        for (n, k) in [(60, 30), (100, 7), (120, 60), (100, 65)] {
            let exact = exact_binomial(n, k).ln();
            let got = log_binomial(n, k).unwrap();
            assert!(((got - exact) / exact).abs() < 1e-13, "C({n},{k}): {got} vs {exact}");
        }
    }

    #[test]
    fn stirlerr_table_matches_series_boundary() {
        // Series value at n = 16 against the log-gamma definition.
        let n = 16.0f64;
        let direct = ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - 0.5 * LN_2PI;
        assert!((stirlerr(16) - direct).abs() < 1e-13);
        let n = 15.0f64;
        let direct = ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - 0.5 * LN_2PI;
        assert!((stirlerr(15) - direct).abs() < 1e-13);
    }

    #[test]
    fn pmf_matches_direct_product() {
        let (n, p) = (20u64, 0.3f64);
        for x in 0..=n {
            let direct = exact_binomial(n, x) * p.powi(x as i32) * (1.0 - p).powi((n - x) as i32);
            let got = binomial_pmf(x, n, p);
            assert!(((got - direct) / direct).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn pmf_sums_to_one_for_large_n() {
        let n = 3000;
        let total: f64 = compensated_sum_pmf(0..=n, n, 0.0098, 1.0 - 0.0098);
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(binomial_pmf(0, 5, 0.0), 1.0);
        assert_eq!(binomial_pmf(5, 5, 1.0), 1.0);
        assert_eq!(binomial_pmf(2, 5, 1.0), 0.0);
        assert_eq!(binomial_cdf(3, 0.5, 2).unwrap(), 0.875);
        assert!((binomial_upper_tail(3, 0.5, 3).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(binomial_upper_tail(2, 0.9, 3).unwrap(), 0.0);
    }

    #[test]
    fn tiny_upper_tail_keeps_precision() {
        // P(X >= 3) ~ C(49,3) p^3 for tiny p
        let p = 1e-6f64;
        let tail = binomial_upper_tail(49, p, 3).unwrap();
        let lead = 18424.0 * p.powi(3) * (1.0 - p).powi(46);
        assert!(((tail - lead) / lead).abs() < 1e-4);
    }
}
