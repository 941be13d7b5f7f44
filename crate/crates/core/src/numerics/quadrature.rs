//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

#![allow(clippy::excessive_precision)]

use serde::{Deserialize, Serialize};

use super::CompensatedSum;
use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1]; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Over any evaluation, at most this many subintervals are kept.
const MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Target for the summed error estimate.
    pub abs_tol: f64,
    /// Maximum number of bisections applied to any one subinterval.
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            max_depth: 60,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid(
                "abs_tol",
                format!("must be positive, got {}", self.abs_tol),
            ));
        }
        if self.max_depth < 1 {
            return Err(Error::invalid("max_depth", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    depth: u32,
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, depth: u32) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    if !value.is_finite() {
        return Err(Error::invalid("integrand", format!("non-finite value on [{lo}, {hi}]")));
    }
    Ok(Segment {
        lo,
        hi,
        value,
        error: ((kronrod - gauss) * half).abs(),
        depth,
    })
}

/// Integral of `f` over `[lo, hi]`.
///
/// Subintervals are bisected worst-first until the summed error estimate
/// drops below `spec.abs_tol`. Hitting `max_depth` on the interval that
/// still needs refinement is reported as [`Error::NonConvergence`].
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: QuadratureSpec) -> Result<f64> {
    integrate_with_breaks(f, &[lo, hi], spec)
}

/// Like [`integrate`], but starts from the partition given by `points`
/// (ascending; the first and last are the limits). Placing breakpoints at
/// known features of the integrand lets the first pass see them.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], spec: QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if points.len() < 2 {
        return Err(Error::invalid("points", "need at least the two limits"));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("points", "limits must be finite"));
    }
    if points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("points", "limits must be ascending"));
    }
    let mut segments = Vec::with_capacity(64);
    for w in points.windows(2) {
        if w[1] > w[0] {
            segments.push(gauss_kronrod(&f, w[0], w[1], 0)?);
        }
    }
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= spec.abs_tol {
            return Ok(segments.iter().map(|s| s.value).collect::<CompensatedSum>().value());
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment while error is positive");
        let seg = segments[worst];
        let mid = 0.5 * (seg.lo + seg.hi);
        if seg.depth >= spec.max_depth || segments.len() >= MAX_INTERVALS || mid <= seg.lo || mid >= seg.hi {
            return Err(Error::NonConvergence {
                error: total_error,
                tolerance: spec.abs_tol,
            });
        }
        segments[worst] = gauss_kronrod(&f, seg.lo, mid, seg.depth + 1)?;
        segments.push(gauss_kronrod(&f, mid, seg.hi, seg.depth + 1)?);
    }
}
