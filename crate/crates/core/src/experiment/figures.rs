//! Curve families behind each published figure, plus the qualitative
//! properties each one is expected to show.

use std::fmt;
use std::str::FromStr;

use super::{
    analytic_cells, provenance, shadow_row, theory, Cell, ExperimentConfig, Table, ANALYTIC_COLUMNS, SHADOW_COLUMNS,
    SIMULATION_COLUMNS,
};
use crate::analytic::{threshold_a_numeric, threshold_a_star, threshold_b_numeric, threshold_b_star, BStarForm};
use crate::error::{Error, Result};
use crate::model::{BhatDistribution, NetworkParams};
use crate::montecarlo::{estimate_with, Probe, RunOptions, ShadowDraw, DEFAULT_TRIALS};
use crate::shadowing::ShadowFailureMethod;

/// Node count of the fixed-coverage figures.
pub const FIGURE_N: u32 = 300;
pub const FIG6_B: f64 = 0.05;
pub const FIG6_N: [u32; 3] = [500, 1000, 3000];
pub const FIGURES: [&str; 6] = ["fig1", "fig2", "fig3", "fig4", "fig6", "fig_shadow"];

/// Slack for monotonicity checks on analytic curves.
const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureName {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig6,
    FigShadow,
}

impl FigureName {
    pub fn as_str(&self) -> &'static str {
        match self {
            FigureName::Fig1 => "fig1",
            FigureName::Fig2 => "fig2",
            FigureName::Fig3 => "fig3",
            FigureName::Fig4 => "fig4",
            FigureName::Fig6 => "fig6",
            FigureName::FigShadow => "fig_shadow",
        }
    }
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(FigureName::Fig1),
            "fig2" => Ok(FigureName::Fig2),
            "fig3" => Ok(FigureName::Fig3),
            "fig4" => Ok(FigureName::Fig4),
            "fig6" => Ok(FigureName::Fig6),
            "fig_shadow" => Ok(FigureName::FigShadow),
            other => Err(Error::UnknownFigure(other.to_string())),
        }
    }
}

/// A figure table and the caption properties it violates, if any.
#[derive(Debug, Clone)]
pub struct FigureOutput {
    pub table: Table,
    pub violations: Vec<String>,
}

/// `2^(j/22) - 1`, the geometric grid of the family parameters.
pub fn family_value(j: u32) -> f64 {
    2f64.powf(f64::from(j) / 22.0) - 1.0
}

/// Curve parameters `b(j)` with `j = 3..=20`.
pub fn fig1_b_values() -> Vec<f64> {
    (3..=20).map(family_value).collect()
}

/// Curve parameters `a(j)` with `j = 1..=20`.
pub fn fig3_a_values() -> Vec<f64> {
    (1..=20).map(family_value).collect()
}

/// NL-fraction grid of the simulated figure, `0.05..=0.95`.
pub fn fig6_a_values() -> Vec<f64> {
    (1..=19).map(|i| f64::from(i) / 20.0).collect()
}

/// `count + 1` evenly spaced points over `[lo, hi]`.
fn steps(lo: f64, hi: f64, count: u32) -> Vec<f64> {
    (0..=count)
        .map(|i| lo + (hi - lo) * f64::from(i) / f64::from(count))
        .collect()
}

pub fn run_figure(name: FigureName, config: &ExperimentConfig, options: RunOptions) -> Result<FigureOutput> {
    let mut effective = config.clone();
    effective.mode = super::Mode::Figure;
    effective.figure = Some(name.to_string());
    let mut out = match name {
        FigureName::Fig1 => fig1(&effective)?,
        FigureName::Fig2 => fig2()?,
        FigureName::Fig3 => fig3(&effective)?,
        FigureName::Fig4 => fig4()?,
        FigureName::Fig6 => {
            effective.trials = Some(effective.trials.unwrap_or(DEFAULT_TRIALS));
            effective.seed = Some(effective.seed());
            effective.protocol = Some(effective.protocol.unwrap_or(Probe::AllNlNodes));
            fig6(&effective, options)?
        }
        FigureName::FigShadow => fig_shadow(&effective)?,
    };
    out.table.comment = provenance(&effective);
    Ok(out)
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL)
}

fn non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - MONOTONE_TOL)
}

/// `grid[family][point]` of localization probabilities, checked along both
/// axes.
fn check_surface(
    grid: &[Vec<f64>],
    along_points_increasing: bool,
    across_families_increasing: bool,
    family: &str,
    point: &str,
    violations: &mut Vec<String>,
) {
    for (i, curve) in grid.iter().enumerate() {
        let ok = if along_points_increasing {
            non_decreasing(curve)
        } else {
            non_increasing(curve)
        };
        if !ok {
            violations.push(format!("p_loc not monotone in {point} for {family} #{i}"));
        }
    }
    for p in 0..grid.first().map_or(0, Vec::len) {
        let column: Vec<f64> = grid.iter().map(|c| c[p]).collect();
        let ok = if across_families_increasing {
            non_decreasing(&column)
        } else {
            non_increasing(&column)
        };
        if !ok {
            violations.push(format!("p_loc not monotone in {family} at {point} #{p}"));
        }
    }
}

fn fig1(config: &ExperimentConfig) -> Result<FigureOutput> {
    let mut table = Table::new(&ANALYTIC_COLUMNS);
    let mut grid = Vec::new();
    for b in fig1_b_values() {
        let mut curve = Vec::new();
        for a in steps(0.0, 1.0, 100) {
            let net = NetworkParams::with_fraction(FIGURE_N, a)?;
            let r = theory(&net, b, config.variant)?;
            curve.push(r.p_loc);
            table.push(analytic_cells(&net, b, &r, config.variant));
        }
        grid.push(curve);
    }
    let mut violations = Vec::new();
    check_surface(&grid, false, true, "b", "a", &mut violations);
    Ok(FigureOutput { table, violations })
}

fn fig3(config: &ExperimentConfig) -> Result<FigureOutput> {
    let mut table = Table::new(&ANALYTIC_COLUMNS);
    let mut grid = Vec::new();
    for a in fig3_a_values() {
        let net = NetworkParams::with_fraction(FIGURE_N, a)?;
        let mut curve = Vec::new();
        for b in steps(0.0, 1.0, 100) {
            let r = theory(&net, b, config.variant)?;
            curve.push(r.p_loc);
            table.push(analytic_cells(&net, b, &r, config.variant));
        }
        grid.push(curve);
    }
    let mut violations = Vec::new();
    check_surface(&grid, true, false, "a", "b", &mut violations);
    Ok(FigureOutput { table, violations })
}

fn fig2() -> Result<FigureOutput> {
    let mut table = Table::new(&["n", "b", "a_star_closed", "a_star_numeric"]);
    let mut violations = Vec::new();
    let mut closed_curve = Vec::new();
    for b in steps(0.0, 1.0, 200).into_iter().skip(1) {
        let closed = threshold_a_star(FIGURE_N, b)?;
        let numeric = match closed {
            Some(_) => threshold_a_numeric(FIGURE_N, b).ok(),
            None => None,
        };
        if let (Some(c), Some(x)) = (closed, numeric) {
            if (c - x).abs() > 1e-3 {
                violations.push(format!("a* at b={b}: closed {c} vs numeric {x}"));
            }
        }
        if let Some(c) = closed {
            closed_curve.push(c);
        }
        table.push(vec![FIGURE_N.into(), b.into(), closed.into(), numeric.into()]);
    }
    if !non_decreasing(&closed_curve) {
        violations.push("a* not monotone in b".to_string());
    }
    let at = |b: f64| threshold_a_star(FIGURE_N, b).map(|v| v.unwrap_or(0.0));
    let (low, mid, top) = (at(0.1)?, at(0.2)?, at(1.0)?);
    if mid - low <= 2.0 * (top - mid) {
        violations.push(format!("no rapid growth of a*: {low} -> {mid} -> {top}"));
    }
    Ok(FigureOutput { table, violations })
}

fn fig4() -> Result<FigureOutput> {
    let mut table = Table::new(&[
        "n",
        "a",
        "b_star_exact",
        "b_star_large_n",
        "b_star_numeric",
        "b_star_gap",
    ]);
    let mut violations = Vec::new();
    let (mut exact_curve, mut numeric_curve) = (Vec::new(), Vec::new());
    for a in steps(0.0, 0.99, 99) {
        let exact = threshold_b_star(FIGURE_N, a, BStarForm::Exact)?;
        let large = threshold_b_star(FIGURE_N, a, BStarForm::LargeN)?;
        let numeric = threshold_b_numeric(FIGURE_N, a)?;
        exact_curve.push(exact);
        numeric_curve.push(numeric);
        table.push(vec![
            FIGURE_N.into(),
            a.into(),
            exact.into(),
            large.into(),
            numeric.into(),
            (numeric - exact).into(),
        ]);
    }
    if !non_decreasing(&exact_curve) || !non_decreasing(&numeric_curve) {
        violations.push("b* not monotone in a".to_string());
    }
    Ok(FigureOutput { table, violations })
}

/// Mean of the second differences of `values`.
pub fn mean_second_difference(values: &[f64]) -> f64 {
    let d2: Vec<f64> = values.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    d2.iter().sum::<f64>() / d2.len() as f64
}

fn fig6(config: &ExperimentConfig, options: RunOptions) -> Result<FigureOutput> {
    let protocol = config.trial_protocol();
    if protocol.shadow_draw != ShadowDraw::None {
        return Err(Error::invalid("shadow_draw", "fig6 is a fixed-coverage figure"));
    }
    let trials = config.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = config.seed();
    let mut table = Table::new(&[&ANALYTIC_COLUMNS[..], &SIMULATION_COLUMNS[..]].concat());
    let mut violations = Vec::new();
    for n in FIG6_N {
        let mut curve = Vec::new();
        for a in fig6_a_values() {
            let net = NetworkParams::with_fraction(n, a)?;
            let est = estimate_with(&net, FIG6_B, &protocol, None, trials, seed, options)?;
            let expected = theory(&net, FIG6_B, config.variant)?;
            if est.p_hat > expected.p_loc + 3.0 * est.std_error() {
                violations.push(format!(
                    "n={n} a={a}: simulation {} above theory {}",
                    est.p_hat, expected.p_loc
                ));
            }
            curve.push(est.p_hat);
            table.push(vec![
                n.into(),
                net.k().into(),
                a.into(),
                FIG6_B.into(),
                (1.0 - est.p_hat).into(),
                est.p_hat.into(),
                "monte_carlo".into(),
                config.variant.as_str().into(),
                expected.p_loc.into(),
                est.realizations.into(),
                est.trials.into(),
                est.successes.into(),
                est.ci_low.into(),
                est.ci_high.into(),
                est.seed.into(),
                protocol.name().into(),
            ]);
        }
        let curvature = mean_second_difference(&curve);
        match n {
            500 if curvature <= 0.0 => {
                violations.push(format!("n=500 curve not convex (mean second difference {curvature})"))
            }
            3000 if curvature >= 0.0 => {
                violations.push(format!("n=3000 curve not concave (mean second difference {curvature})"))
            }
            _ => {}
        }
    }
    Ok(FigureOutput { table, violations })
}

/// The two shadowing series: the worked example's node counts and the
/// caption's NL-fraction.
pub fn fig_shadow_series() -> Result<Vec<(&'static str, NetworkParams)>> {
    Ok(vec![
        ("n50_k10", NetworkParams::new(50, 10)?),
        ("n50_a0.2", NetworkParams::new(50, 40)?),
    ])
}

/// `b_o` grid `0.01..=0.48`, inside `(0, b_hat_max)` of the default model.
pub fn fig_shadow_b_values() -> Vec<f64> {
    (1..=48).map(|i| f64::from(i) / 100.0).collect()
}

/// Whether `shadowed - plain` starts positive, ends negative and changes
/// sign at least once.
pub fn crossing_holds(shadowed: &[f64], plain: &[f64]) -> bool {
    let diff: Vec<f64> = shadowed.iter().zip(plain).map(|(s, p)| s - p).collect();
    let changes = diff.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    matches!((diff.first(), diff.last()), (Some(&lo), Some(&hi)) if lo > 0.0 && hi < 0.0) && changes >= 1
}

fn fig_shadow(config: &ExperimentConfig) -> Result<FigureOutput> {
    let model = config.shadow_inputs().model()?;
    let method = config.method.unwrap_or(ShadowFailureMethod::IntegrateConditional);
    let header = [
        &["series"][..],
        &ANALYTIC_COLUMNS[..],
        &SHADOW_COLUMNS[..],
        &["p_loc_no_shadow", "p_loc_no_threshold"],
    ]
    .concat();
    let mut table = Table::new(&header);
    let mut violations = Vec::new();
    for (series, net) in fig_shadow_series()? {
        let (mut shadowed, mut plain) = (Vec::new(), Vec::new());
        for b_o in fig_shadow_b_values().into_iter().filter(|&b| b < model.b_hat_max) {
            let dist = BhatDistribution::new(b_o, model.sigma1, model.b_hat_max)?;
            let mut row = vec![Cell::from(series)];
            row.extend(shadow_row(&net, &dist, method, config.variant)?);
            let at = |name: &str| {
                row[header.iter().position(|h| *h == name).expect("column")]
                    .as_f64()
                    .expect("number")
            };
            shadowed.push(at("p_loc"));
            plain.push(at("p_loc_no_shadow"));
            table.push(row);
        }
        if !crossing_holds(&shadowed, &plain) {
            violations.push(format!("{series}: shadowed curve does not cross the unshadowed one"));
        }
    }
    Ok(FigureOutput { table, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_grid_endpoints() {
        let b = fig1_b_values();
        assert_eq!(b.len(), 18);
        assert!((b[0] - 0.099).abs() < 5e-4 && (b[17] - 0.878).abs() < 5e-4, "{b:?}");
        assert_eq!(fig3_a_values().len(), 20);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!("fig5".parse::<FigureName>(), Err(Error::UnknownFigure(_))));
        for name in FIGURES {
            assert_eq!(name.parse::<FigureName>().unwrap().as_str(), name);
        }
    }

    #[test]
    fn analytic_figures_pass_their_checks() {
        let config = ExperimentConfig::new(super::super::Mode::Figure);
        for name in [
            FigureName::Fig1,
            FigureName::Fig2,
            FigureName::Fig3,
            FigureName::Fig4,
            FigureName::FigShadow,
        ] {
            let out = run_figure(name, &config, RunOptions::default()).unwrap();
            assert!(out.violations.is_empty(), "{name}: {:?}", out.violations);
            assert!(!out.table.rows.is_empty());
        }
    }

    #[test]
    fn crossing_detection() {
        assert!(crossing_holds(&[0.2, 0.4, 0.5], &[0.1, 0.4, 0.9]));
        assert!(!crossing_holds(&[0.2, 0.4], &[0.1, 0.3]));
    }
}
