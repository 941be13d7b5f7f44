//! Seeded Monte Carlo simulation of one-shot localization.
//!
//! Nodes are dropped uniformly on the unit disk, L-nodes are labelled, and
//! every probed NL-node counts the L-nodes it can hear. Each trial index
//! owns its own ChaCha stream derived from the master seed, so an estimate
//! depends only on `(seed, trials, params, protocol)` and never on how the
//! trials are spread over worker threads.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_ratio, BhatDistribution, NetworkParams};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Default number of realizations per estimate.
pub const DEFAULT_TRIALS: u64 = 1000;

/// A node can localize itself once it hears this many L-nodes.
pub const REQUIRED_ANCHORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    /// One NL-node moved to the centre of the domain, so its coverage disk
    /// never crosses the boundary.
    #[serde(rename = "center", alias = "center_node")]
    CenterNode,
    /// Every NL-node of the realization; the statistic is the localized
    /// fraction.
    #[serde(rename = "all", alias = "all_nl_nodes")]
    AllNlNodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowDraw {
    None,
    /// One shadowing draw per probe, shared by all of its links.
    PerNode,
    /// An independent draw for every probe/L-node pair.
    PerLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    /// Exactly `k` distinct indices are L-nodes.
    #[serde(alias = "fixed")]
    FixedCount,
    /// Every node is an L-node independently with probability `1 - a`.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialProtocol {
    pub probe: Probe,
    pub shadow_draw: ShadowDraw,
    pub labeling: Labeling,
}

impl TrialProtocol {
    /// Interior probe with independent labels: the setting the closed forms
    /// describe.
    pub fn center() -> Self {
        Self {
            probe: Probe::CenterNode,
            shadow_draw: ShadowDraw::None,
            labeling: Labeling::Independent,
        }
    }

    /// All NL-nodes of a realization with exactly `k` L-nodes.
    pub fn all_nl() -> Self {
        Self {
            probe: Probe::AllNlNodes,
            shadow_draw: ShadowDraw::None,
            labeling: Labeling::FixedCount,
        }
    }

    pub fn with_shadow(mut self, shadow_draw: ShadowDraw) -> Self {
        self.shadow_draw = shadow_draw;
        self
    }

    pub fn with_labeling(mut self, labeling: Labeling) -> Self {
        self.labeling = labeling;
        self
    }

    pub fn name(&self) -> String {
        let probe = match self.probe {
            Probe::CenterNode => "center",
            Probe::AllNlNodes => "all",
        };
        let labels = match self.labeling {
            Labeling::FixedCount => "fixed",
            Labeling::Independent => "independent",
        };
        match self.shadow_draw {
            ShadowDraw::None => format!("{probe}/{labels}"),
            ShadowDraw::PerNode => format!("{probe}/{labels}/per_node"),
            ShadowDraw::PerLink => format!("{probe}/{labels}/per_link"),
        }
    }
}

impl fmt::Display for TrialProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Probe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" | "center_node" => Ok(Probe::CenterNode),
            "all" | "all_nl_nodes" => Ok(Probe::AllNlNodes),
            other => Err(Error::invalid(
                "protocol",
                format!("expected center|all, got `{other}`"),
            )),
        }
    }
}

impl FromStr for ShadowDraw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ShadowDraw::None),
            "per_node" => Ok(ShadowDraw::PerNode),
            "per_link" => Ok(ShadowDraw::PerLink),
            other => Err(Error::invalid(
                "shadow_draw",
                format!("expected none|per_node|per_link, got `{other}`"),
            )),
        }
    }
}

impl FromStr for Labeling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "fixed_count" => Ok(Labeling::FixedCount),
            "independent" => Ok(Labeling::Independent),
            other => Err(Error::invalid(
                "labeling",
                format!("expected fixed|independent, got `{other}`"),
            )),
        }
    }
}

/// Shadowing constants the simulator needs: spread of the distance
/// estimate (dB) and the largest detectable estimated range ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowParams {
    pub sigma1: f64,
    pub b_hat_max: f64,
}

impl From<&BhatDistribution> for ShadowParams {
    fn from(d: &BhatDistribution) -> Self {
        Self {
            sigma1: d.sigma1,
            b_hat_max: d.b_hat_max,
        }
    }
}

/// One node configuration on the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// Polar `(radius, angle)` pairs, radius in `[0, 1]`, angle in `[-pi, pi)`.
    pub positions: Vec<(f64, f64)>,
    pub l_flags: Vec<bool>,
}

impl Realization {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn l_count(&self) -> usize {
        self.l_flags.iter().filter(|&&f| f).count()
    }

    fn cartesian(&self) -> Vec<(f64, f64)> {
        self.positions
            .iter()
            .map(|&(r, theta)| (r * theta.cos(), r * theta.sin()))
            .collect()
    }
}

/// Uniform positions via `r = sqrt(U)` and exactly `k` L-nodes chosen
/// without replacement.
pub fn sample_realization<R: Rng + ?Sized>(rng: &mut R, net: &NetworkParams) -> Realization {
    sample_realization_with(rng, net, Labeling::FixedCount)
}

pub fn sample_realization_with<R: Rng + ?Sized>(rng: &mut R, net: &NetworkParams, labeling: Labeling) -> Realization {
    let n = net.n() as usize;
    let positions = (0..n)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let theta = rng.random_range(-PI..PI);
            (r, theta)
        })
        .collect();
    let mut l_flags = vec![false; n];
    match labeling {
        Labeling::FixedCount => {
            for i in rand::seq::index::sample(rng, n, net.k() as usize) {
                l_flags[i] = true;
            }
        }
        Labeling::Independent => {
            let p = 1.0 - net.a();
            for flag in l_flags.iter_mut() {
                *flag = rng.random::<f64>() < p;
            }
        }
    }
    Realization { positions, l_flags }
}

/// `Y = 10^(-X/10)`, `X ~ N(0, sigma1^2)`: ratio of estimated to true range.
fn range_factor<R: Rng + ?Sized>(rng: &mut R, sigma1: f64) -> f64 {
    let x: f64 = rng.sample(StandardNormal);
    10f64.powf(-sigma1 * x / 10.0)
}

/// Uniform grid over `[-1, 1]^2` holding the L-node indices.
struct AnchorGrid {
    cells: Vec<Vec<usize>>,
    side: usize,
    cell: f64,
}

impl AnchorGrid {
    fn new(xy: &[(f64, f64)], flags: &[bool], reach: f64) -> Self {
        let side = ((2.0 / reach).floor() as usize).clamp(1, 512);
        let cell = 2.0 / side as f64;
        let mut cells = vec![Vec::new(); side * side];
        for (j, &(x, y)) in xy.iter().enumerate() {
            if flags[j] {
                let (cx, cy) = Self::coords(x, y, cell, side);
                cells[cy * side + cx].push(j);
            }
        }
        Self { cells, side, cell }
    }

    fn coords(x: f64, y: f64, cell: f64, side: usize) -> (usize, usize) {
        let cx = (((x + 1.0) / cell) as usize).min(side - 1);
        let cy = (((y + 1.0) / cell) as usize).min(side - 1);
        (cx, cy)
    }

    /// Candidate L-nodes within one cell of `(x, y)`, in deterministic order.
    fn neighbours(&self, x: f64, y: f64) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = Self::coords(x, y, self.cell, self.side);
        let lo_x = cx.saturating_sub(1);
        let hi_x = (cx + 1).min(self.side - 1);
        let lo_y = cy.saturating_sub(1);
        let hi_y = (cy + 1).min(self.side - 1);
        (lo_y..=hi_y)
            .flat_map(move |gy| (lo_x..=hi_x).flat_map(move |gx| self.cells[gy * self.side + gx].iter().copied()))
    }
}

fn check_shadow(protocol: &TrialProtocol, shadow: Option<&ShadowParams>) -> Result<()> {
    match (protocol.shadow_draw, shadow) {
        (ShadowDraw::None, _) => Ok(()),
        (_, None) => Err(Error::invalid("shadow", "shadowed protocols need shadowing parameters")),
        (_, Some(s)) if !(s.sigma1 >= 0.0 && s.b_hat_max > 0.0 && s.b_hat_max <= 1.0) => Err(Error::invalid(
            "shadow",
            format!("sigma1 >= 0 and 0 < b_hat_max <= 1 required, got {s:?}"),
        )),
        _ => Ok(()),
    }
}

/// Index of the node relocated to the centre.
fn center_probe(realization: &Realization, labeling: Labeling) -> usize {
    match labeling {
        // Node 0 is the probe whatever its label; the others keep iid labels.
        Labeling::Independent => 0,
        Labeling::FixedCount => realization.l_flags.iter().position(|&f| !f).unwrap_or(0),
    }
}

/// Localization outcome for each probed node of `realization`.
///
/// A probe hears an L-node at distance `t` when `t <= b` without
/// shadowing. With shadowing the probe's estimated range is `b Y`; it hears
/// the L-node when `t <= b Y` and the estimate is detectable,
/// `b Y <= b_hat_max`. `PerNode` draws `Y` once per probe, `PerLink` once per
/// pair.
pub fn run_trial<R: Rng + ?Sized>(
    realization: &Realization,
    b: f64,
    protocol: &TrialProtocol,
    shadow: Option<&ShadowParams>,
    rng: &mut R,
) -> Result<Vec<bool>> {
    check_ratio("b", b)?;
    check_shadow(protocol, shadow)?;
    let sigma1 = shadow.map_or(0.0, |s| s.sigma1);
    let b_hat_max = shadow.map_or(f64::INFINITY, |s| s.b_hat_max);
    let flags = &realization.l_flags;

    match protocol.probe {
        Probe::CenterNode => {
            let probe = center_probe(realization, protocol.labeling);
            let others = realization
                .positions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != probe && flags[j])
                .map(|(_, &(r, _))| r);
            let heard = match protocol.shadow_draw {
                ShadowDraw::None => others.filter(|&t| t <= b).take(REQUIRED_ANCHORS).count(),
                ShadowDraw::PerNode => {
                    let reach = b * range_factor(rng, sigma1);
                    if reach > b_hat_max {
                        0
                    } else {
                        others.filter(|&t| t <= reach).take(REQUIRED_ANCHORS).count()
                    }
                }
                ShadowDraw::PerLink => {
                    let mut count = 0;
                    for t in others {
                        if t > b_hat_max {
                            continue;
                        }
                        let reach = b * range_factor(rng, sigma1);
                        if reach <= b_hat_max && t <= reach {
                            count += 1;
                            if count == REQUIRED_ANCHORS {
                                break;
                            }
                        }
                    }
                    count
                }
            };
            Ok(vec![heard >= REQUIRED_ANCHORS])
        }
        Probe::AllNlNodes => {
            let max_reach = match protocol.shadow_draw {
                ShadowDraw::None => b,
                _ => b_hat_max.min(2.0),
            };
            let xy = realization.cartesian();
            let probes = (0..xy.len()).filter(|&i| !flags[i]);
            if max_reach <= 0.0 {
                return Ok(probes.map(|_| false).collect());
            }
            let grid = AnchorGrid::new(&xy, flags, max_reach);
            let mut outcomes = Vec::new();
            for i in probes {
                let (x, y) = xy[i];
                let dist = |j: usize| ((xy[j].0 - x).powi(2) + (xy[j].1 - y).powi(2)).sqrt();
                let heard = match protocol.shadow_draw {
                    ShadowDraw::None => grid
                        .neighbours(x, y)
                        .filter(|&j| dist(j) <= b)
                        .take(REQUIRED_ANCHORS)
                        .count(),
                    ShadowDraw::PerNode => {
                        let reach = b * range_factor(rng, sigma1);
                        if reach > b_hat_max {
                            0
                        } else {
                            grid.neighbours(x, y)
                                .filter(|&j| dist(j) <= reach)
                                .take(REQUIRED_ANCHORS)
                                .count()
                        }
                    }
                    ShadowDraw::PerLink => {
                        let mut count = 0;
                        for j in grid.neighbours(x, y) {
                            let t = dist(j);
                            if t > b_hat_max {
                                continue;
                            }
                            let reach = b * range_factor(rng, sigma1);
                            if reach <= b_hat_max && t <= reach {
                                count += 1;
                                if count == REQUIRED_ANCHORS {
                                    break;
                                }
                            }
                        }
                        count
                    }
                };
                outcomes.push(heard >= REQUIRED_ANCHORS);
            }
            Ok(outcomes)
        }
    }
}

/// Localization probability estimate with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    /// Realizations simulated.
    pub realizations: u64,
    /// Probe outcomes pooled over all realizations.
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl ProbEstimate {
    pub fn from_counts(realizations: u64, trials: u64, successes: u64, seed: u64) -> Self {
        let p_hat = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        let (ci_low, ci_high) = wilson_interval(successes, trials, Z_95);
        Self {
            realizations,
            trials,
            successes,
            p_hat,
            ci_low,
            ci_high,
            seed,
        }
    }

    /// Wilson interval at `z` standard deviations.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.successes, self.trials, z)
    }

    /// Half-width of the one-sigma Wilson interval.
    pub fn std_error(&self) -> f64 {
        let (lo, hi) = self.interval(1.0);
        0.5 * (hi - lo)
    }

    /// Whether `p` lies inside the Wilson interval of `sigmas` standard errors.
    pub fn agrees_with(&self, p: f64, sigmas: f64) -> bool {
        let (lo, hi) = self.interval(sigmas);
        (lo..=hi).contains(&p)
    }
}

/// Wilson score interval for `successes` out of `trials`, clamped so that
/// it always contains the point estimate.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Options for [`estimate_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

pub fn estimate(
    net: &NetworkParams,
    b: f64,
    protocol: &TrialProtocol,
    shadow: Option<&ShadowParams>,
    trials: u64,
    seed: u64,
) -> Result<ProbEstimate> {
    estimate_with(net, b, protocol, shadow, trials, seed, RunOptions::default())
}

/// Average of [`run_trial`] over `trials` fresh realizations.
pub fn estimate_with(
    net: &NetworkParams,
    b: f64,
    protocol: &TrialProtocol,
    shadow: Option<&ShadowParams>,
    trials: u64,
    seed: u64,
    options: RunOptions,
) -> Result<ProbEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    check_ratio("b", b)?;
    check_shadow(protocol, shadow)?;
    let one = |index: u64| -> (u64, u64) {
        let mut rng = trial_rng(seed, index);
        let realization = sample_realization_with(&mut rng, net, protocol.labeling);
        let outcomes = run_trial(&realization, b, protocol, shadow, &mut rng).expect("inputs validated above");
        let wins = outcomes.iter().filter(|&&ok| ok).count() as u64;
        (wins, outcomes.len() as u64)
    };
    let run = || {
        (0..trials)
            .into_par_iter()
            .map(one)
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1))
    };
    let (successes, outcomes) = match options.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(ProbEstimate::from_counts(trials, outcomes, successes, seed))
}
