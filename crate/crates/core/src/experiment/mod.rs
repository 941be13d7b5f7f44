//! Experiment runner: JSON configs in, CSV tables out.

mod figures;
mod table;

use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize};

use crate::analytic::{
    failure_prob_closed, failure_prob_sum, threshold_a_numeric, threshold_a_star, threshold_b_numeric,
    threshold_b_star, BStarForm, CoefficientVariant, FailureProbResult,
};
use crate::error::{Error, Result};
use crate::model::{check_ratio, BhatDistribution, NetworkParams, ShadowModel};
use crate::montecarlo::{estimate_with, Labeling, Probe, RunOptions, ShadowDraw, ShadowParams, TrialProtocol};
use crate::shadowing::{failure_prob_shadow, failure_prob_shadow_no_threshold, ShadowFailureMethod};

pub use figures::{
    crossing_holds, fig1_b_values, fig3_a_values, fig6_a_values, fig_shadow_b_values, fig_shadow_series,
    mean_second_difference, run_figure, FigureName, FigureOutput, FIGURES,
};
pub use table::{format_g, Cell, Table, SIGNIFICANT_DIGITS};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    Simulate,
    Shadow,
    Threshold,
    Figure,
}

/// Propagation constants; unset keys fall back to the reference urban
/// example (0 dBm at 10 cm, -80 dBm floor, n_p = 3.5, 12 dB, R = 40 m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowInputs {
    pub p0_dbm: f64,
    pub gamma_dbm: f64,
    pub d0: f64,
    pub n_p: f64,
    pub sigma_s: f64,
    #[serde(rename = "R")]
    pub domain_radius: f64,
}

impl Default for ShadowInputs {
    fn default() -> Self {
        Self {
            p0_dbm: 0.0,
            gamma_dbm: -80.0,
            d0: 0.1,
            n_p: 3.5,
            sigma_s: 12.0,
            domain_radius: 40.0,
        }
    }
}

impl ShadowInputs {
    pub fn model(&self) -> Result<ShadowModel> {
        ShadowModel::new(
            self.p0_dbm,
            self.gamma_dbm,
            self.d0,
            self.n_p,
            self.sigma_s,
            self.domain_radius,
        )
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

/// One experiment. Grid keys accept a number or a list; the grid is the
/// Cartesian product of `n`, `k` (or `a`) and `b` (or `d` over `R`, or
/// `b_o` in shadow mode), iterated in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<u32>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub k: Vec<u32>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub a: Vec<f64>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<f64>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub d: Vec<f64>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub b_o: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_s: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub domain_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub variant: CoefficientVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Probe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeling: Option<Labeling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_draw: Option<ShadowDraw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<ShadowFailureMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            figure: None,
            n: Vec::new(),
            k: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
            d: Vec::new(),
            b_o: Vec::new(),
            p0_dbm: None,
            gamma_dbm: None,
            d0: None,
            n_p: None,
            sigma_s: None,
            domain_radius: None,
            trials: None,
            seed: None,
            variant: CoefficientVariant::default(),
            protocol: None,
            labeling: None,
            shadow_draw: None,
            method: None,
            out: None,
        }
    }

    pub fn figure(name: &str) -> Self {
        Self {
            figure: Some(name.to_string()),
            ..Self::new(Mode::Figure)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn shadow_inputs(&self) -> ShadowInputs {
        let d = ShadowInputs::default();
        ShadowInputs {
            p0_dbm: self.p0_dbm.unwrap_or(d.p0_dbm),
            gamma_dbm: self.gamma_dbm.unwrap_or(d.gamma_dbm),
            d0: self.d0.unwrap_or(d.d0),
            n_p: self.n_p.unwrap_or(d.n_p),
            sigma_s: self.sigma_s.unwrap_or(d.sigma_s),
            domain_radius: self.domain_radius.unwrap_or(d.domain_radius),
        }
    }

    /// Simulation protocol: probe from `protocol`, labels default to
    /// independent for the centre probe and fixed-count for all NL-nodes.
    pub fn trial_protocol(&self) -> TrialProtocol {
        let base = match self.protocol.unwrap_or(Probe::CenterNode) {
            Probe::CenterNode => TrialProtocol::center(),
            Probe::AllNlNodes => TrialProtocol::all_nl(),
        };
        let base = match self.labeling {
            Some(l) => base.with_labeling(l),
            None => base,
        };
        base.with_shadow(self.shadow_draw.unwrap_or(ShadowDraw::None))
    }

    fn networks(&self) -> Result<Vec<NetworkParams>> {
        if self.n.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if !self.k.is_empty() && !self.a.is_empty() {
            return Err(Error::invalid("k", "give either `k` or `a`, not both"));
        }
        let mut nets = Vec::new();
        for &n in &self.n {
            if !self.k.is_empty() {
                for &k in &self.k {
                    nets.push(NetworkParams::new(n, k)?);
                }
            } else {
                if self.a.is_empty() {
                    return Err(Error::EmptyGrid);
                }
                for &a in &self.a {
                    nets.push(NetworkParams::with_fraction(n, a)?);
                }
            }
        }
        Ok(nets)
    }

    fn ratios(&self, field: &'static str, direct: &[f64]) -> Result<Vec<f64>> {
        if !direct.is_empty() && !self.d.is_empty() {
            return Err(Error::invalid(field, format!("give either `{field}` or `d`, not both")));
        }
        if direct.is_empty() && self.d.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let values: Vec<f64> = if direct.is_empty() {
            let r = self
                .domain_radius
                .ok_or_else(|| Error::invalid("R", "`d` needs the domain radius `R`"))?;
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("R", format!("must be positive, got {r}")));
            }
            self.d.iter().map(|d| d / r).collect()
        } else {
            direct.to_vec()
        };
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let name = if direct.is_empty() { "d" } else { field };
        for &b in &values {
            check_ratio(name, b)?;
        }
        Ok(values)
    }

    fn trials(&self) -> Result<u64> {
        match self.trials {
            Some(0) => Err(Error::invalid("trials", "must be at least 1")),
            Some(t) => Ok(t),
            None => Ok(crate::montecarlo::DEFAULT_TRIALS),
        }
    }
}

/// Comment line recording the effective config and tool version.
pub fn provenance(config: &ExperimentConfig) -> String {
    format!("locprob {TOOL_VERSION} config={}", config.to_json())
}

const ANALYTIC_COLUMNS: [&str; 8] = ["n", "k", "a", "b", "p_f", "p_loc", "method", "variant"];
const SIMULATION_COLUMNS: [&str; 8] = [
    "p_loc_theory",
    "realizations",
    "trials",
    "successes",
    "ci_low",
    "ci_high",
    "seed",
    "protocol",
];
const SHADOW_COLUMNS: [&str; 4] = ["b_o", "sigma1", "b_hat_max", "zero_mass"];

/// Fixed-coverage failure probability for `variant`: the counting sum for
/// the corrected variant, the published closed form otherwise.
pub fn theory(net: &NetworkParams, b: f64, variant: CoefficientVariant) -> Result<FailureProbResult> {
    match variant {
        CoefficientVariant::Corrected => failure_prob_sum(net, b),
        CoefficientVariant::Paper => failure_prob_closed(net, b, variant),
    }
}

fn analytic_cells(net: &NetworkParams, b: f64, r: &FailureProbResult, variant: CoefficientVariant) -> Vec<Cell> {
    vec![
        net.n().into(),
        net.k().into(),
        net.a().into(),
        b.into(),
        r.p_f.into(),
        r.p_loc.into(),
        r.method.as_str().into(),
        variant.as_str().into(),
    ]
}

fn shadow_cells(dist: &BhatDistribution) -> Vec<Cell> {
    vec![
        dist.b_o.into(),
        dist.sigma1.into(),
        dist.b_hat_max.into(),
        dist.zero_mass.into(),
    ]
}

/// Runs any config and returns its table with the provenance comment set.
pub fn run_config(config: &ExperimentConfig, options: RunOptions) -> Result<Table> {
    let mut table = match config.mode {
        Mode::Figure => {
            let name = config
                .figure
                .as_deref()
                .ok_or_else(|| Error::invalid("figure", "figure mode needs `figure`"))?;
            return Ok(run_figure(name.parse()?, config, options)?.table);
        }
        Mode::Threshold => threshold_table(config)?,
        _ => sweep_table(config, options)?,
    };
    table.comment = provenance(config);
    Ok(table)
}

/// One row per grid point of an analytic, simulate or shadow config.
pub fn run_sweep(config: &ExperimentConfig, options: RunOptions) -> Result<Table> {
    match config.mode {
        Mode::Analytic | Mode::Simulate | Mode::Shadow => run_config(config, options),
        other => Err(Error::invalid(
            "mode",
            format!("sweeps need analytic|simulate|shadow, got {other:?}"),
        )),
    }
}

fn sweep_table(config: &ExperimentConfig, options: RunOptions) -> Result<Table> {
    let nets = config.networks()?;
    let variant = config.variant;
    match config.mode {
        Mode::Analytic => {
            let bs = config.ratios("b", &config.b)?;
            let mut table = Table::new(&ANALYTIC_COLUMNS);
            for net in &nets {
                for &b in &bs {
                    let r = theory(net, b, variant)?;
                    table.push(analytic_cells(net, b, &r, variant));
                }
            }
            Ok(table)
        }
        Mode::Simulate => {
            let protocol = config.trial_protocol();
            let trials = config.trials()?;
            let seed = config.seed();
            let shadowed = protocol.shadow_draw != ShadowDraw::None;
            let model = if shadowed {
                Some(config.shadow_inputs().model()?)
            } else {
                None
            };
            let bs = if shadowed && !config.b_o.is_empty() {
                config.ratios("b_o", &config.b_o)?
            } else {
                config.ratios("b", &config.b)?
            };
            let mut cols = [&ANALYTIC_COLUMNS[..], &SIMULATION_COLUMNS[..]].concat();
            if shadowed {
                cols.extend(SHADOW_COLUMNS);
            }
            let mut table = Table::new(&cols);
            for net in &nets {
                for &b in &bs {
                    let dist = match &model {
                        Some(m) => Some(BhatDistribution::new(b, m.sigma1, m.b_hat_max)?),
                        None => None,
                    };
                    let shadow = dist.as_ref().map(ShadowParams::from);
                    let est = estimate_with(net, b, &protocol, shadow.as_ref(), trials, seed, options)?;
                    let expected = match &dist {
                        Some(d) => failure_prob_shadow(net, d, config.method.unwrap_or_default(), variant)?,
                        None => theory(net, b, variant)?,
                    };
                    let mut row = vec![
                        net.n().into(),
                        net.k().into(),
                        net.a().into(),
                        b.into(),
                        (1.0 - est.p_hat).into(),
                        est.p_hat.into(),
                        "monte_carlo".into(),
                        variant.as_str().into(),
                        expected.p_loc.into(),
                        est.realizations.into(),
                        est.trials.into(),
                        est.successes.into(),
                        est.ci_low.into(),
                        est.ci_high.into(),
                        est.seed.into(),
                        protocol.name().into(),
                    ];
                    if let Some(d) = &dist {
                        row.extend(shadow_cells(d));
                    }
                    table.push(row);
                }
            }
            Ok(table)
        }
        Mode::Shadow => {
            let model = config.shadow_inputs().model()?;
            let method = config.method.unwrap_or_default();
            let bs = config.ratios("b_o", &config.b_o)?;
            let cols = [
                &ANALYTIC_COLUMNS[..],
                &SHADOW_COLUMNS[..],
                &["p_loc_no_shadow", "p_loc_no_threshold"],
            ]
            .concat();
            let mut table = Table::new(&cols);
            for net in &nets {
                for &b_o in &bs {
                    let dist = BhatDistribution::new(b_o, model.sigma1, model.b_hat_max)?;
                    table.push(shadow_row(net, &dist, method, variant)?);
                }
            }
            Ok(table)
        }
        Mode::Threshold | Mode::Figure => unreachable!("handled by run_config"),
    }
}

fn shadow_row(
    net: &NetworkParams,
    dist: &BhatDistribution,
    method: ShadowFailureMethod,
    variant: CoefficientVariant,
) -> Result<Vec<Cell>> {
    let shadowed = failure_prob_shadow(net, dist, method, variant)?;
    let plain = theory(net, dist.b_o, variant)?;
    let untruncated = failure_prob_shadow_no_threshold(net, dist.b_o, dist.sigma1, variant)?;
    let mut row = analytic_cells(net, dist.b_o, &shadowed, variant);
    row.extend(shadow_cells(dist));
    row.push(plain.p_loc.into());
    row.push(untruncated.p_loc.into());
    Ok(row)
}

const THRESHOLD_COLUMNS: [&str; 9] = [
    "n",
    "a",
    "b",
    "a_star_closed",
    "a_star_numeric",
    "b_star_exact",
    "b_star_large_n",
    "b_star_numeric",
    "b_star_gap",
];

/// `a*` for every `b` and `b*` for every `a` of the grid.
fn threshold_table(config: &ExperimentConfig) -> Result<Table> {
    if config.n.is_empty() || (config.a.is_empty() && config.b.is_empty()) {
        return Err(Error::EmptyGrid);
    }
    let mut table = Table::new(&THRESHOLD_COLUMNS);
    for &n in &config.n {
        for &b in &config.b {
            table.push(a_star_row(n, b)?);
        }
        for &a in &config.a {
            table.push(b_star_row(n, a)?);
        }
    }
    Ok(table)
}

fn a_star_row(n: u32, b: f64) -> Result<Vec<Cell>> {
    let closed = threshold_a_star(n, b)?;
    let numeric = match closed {
        Some(_) => Some(threshold_a_numeric(n, b)?),
        None => None,
    };
    let mut row = vec![n.into(), Cell::Empty, b.into(), closed.into(), numeric.into()];
    row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
    Ok(row)
}

fn b_star_row(n: u32, a: f64) -> Result<Vec<Cell>> {
    let exact = threshold_b_star(n, a, BStarForm::Exact)?;
    let large = threshold_b_star(n, a, BStarForm::LargeN)?;
    let numeric = threshold_b_numeric(n, a)?;
    Ok(vec![
        n.into(),
        a.into(),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        exact.into(),
        large.into(),
        numeric.into(),
        (numeric - exact).into(),
    ])
}

/// Thresholds at one `n` for a given `a` (yields `b*`) and/or `b`
/// (yields `a*`).
pub fn query_threshold(n: u32, a: Option<f64>, b: Option<f64>) -> Result<Table> {
    let mut config = ExperimentConfig::new(Mode::Threshold);
    config.n = vec![n];
    config.a = a.into_iter().collect();
    config.b = b.into_iter().collect();
    run_config(&config, RunOptions::default())
}

/// Single-point Monte Carlo estimate; the config must fix exactly one
/// `n`, one `k` or `a`, and one `b` (or `b_o`).
pub fn query_estimate(config: &ExperimentConfig, options: RunOptions) -> Result<Table> {
    let mut config = config.clone();
    config.mode = Mode::Simulate;
    let table = run_config(&config, options)?;
    if table.rows.len() != 1 {
        return Err(Error::invalid(
            "n",
            format!("estimate needs a single grid point, got {}", table.rows.len()),
        ));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic(json: &str) -> Result<Table> {
        run_config(&ExperimentConfig::from_json(json)?, RunOptions::default())
    }

    #[test]
    fn grid_order_and_columns() {
        let t = analytic(r#"{"mode":"analytic","n":[10,20],"a":[0.2,0.5],"b":0.3}"#).unwrap();
        assert_eq!(t.header, ANALYTIC_COLUMNS);
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.values("n"), vec![Some(10.0), Some(10.0), Some(20.0), Some(20.0)]);
        assert_eq!(t.values("a"), vec![Some(0.2), Some(0.5), Some(0.2), Some(0.5)]);
        assert!(t.comment.starts_with("locprob "));
    }

    #[test]
    fn distance_grid_uses_domain_radius() {
        let t = analytic(r#"{"mode":"analytic","n":50,"k":10,"d":[4,8],"R":40}"#).unwrap();
        assert_eq!(t.values("b"), vec![Some(0.1), Some(0.2)]);
        let err = analytic(r#"{"mode":"analytic","n":50,"k":10,"d":[4]}"#).unwrap_err();
        assert!(err.to_string().contains("`R`"), "{err}");
    }

    #[test]
    fn empty_grid() {
        let err = analytic(r#"{"mode":"analytic","n":[],"a":[0.2],"b":[0.3]}"#).unwrap_err();
        assert_eq!(err.to_string(), "empty grid");
        let err = analytic(r#"{"mode":"analytic","n":[10],"a":[0.2],"b":[]}"#).unwrap_err();
        assert_eq!(err.to_string(), "empty grid");
    }

    #[test]
    fn offending_field_is_named() {
        let err = analytic(r#"{"mode":"analytic","n":10,"a":0.2,"b":1.5}"#).unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
        let err = analytic(r#"{"mode":"analytic","n":10,"k":12,"b":0.5}"#).unwrap_err();
        assert!(err.to_string().contains("`k`"), "{err}");
        assert!(ExperimentConfig::from_json(r#"{"mode":"analytic","bogus":1}"#).is_err());
    }

    #[test]
    fn threshold_report() {
        let t = query_threshold(300, None, Some(0.15)).unwrap();
        let closed = t.values("a_star_closed")[0].unwrap();
        let numeric = t.values("a_star_numeric")[0].unwrap();
        assert!((closed - 0.70172).abs() < 1e-5, "{closed}");
        assert!((numeric - closed).abs() < 1e-3, "{numeric}");
    }

    #[test]
    fn estimate_is_reproducible() {
        let config =
            ExperimentConfig::from_json(r#"{"mode":"simulate","n":300,"a":0.2,"b":0.099,"seed":1,"trials":1000}"#)
                .unwrap();
        let first = query_estimate(&config, RunOptions::default())
            .unwrap()
            .to_csv_string()
            .unwrap();
        let again = query_estimate(&config, RunOptions { workers: Some(2) })
            .unwrap()
            .to_csv_string()
            .unwrap();
        assert_eq!(first, again);
    }

    #[test]
    fn shadow_sweep_columns() {
        let t = analytic(r#"{"mode":"shadow","n":50,"k":10,"b_o":[0.1,0.2]}"#).unwrap();
        assert_eq!(t.rows.len(), 2);
        let b_hat_max = t.values("b_hat_max")[0].unwrap();
        assert!((b_hat_max - 0.4828).abs() < 1e-3);
    }
}
