use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use locprob_core::analytic::CoefficientVariant;
use locprob_core::error::Error;
use locprob_core::experiment::{self, ExperimentConfig, FigureName, Mode, Table};
use locprob_core::montecarlo::{Labeling, Probe, RunOptions, ShadowDraw};
use locprob_core::shadowing::ShadowFailureMethod;

const EXIT_INVALID: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

/// Localization probability of NL-nodes in random networks: closed forms,
/// shadowing, thresholds and Monte Carlo, emitted as CSV.
#[derive(Parser, Debug)]
#[command(name = "locprob", version)]
struct Cli {
    /// Suppress progress and summary output on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    /// Worker threads for Monte Carlo runs (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    trials: Option<u64>,

    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Coefficient of the closed form: paper or corrected.
    #[arg(long)]
    variant: Option<CoefficientVariant>,

    /// Monte Carlo probe: center or all.
    #[arg(long)]
    protocol: Option<Probe>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reproduce one figure as a data table.
    Figure {
        /// fig1, fig2, fig3, fig4, fig6 or fig_shadow
        name: String,

        /// Exit with status 3 when the table breaks its caption properties.
        #[arg(long)]
        check: bool,

        #[command(flatten)]
        common: Common,
    },
    /// Run the grid described by a JSON config.
    Sweep {
        config: PathBuf,

        #[command(flatten)]
        common: Common,
    },
    /// Transition thresholds a* (given b) and b* (given a).
    Threshold {
        #[arg(long)]
        n: u32,

        #[arg(long)]
        a: Option<f64>,

        #[arg(long)]
        b: Option<f64>,

        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate at one parameter point.
    Estimate {
        #[arg(long)]
        n: u32,

        #[arg(long, conflicts_with = "a")]
        k: Option<u32>,

        #[arg(long)]
        a: Option<f64>,

        /// Coverage ratio d/R (true ratio b_o when shadowed).
        #[arg(long)]
        b: f64,

        #[arg(long)]
        labeling: Option<Labeling>,

        /// none, per_node or per_link
        #[arg(long)]
        shadow_draw: Option<ShadowDraw>,

        #[arg(long)]
        sigma_s: Option<f64>,

        #[arg(long)]
        n_p: Option<f64>,

        #[arg(long)]
        gamma_dbm: Option<f64>,

        #[arg(long)]
        p0_dbm: Option<f64>,

        #[arg(long)]
        d0: Option<f64>,

        #[arg(long = "R")]
        domain_radius: Option<f64>,

        /// Shadowed theory column: integrate_conditional, alternating_sum or moment_approx.
        #[arg(long)]
        method: Option<ShadowFailureMethod>,

        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Core(Error),
    Usage(String),
    Check(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn apply(common: &Common, config: &mut ExperimentConfig) {
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    if let Some(trials) = common.trials {
        config.trials = Some(trials);
    }
    if let Some(variant) = common.variant {
        config.variant = variant;
    }
    if let Some(protocol) = common.protocol {
        config.protocol = Some(protocol);
    }
    if common.out.is_some() {
        config.out = common.out.clone();
    }
}

fn emit(table: &Table, out: Option<&Path>, quiet: bool) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write_csv(&mut w)?;
            w.flush()?;
            if !quiet {
                eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
            }
        }
        None => {
            let stdout = io::stdout();
            table.write_csv(stdout.lock())?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let options = RunOptions { workers: cli.workers };
    match cli.command {
        Command::Figure { name, check, common } => {
            let figure: FigureName = name.parse()?;
            let mut config = ExperimentConfig::figure(figure.as_str());
            apply(&common, &mut config);
            if !cli.quiet {
                eprintln!("running {figure}");
            }
            let output = experiment::run_figure(figure, &config, options)?;
            emit(&output.table, config.out.as_deref(), cli.quiet)?;
            if check && !output.violations.is_empty() {
                return Err(Failure::Check(output.violations));
            }
            Ok(())
        }
        Command::Sweep { config, common } => {
            let text = std::fs::read_to_string(&config)?;
            let mut config = ExperimentConfig::from_json(&text)?;
            apply(&common, &mut config);
            let table = experiment::run_config(&config, options)?;
            emit(&table, config.out.as_deref(), cli.quiet)
        }
        Command::Threshold { n, a, b, out } => {
            if a.is_none() && b.is_none() {
                return Err(Failure::Usage("threshold needs --a and/or --b".to_string()));
            }
            let table = experiment::query_threshold(n, a, b)?;
            emit(&table, out.as_deref(), cli.quiet)
        }
        Command::Estimate {
            n,
            k,
            a,
            b,
            labeling,
            shadow_draw,
            sigma_s,
            n_p,
            gamma_dbm,
            p0_dbm,
            d0,
            domain_radius,
            method,
            common,
        } => {
            let mut config = ExperimentConfig::new(Mode::Simulate);
            config.n = vec![n];
            match (k, a) {
                (Some(k), _) => config.k = vec![k],
                (None, Some(a)) => config.a = vec![a],
                (None, None) => return Err(Failure::Usage("estimate needs --k or --a".to_string())),
            }
            config.b = vec![b];
            config.labeling = labeling;
            config.shadow_draw = shadow_draw;
            config.sigma_s = sigma_s;
            config.n_p = n_p;
            config.gamma_dbm = gamma_dbm;
            config.p0_dbm = p0_dbm;
            config.d0 = d0;
            config.domain_radius = domain_radius;
            config.method = method;
            apply(&common, &mut config);
            let table = experiment::query_estimate(&config, options)?;
            emit(&table, config.out.as_deref(), cli.quiet)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INVALID })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Check(violations)) => {
            for v in &violations {
                eprintln!("check failed: {v}");
            }
            ExitCode::from(EXIT_CHECK_FAILED)
        }
    }
}
