//! Command line front end of the experiment harness.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{
    render, resolve_threads, run_experiment, write_atomic, ExperimentConfig, ExperimentKind, OutputFormat,
    SchemeName,
};
use crate::integrator::ReverseCheck;
use crate::projection::ConvergenceCriterion;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReverseCheckArg {
    Full,
    Partial,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    IncrementResidual,
    ScaledIncrement,
}

/// Constrained HMC/GHMC sampling experiments on the circle, sphere and torus.
#[derive(Debug, Parser)]
#[command(name = "manifold-ghmc", version)]
struct Cli {
    #[arg(long, value_enum, default_value = "histogram")]
    experiment: ExperimentKind,

    /// circle, torus-zero, torus-quadratic, torus-doublewell or sphere
    #[arg(long, default_value = "torus-zero")]
    model: String,

    /// Potential constant of the torus-quadratic / torus-doublewell models
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,

    #[arg(long, value_enum, default_value = "ghmc-lt")]
    scheme: SchemeName,

    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    dt: f64,

    /// GHMC momentum refresh parameter (default 0.5)
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,

    /// GHMC friction; with ghmc-lt, alpha = exp(-gamma dt)
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,

    /// RATTLE steps per HMC proposal
    #[arg(long, default_value_t = 1)]
    k_steps: usize,

    #[arg(long, default_value_t = 1_000_000)]
    niter: u64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 100)]
    nbins: usize,

    #[arg(long, value_enum, default_value = "full")]
    reverse_check: ReverseCheckArg,

    /// Truncate momenta to |p|^2 <= CAP (mrw, hmc, mala)
    #[arg(long, allow_negative_numbers = true)]
    momentum_cap: Option<f64>,

    /// Comma separated, strictly increasing timesteps
    #[arg(long, allow_hyphen_values = true)]
    sweep: Option<String>,

    /// Record every THIN-th state
    #[arg(long)]
    thin: Option<u64>,

    #[arg(long, value_enum, default_value = "increment-residual")]
    newton_criterion: CriterionArg,

    /// Output file; standard output if omitted
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,

    /// Worker threads (overridden by MANIFOLD_GHMC_THREADS)
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("--sweep: '{t}' is not a number")))
        })
        .collect()
}

impl Cli {
    fn into_config(self) -> Result<(ExperimentConfig, Option<PathBuf>, OutputFormat, Option<usize>)> {
        let sweep = match &self.sweep {
            Some(s) => parse_sweep(s)?,
            None => Vec::new(),
        };
        let cfg = ExperimentConfig {
            experiment: self.experiment,
            model: self.model,
            potential_k: self.k,
            scheme: self.scheme,
            dt: self.dt,
            alpha: self.alpha,
            gamma: self.gamma,
            k_steps: self.k_steps,
            n_iter: self.niter,
            seed: self.seed,
            n_bins: self.nbins,
            reverse_check: match self.reverse_check {
                ReverseCheckArg::Full => ReverseCheck::Full,
                ReverseCheckArg::Partial => ReverseCheck::PartialNoPositionCheck,
                ReverseCheckArg::None => ReverseCheck::NoneAtAll,
            },
            momentum_cap: self.momentum_cap,
            sweep,
            thin: self.thin,
            newton_criterion: match self.newton_criterion {
                CriterionArg::IncrementResidual => ConvergenceCriterion::IncrementAndResidual,
                CriterionArg::ScaledIncrement => ConvergenceCriterion::ScaledIncrement,
            },
        };
        Ok((cfg, self.out, self.format, self.threads))
    }
}

fn run(cli: Cli) -> Result<String> {
    let (cfg, out, format, threads) = cli.into_config()?;
    cfg.validate()?;
    let threads = resolve_threads(threads)?;
    let result = run_experiment(&cfg, threads)?;
    let text = render(&cfg, &result, format)?;
    match &out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    let target = out.map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
    Ok(format!("{} -> {target}", result.summary()))
}

/// Parses `args` (including the program name), runs the experiment and
/// returns the process exit code: 0 on success, 2 for configuration errors,
/// 3 for failures during the run.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let to_stdout = cli.out.is_none();
    match run(cli) {
        Ok(summary) => {
            if to_stdout {
                eprintln!("{summary}");
            } else {
                println!("{summary}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
