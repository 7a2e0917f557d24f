//! Experiment harness: configuration, runners and file output.
//!
//! Every runner is a pure function of its [`ExperimentConfig`]; independent
//! chains (table cells, sweep points) draw from their own stream of the
//! configured seed, so results do not depend on the thread count.

mod histogram;
mod output;
mod residence;
mod table;
mod trajectory;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{RattleConfig, ReverseCheck};
use crate::models::{model_by_name, torus_params_by_name, ConstraintModel, TorusParams};
use crate::projection::{ConvergenceCriterion, NewtonConfig};
use crate::sampler::{SamplerConfig, Scheme};

pub use histogram::{run_histogram, HistogramBin, HistogramResult};
pub use output::{render, write_atomic, FORMAT_VERSION};
pub use residence::{run_residence_sweep, ResidenceEstimate, ResidenceResult};
pub use table::{run_rejection_table, RejectionRow, RejectionTable, TABLE_ALPHAS, TABLE_TIMESTEPS};
pub use trajectory::{run_trajectory, TrajectoryRecord, TrajectoryResult, MAX_TRAJECTORY_POINTS};

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "MANIFOLD_GHMC_THREADS";

/// Default `α` of the GHMC schemes when neither `α` nor `γ` is given.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Histogram,
    RejectionTable,
    ResidenceSweep,
    Trajectory,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Histogram => "histogram",
            ExperimentKind::RejectionTable => "rejection-table",
            ExperimentKind::ResidenceSweep => "residence-sweep",
            ExperimentKind::Trajectory => "trajectory",
        }
    }
}

/// Sampler families selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    /// Metropolis random walk: one RATTLE step without forces.
    Mrw,
    Hmc,
    Mala,
    GhmcStrang,
    GhmcLt,
}

impl SchemeName {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::Mrw => "mrw",
            SchemeName::Hmc => "hmc",
            SchemeName::Mala => "mala",
            SchemeName::GhmcStrang => "ghmc-strang",
            SchemeName::GhmcLt => "ghmc-lt",
        }
    }

    pub fn is_ghmc(self) -> bool {
        matches!(self, SchemeName::GhmcStrang | SchemeName::GhmcLt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

pub fn reverse_check_name(mode: ReverseCheck) -> &'static str {
    match mode {
        ReverseCheck::Full => "full",
        ReverseCheck::PartialNoPositionCheck => "partial",
        ReverseCheck::NoneAtAll => "none",
    }
}

pub fn criterion_name(c: ConvergenceCriterion) -> &'static str {
    match c {
        ConvergenceCriterion::IncrementAndResidual => "increment-residual",
        ConvergenceCriterion::ScaledIncrement => "scaled-increment",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: String,
    /// Potential constant `k` of the torus variants; model default if `None`.
    pub potential_k: Option<f64>,
    pub scheme: SchemeName,
    pub dt: f64,
    /// GHMC refresh parameter, held fixed across a sweep.
    pub alpha: Option<f64>,
    /// GHMC friction, held fixed across a sweep (`α = exp(−γΔt)`).
    pub gamma: Option<f64>,
    pub k_steps: usize,
    pub n_iter: u64,
    pub seed: u64,
    pub n_bins: usize,
    pub reverse_check: ReverseCheck,
    pub momentum_cap: Option<f64>,
    /// Timesteps of a residence sweep or rejection table.
    pub sweep: Vec<f64>,
    /// Keep every `thin`-th state; experiment default if `None`.
    pub thin: Option<u64>,
    pub newton_criterion: ConvergenceCriterion,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Histogram,
            model: "torus-zero".into(),
            potential_k: None,
            scheme: SchemeName::GhmcLt,
            dt: 1.0,
            alpha: None,
            gamma: None,
            k_steps: 1,
            n_iter: 1_000_000,
            seed: 0,
            n_bins: 100,
            reverse_check: ReverseCheck::Full,
            momentum_cap: None,
            sweep: Vec::new(),
            thin: None,
            newton_criterion: ConvergenceCriterion::IncrementAndResidual,
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn check_positive(flag: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{flag} must be a positive finite number (got {v})")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("--dt", self.dt)?;
        if self.n_iter == 0 {
            return Err(config_error("--niter must be at least 1"));
        }
        if self.n_bins < 2 {
            return Err(config_error(format!("--nbins must be at least 2 (got {})", self.n_bins)));
        }
        if self.k_steps == 0 {
            return Err(config_error("--k-steps must be at least 1"));
        }
        if self.thin == Some(0) {
            return Err(config_error("--thin must be at least 1"));
        }
        if let Some(k) = self.potential_k {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(config_error(format!("--k must be a non-negative finite number (got {k})")));
            }
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(config_error(format!("--alpha must lie in [0, 1] (got {a})")));
            }
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(config_error(format!("--gamma must be a non-negative finite number (got {g})")));
            }
        }
        if self.alpha.is_some() && self.gamma.is_some() {
            return Err(config_error("--alpha and --gamma are mutually exclusive"));
        }
        if let Some(cap) = self.momentum_cap {
            check_positive("--momentum-cap", cap)?;
        }
        for &dt in &self.sweep {
            check_positive("--sweep", dt)?;
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_error("--sweep must be strictly increasing"));
        }
        let model = self.build_model()?;
        let needs_torus = matches!(
            self.experiment,
            ExperimentKind::Histogram | ExperimentKind::ResidenceSweep
        );
        if needs_torus && self.torus_params().is_none() {
            return Err(config_error(format!(
                "--experiment {} needs a torus model (got {})",
                self.experiment.as_str(),
                model.name()
            )));
        }
        if self.experiment == ExperimentKind::ResidenceSweep && self.sweep.is_empty() {
            return Err(config_error("--experiment residence-sweep needs --sweep"));
        }
        if self.experiment != ExperimentKind::RejectionTable {
            for dt in self.timesteps() {
                self.sampler_config(dt)?.validate()?;
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Box<dyn ConstraintModel>> {
        model_by_name(&self.model, self.potential_k)
    }

    pub fn torus_params(&self) -> Option<TorusParams> {
        torus_params_by_name(&self.model, self.potential_k)
    }

    fn timesteps(&self) -> Vec<f64> {
        match self.experiment {
            ExperimentKind::ResidenceSweep => self.sweep.clone(),
            _ => vec![self.dt],
        }
    }

    /// `α` used by a GHMC scheme at timestep `dt`.
    pub fn alpha_at(&self, dt: f64) -> f64 {
        match (self.alpha, self.gamma) {
            (Some(a), _) => a,
            (None, Some(g)) => (-g * dt).exp(),
            (None, None) => DEFAULT_ALPHA,
        }
    }

    /// Friction `γ` used by a GHMC scheme at timestep `dt`.
    pub fn gamma_at(&self, dt: f64) -> f64 {
        match self.gamma {
            Some(g) => g,
            None => -self.alpha_at(dt).ln() / dt,
        }
    }

    pub fn rattle_config(&self, dt: f64, use_forces: bool) -> RattleConfig {
        RattleConfig {
            dt,
            use_forces,
            reverse_check: self.reverse_check,
            newton: NewtonConfig {
                criterion: self.newton_criterion,
                ..NewtonConfig::default()
            },
            ..RattleConfig::default()
        }
    }

    /// Sampler for the configured scheme at timestep `dt`.
    pub fn sampler_config(&self, dt: f64) -> Result<SamplerConfig> {
        let (scheme, use_forces) = match self.scheme {
            SchemeName::Mrw => (Scheme::Hmc, false),
            SchemeName::Hmc => (Scheme::Hmc, true),
            SchemeName::Mala => {
                if self.k_steps != 1 {
                    return Err(config_error("--scheme mala takes --k-steps 1"));
                }
                (Scheme::Mala, true)
            }
            SchemeName::GhmcLt => (
                Scheme::GhmcLieTrotter {
                    alpha: self.alpha_at(dt),
                },
                true,
            ),
            SchemeName::GhmcStrang => (
                Scheme::GhmcStrang {
                    gamma: self.gamma_at(dt),
                },
                true,
            ),
        };
        if self.momentum_cap.is_some() && self.scheme.is_ghmc() {
            return Err(config_error("--momentum-cap applies to mrw, hmc and mala"));
        }
        let cfg = SamplerConfig {
            scheme,
            k_steps: self.k_steps,
            momentum_cap: self.momentum_cap,
            seed: self.seed,
            rattle: self.rattle_config(dt, use_forces),
        };
        Ok(cfg)
    }
}

/// Worker count: the environment override, then `requested`, then one per core.
pub fn resolve_threads(requested: Option<usize>) -> Result<usize> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| config_error(format!("{THREADS_ENV} must be a positive integer (got '{v}')")))?,
        Err(_) => match requested {
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(config_error("--threads must be at least 1"));
    }
    Ok(n)
}

/// Evaluates `f(0..n)` on a pool of `threads` workers, in index order.
pub fn run_indexed<T, F>(threads: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Result of any experiment.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentOutput {
    Histogram(HistogramResult),
    RejectionTable(RejectionTable),
    ResidenceSweep(ResidenceResult),
    Trajectory(TrajectoryResult),
}

impl ExperimentOutput {
    /// One-line human readable summary.
    pub fn summary(&self) -> String {
        match self {
            ExperimentOutput::Histogram(h) => match &h.chi_square {
                Some(c) => format!(
                    "histogram: {} samples, acceptance {:.4}, chi2 = {:.2} (dof {}, p = {:.3e})",
                    h.n_samples,
                    h.tally.rate(crate::sampler::StepOutcome::Accepted),
                    c.statistic,
                    c.dof,
                    c.p_value
                ),
                None => format!(
                    "histogram: {} samples, acceptance {:.4}, no reference for this potential",
                    h.n_samples,
                    h.tally.rate(crate::sampler::StepOutcome::Accepted)
                ),
            },
            ExperimentOutput::RejectionTable(t) => format!("rejection-table: {} rows", t.rows.len()),
            ExperimentOutput::ResidenceSweep(r) => {
                let missing = r.points.iter().filter(|p| p.mean_residence.is_none()).count();
                format!(
                    "residence-sweep: {} timesteps, {} without switches",
                    r.points.len(),
                    missing
                )
            }
            ExperimentOutput::Trajectory(t) => format!(
                "trajectory: {} of {} states stored (thin {})",
                t.records.len(),
                t.n_iter,
                t.thin
            ),
        }
    }
}

/// Runs the configured experiment on `threads` workers.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        ExperimentKind::Histogram => ExperimentOutput::Histogram(run_histogram(cfg)?),
        ExperimentKind::RejectionTable => ExperimentOutput::RejectionTable(run_rejection_table(cfg, threads)?),
        ExperimentKind::ResidenceSweep => ExperimentOutput::ResidenceSweep(run_residence_sweep(cfg, threads)?),
        ExperimentKind::Trajectory => ExperimentOutput::Trajectory(run_trajectory(cfg)?),
    })
}
