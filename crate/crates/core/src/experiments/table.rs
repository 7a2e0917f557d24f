use serde::Serialize;

use super::{run_indexed, ExperimentConfig, SchemeName};
use crate::error::Result;
use crate::sampler::{ChainState, RejectionTally, Sampler, StepOutcome};
use crate::stats::binomial_se;

/// Timesteps of the default table, largest first.
pub const TABLE_TIMESTEPS: [f64; 3] = [1.0, 0.3, 0.1];
/// GHMC refresh parameters of the table.
pub const TABLE_ALPHAS: [f64; 3] = [0.1, 0.5, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRow {
    pub scheme: SchemeName,
    pub dt: f64,
    pub alpha: Option<f64>,
    pub n_iter: u64,
    pub tally: RejectionTally,
    pub total: f64,
    pub newton_forward: f64,
    pub newton_reverse: f64,
    pub non_reversible: f64,
    pub metropolis: f64,
    pub accepted: f64,
    pub se_total: f64,
    pub se_newton_forward: f64,
    pub se_newton_reverse: f64,
    pub se_non_reversible: f64,
    pub se_metropolis: f64,
}

impl RejectionRow {
    fn from_tally(scheme: SchemeName, dt: f64, alpha: Option<f64>, tally: RejectionTally) -> Self {
        let n = tally.total();
        let rate = |o| tally.rate(o);
        let total = tally.rejection_rate();
        Self {
            scheme,
            dt,
            alpha,
            n_iter: n,
            tally,
            total,
            newton_forward: rate(StepOutcome::NewtonForward),
            newton_reverse: rate(StepOutcome::NewtonReverse),
            non_reversible: rate(StepOutcome::NonReversible),
            metropolis: rate(StepOutcome::Metropolis),
            accepted: rate(StepOutcome::Accepted),
            se_total: binomial_se(total, n),
            se_newton_forward: binomial_se(rate(StepOutcome::NewtonForward), n),
            se_newton_reverse: binomial_se(rate(StepOutcome::NewtonReverse), n),
            se_non_reversible: binomial_se(rate(StepOutcome::NonReversible), n),
            se_metropolis: binomial_se(rate(StepOutcome::Metropolis), n),
        }
    }

    /// Label such as `GHMC dt=0.3 alpha=0.5`.
    pub fn label(&self) -> String {
        let name = match self.scheme {
            SchemeName::Mrw => "MRW",
            SchemeName::Hmc => "HMC",
            SchemeName::Mala => "MALA",
            SchemeName::GhmcStrang | SchemeName::GhmcLt => "GHMC",
        };
        match self.alpha {
            Some(a) => format!("{name} dt={} alpha={a}", self.dt),
            None => format!("{name} dt={}", self.dt),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn find(&self, scheme: SchemeName, dt: f64, alpha: Option<f64>) -> Option<&RejectionRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.dt == dt && r.alpha == alpha)
    }
}

/// Rejection rates of MRW, MALA and Lie–Trotter GHMC for each `α` in
/// [`TABLE_ALPHAS`], at the timesteps of `cfg.sweep` (or [`TABLE_TIMESTEPS`]).
/// Cell `i` runs on stream `i` of the seed.
pub fn run_rejection_table(cfg: &ExperimentConfig, threads: usize) -> Result<RejectionTable> {
    let timesteps: Vec<f64> = if cfg.sweep.is_empty() {
        TABLE_TIMESTEPS.to_vec()
    } else {
        cfg.sweep.clone()
    };
    let mut cells: Vec<(SchemeName, f64, Option<f64>)> = Vec::new();
    for &dt in &timesteps {
        cells.push((SchemeName::Mrw, dt, None));
        cells.push((SchemeName::Mala, dt, None));
        for &a in &TABLE_ALPHAS {
            cells.push((SchemeName::GhmcLt, dt, Some(a)));
        }
    }
    let model = cfg.build_model()?;
    let model = model.as_ref();
    let rows = run_indexed(threads, cells.len(), |i| {
        let (scheme, dt, alpha) = cells[i];
        let cell_cfg = ExperimentConfig {
            scheme,
            alpha,
            gamma: None,
            k_steps: 1,
            momentum_cap: None,
            ..cfg.clone()
        };
        let sampler_cfg = cell_cfg.sampler_config(dt)?;
        let sampler = Sampler::new(model, sampler_cfg)?;
        let mut state = ChainState::initial_on_stream(model, &sampler_cfg, i as u64);
        let tally = sampler.run(&mut state, cfg.n_iter, 1, |_, _, _| {})?;
        Ok(RejectionRow::from_tally(scheme, dt, alpha, tally))
    })?;
    Ok(RejectionTable { rows })
}
