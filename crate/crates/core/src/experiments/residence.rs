use serde::Serialize;

use super::{run_indexed, ExperimentConfig, SchemeName};
use crate::error::{Error, Result};
use crate::sampler::{ChainState, Sampler, StepOutcome};
use crate::stats::ResidenceTracker;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidenceEstimate {
    pub dt: f64,
    /// GHMC parameters actually used at this timestep.
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub n_iter: u64,
    /// Number of switches `K`.
    pub switches: u64,
    /// `τ̂` in steps; `None` when no switch was observed.
    pub mean_residence: Option<f64>,
    pub nonrev_rate: f64,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidenceResult {
    pub scheme: SchemeName,
    pub points: Vec<ResidenceEstimate>,
}

/// Mean number of steps between switches of the wells `x ≈ ±R`, for each
/// timestep of `cfg.sweep`. Point `i` runs on stream `i` of the seed.
pub fn run_residence_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<ResidenceResult> {
    let params = cfg
        .torus_params()
        .ok_or_else(|| Error::InvalidConfig("--experiment residence-sweep needs a torus model".into()))?;
    let model = cfg.build_model()?;
    let model = model.as_ref();
    let points = run_indexed(threads, cfg.sweep.len(), |i| {
        let dt = cfg.sweep[i];
        let sampler_cfg = cfg.sampler_config(dt)?;
        let sampler = Sampler::new(model, sampler_cfg)?;
        let mut state = ChainState::initial_on_stream(model, &sampler_cfg, i as u64);
        let mut tracker = ResidenceTracker::new(params.major);
        let tally = sampler.run(&mut state, cfg.n_iter, 1, |n, x, _| tracker.observe(n, x.q[0]))?;
        let ghmc = cfg.scheme.is_ghmc();
        Ok(ResidenceEstimate {
            dt,
            alpha: ghmc.then(|| cfg.alpha_at(dt)),
            gamma: ghmc.then(|| cfg.gamma_at(dt)),
            n_iter: cfg.n_iter,
            switches: tracker.switches(),
            mean_residence: tracker.mean_residence(),
            nonrev_rate: tally.rate(StepOutcome::NonReversible),
            rejection_rate: tally.rejection_rate(),
        })
    })?;
    Ok(ResidenceResult {
        scheme: cfg.scheme,
        points,
    })
}
