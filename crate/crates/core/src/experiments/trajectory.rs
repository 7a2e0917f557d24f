use serde::Serialize;

use super::ExperimentConfig;
use crate::error::Result;
use crate::sampler::{RejectionTally, Sampler};

/// Default cap on stored states; longer runs are thinned to fit.
pub const MAX_TRAJECTORY_POINTS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Outcome code of the step that produced this state.
    pub outcome: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryResult {
    pub n_iter: u64,
    pub thin: u64,
    pub dim: usize,
    pub records: Vec<TrajectoryRecord>,
    pub tally: RejectionTally,
}

pub fn run_trajectory(cfg: &ExperimentConfig) -> Result<TrajectoryResult> {
    let model = cfg.build_model()?;
    let sampler = Sampler::new(model.as_ref(), cfg.sampler_config(cfg.dt)?)?;
    let thin = cfg.thin.unwrap_or_else(|| cfg.n_iter.div_ceil(MAX_TRAJECTORY_POINTS).max(1));
    let mut records = Vec::new();
    let mut state = sampler.initial_state();
    let tally = sampler.run(&mut state, cfg.n_iter, thin, |step, x, outcome| {
        records.push(TrajectoryRecord {
            step,
            q: x.q.iter().copied().collect(),
            p: x.p.iter().copied().collect(),
            outcome: outcome.code(),
        })
    })?;
    Ok(TrajectoryResult {
        n_iter: cfg.n_iter,
        thin,
        dim: model.dim(),
        records,
        tally,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;

    #[test]
    fn default_thinning_caps_points() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Trajectory,
            n_iter: 250_001,
            dt: 0.3,
            ..ExperimentConfig::default()
        };
        let t = run_trajectory(&cfg).unwrap();
        assert_eq!(t.thin, 3);
        assert!(t.records.len() as u64 <= MAX_TRAJECTORY_POINTS);
        assert_eq!(t.records[0].step, 3);
        assert_eq!(t.records[0].q.len(), 3);
    }

    #[test]
    fn short_runs_keep_every_state() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Trajectory,
            model: "sphere".into(),
            n_iter: 10,
            ..ExperimentConfig::default()
        };
        let t = run_trajectory(&cfg).unwrap();
        assert_eq!(t.thin, 1);
        assert_eq!(t.records.len(), 10);
    }
}
