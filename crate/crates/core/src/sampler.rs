//! Markov chains on the cotangent bundle: constrained HMC/MALA and GHMC.
//!
//! Every transition draws from [`ChainRng`] only, so a chain is a
//! deterministic function of its seed and stream index.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{cotangent_project_with, OuPropagator, PhasePoint};
use crate::integrator::{psi_rev_k_with, Classification, RattleConfig};
use crate::models::ConstraintModel;
use crate::rng::{stream_rng, ChainRng};

/// Truncated momentum sampling gives up after this many draws.
pub const TRUNCATION_BUDGET: u64 = 1_000_000;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Full momentum refresh, `K` RATTLE sub-steps, Metropolis.
    Hmc,
    /// HMC with a single forced RATTLE step.
    Mala,
    /// Midpoint Ornstein–Uhlenbeck half steps around the Metropolized RATTLE step.
    GhmcStrang { gamma: f64 },
    /// Partial refresh `p ← Π(α p + √(1−α²) M^{1/2} G)` before the Metropolized step.
    GhmcLieTrotter { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub scheme: Scheme,
    /// RATTLE sub-steps per proposal.
    pub k_steps: usize,
    /// Cap `R` on `‖p‖²` for truncated momentum refresh (HMC and MALA only).
    pub momentum_cap: Option<f64>,
    pub seed: u64,
    pub rattle: RattleConfig,
}

impl SamplerConfig {
    pub fn new(scheme: Scheme, rattle: RattleConfig, seed: u64) -> Self {
        Self {
            scheme,
            k_steps: 1,
            momentum_cap: None,
            seed,
            rattle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rattle.validate()?;
        if self.k_steps == 0 {
            return Err(Error::InvalidConfig("k-steps must be at least 1".into()));
        }
        match self.scheme {
            Scheme::Mala if self.k_steps != 1 || !self.rattle.use_forces => {
                return Err(Error::InvalidConfig(
                    "MALA uses a single RATTLE step with forces".into(),
                ))
            }
            Scheme::GhmcStrang { gamma } if !(gamma >= 0.0) || !gamma.is_finite() => {
                return Err(Error::InvalidConfig(format!("friction must be >= 0 (got {gamma})")))
            }
            Scheme::GhmcLieTrotter { alpha } if !(0.0..=1.0).contains(&alpha) => {
                return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1] (got {alpha})")))
            }
            _ => {}
        }
        if let Some(cap) = self.momentum_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidConfig(format!("momentum cap must be positive (got {cap})")));
            }
            if !matches!(self.scheme, Scheme::Hmc | Scheme::Mala) {
                return Err(Error::InvalidConfig(
                    "momentum cap applies to full refresh schemes (hmc, mala, mrw)".into(),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Outcomes and tallies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepOutcome {
    Accepted,
    NewtonForward,
    NewtonReverse,
    NonReversible,
    Metropolis,
}

impl StepOutcome {
    pub const ALL: [StepOutcome; 5] = [
        StepOutcome::Accepted,
        StepOutcome::NewtonForward,
        StepOutcome::NewtonReverse,
        StepOutcome::NonReversible,
        StepOutcome::Metropolis,
    ];

    /// Integer code used in trajectory files.
    pub fn code(self) -> u8 {
        match self {
            StepOutcome::Accepted => 0,
            StepOutcome::NewtonForward => 1,
            StepOutcome::NewtonReverse => 2,
            StepOutcome::NonReversible => 3,
            StepOutcome::Metropolis => 4,
        }
    }

    pub fn is_rejection(self) -> bool {
        self != StepOutcome::Accepted
    }
}

/// Counts of step outcomes; sums to the number of attempts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RejectionTally {
    pub accepted: u64,
    pub newton_forward: u64,
    pub newton_reverse: u64,
    pub non_reversible: u64,
    pub metropolis: u64,
}

impl RejectionTally {
    pub fn record(&mut self, outcome: StepOutcome) {
        *self.slot(outcome) += 1;
    }

    fn slot(&mut self, outcome: StepOutcome) -> &mut u64 {
        match outcome {
            StepOutcome::Accepted => &mut self.accepted,
            StepOutcome::NewtonForward => &mut self.newton_forward,
            StepOutcome::NewtonReverse => &mut self.newton_reverse,
            StepOutcome::NonReversible => &mut self.non_reversible,
            StepOutcome::Metropolis => &mut self.metropolis,
        }
    }

    pub fn count(&self, outcome: StepOutcome) -> u64 {
        match outcome {
            StepOutcome::Accepted => self.accepted,
            StepOutcome::NewtonForward => self.newton_forward,
            StepOutcome::NewtonReverse => self.newton_reverse,
            StepOutcome::NonReversible => self.non_reversible,
            StepOutcome::Metropolis => self.metropolis,
        }
    }

    pub fn total(&self) -> u64 {
        self.accepted + self.rejected()
    }

    pub fn rejected(&self) -> u64 {
        self.newton_forward + self.newton_reverse + self.non_reversible + self.metropolis
    }

    pub fn rate(&self, outcome: StepOutcome) -> f64 {
        self.count(outcome) as f64 / self.total().max(1) as f64
    }

    pub fn rejection_rate(&self) -> f64 {
        self.rejected() as f64 / self.total().max(1) as f64
    }

    pub fn merge(&mut self, other: &RejectionTally) {
        for o in StepOutcome::ALL {
            *self.slot(o) += other.count(o);
        }
    }
}

// ---------------------------------------------------------------------------
// Chain state
// ---------------------------------------------------------------------------

/// Current point of one chain plus its private generator and cached forces.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub x: PhasePoint,
    pub step_index: u64,
    rng: ChainRng,
    potential: f64,
    proposal_gradient: DVector<f64>,
}

impl ChainState {
    pub fn new(model: &dyn ConstraintModel, rattle: &RattleConfig, x: PhasePoint, rng: ChainRng) -> Self {
        let potential = model.potential(&x.q);
        let proposal_gradient = rattle.proposal_gradient(model, &x.q);
        Self {
            x,
            step_index: 0,
            rng,
            potential,
            proposal_gradient,
        }
    }

    /// The model's default position at rest, on stream 0 of `cfg.seed`.
    pub fn initial(model: &dyn ConstraintModel, cfg: &SamplerConfig) -> Self {
        Self::initial_on_stream(model, cfg, 0)
    }

    pub fn initial_on_stream(model: &dyn ConstraintModel, cfg: &SamplerConfig, stream: u64) -> Self {
        let x = PhasePoint::at_rest(model.initial_position());
        Self::new(model, &cfg.rattle, x, stream_rng(cfg.seed, stream))
    }

    pub fn rng_mut(&mut self) -> &mut ChainRng {
        &mut self.rng
    }
}

// ---------------------------------------------------------------------------
// Momentum sampling
// ---------------------------------------------------------------------------

fn standard_normal(rng: &mut ChainRng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Draw from the Gaussian `κ_q` on the cotangent space at `q`.
pub fn sample_tangent_gaussian(
    model: &dyn ConstraintModel,
    q: &DVector<f64>,
    rng: &mut ChainRng,
) -> Result<DVector<f64>> {
    let g = standard_normal(rng, model.dim());
    let jac = model.constraint_jacobian(q);
    cotangent_project_with(model.mass(), &jac, &model.mass().apply_sqrt(&g), crate::geometry::DEFAULT_CONDITION_LIMIT)
}

/// Draw from `κ_q` conditioned on `‖p‖² ≤ cap`, by rejection. Returns the
/// momentum and the number of draws used.
pub fn sample_tangent_gaussian_truncated(
    model: &dyn ConstraintModel,
    q: &DVector<f64>,
    cap: f64,
    rng: &mut ChainRng,
) -> Result<(DVector<f64>, u64)> {
    if !(cap > 0.0) {
        return Err(Error::InvalidConfig(format!("momentum cap must be positive (got {cap})")));
    }
    for trial in 1..=TRUNCATION_BUDGET {
        let p = sample_tangent_gaussian(model, q, rng)?;
        if p.norm_squared() <= cap {
            return Ok((p, trial));
        }
    }
    Err(Error::RejectionBudgetExceeded {
        trials: TRUNCATION_BUDGET,
    })
}

// ---------------------------------------------------------------------------
// Transitions
// ---------------------------------------------------------------------------

/// A configured sampler bound to a model.
pub struct Sampler<'a> {
    model: &'a dyn ConstraintModel,
    cfg: SamplerConfig,
    ou: Option<OuPropagator>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a dyn ConstraintModel, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let ou = match cfg.scheme {
            Scheme::GhmcStrang { gamma } => Some(OuPropagator::new(model.mass(), gamma, cfg.rattle.dt)),
            _ => None,
        };
        Ok(Self { model, cfg, ou })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn model(&self) -> &'a dyn ConstraintModel {
        self.model
    }

    pub fn initial_state(&self) -> ChainState {
        ChainState::initial(self.model, &self.cfg)
    }

    /// One transition of the configured scheme.
    pub fn step(&self, state: &mut ChainState) -> Result<StepOutcome> {
        let outcome = match self.cfg.scheme {
            Scheme::Hmc | Scheme::Mala => {
                let p = match self.cfg.momentum_cap {
                    Some(cap) => sample_tangent_gaussian_truncated(self.model, &state.x.q, cap, &mut state.rng)?.0,
                    None => sample_tangent_gaussian(self.model, &state.x.q, &mut state.rng)?,
                };
                state.x.p = p;
                self.metropolized_move(state)?
            }
            Scheme::GhmcLieTrotter { alpha } => {
                let g = standard_normal(&mut state.rng, self.model.dim());
                let mass = self.model.mass();
                let mixed = &state.x.p * alpha + mass.apply_sqrt(&g) * (1.0 - alpha * alpha).sqrt();
                let jac = self.model.constraint_jacobian(&state.x.q);
                state.x.p = cotangent_project_with(mass, &jac, &mixed, crate::geometry::DEFAULT_CONDITION_LIMIT)?;
                let outcome = self.metropolized_move(state)?;
                state.x.p = -&state.x.p;
                outcome
            }
            Scheme::GhmcStrang { .. } => {
                self.ou_half_step(state)?;
                let outcome = self.metropolized_move(state)?;
                state.x.p = -&state.x.p;
                self.ou_half_step(state)?;
                outcome
            }
        };
        state.step_index += 1;
        Ok(outcome)
    }

    fn ou_half_step(&self, state: &mut ChainState) -> Result<()> {
        let ou = self.ou.as_ref().expect("Strang splitting carries its propagator");
        let g = standard_normal(&mut state.rng, self.model.dim());
        let jac = self.model.constraint_jacobian(&state.x.q);
        state.x.p = ou.step(self.model.mass(), &jac, &state.x.p, &g)?;
        Ok(())
    }

    /// Reverse-checked RATTLE proposal from `state.x` followed by the
    /// Metropolis test. On any rejection the state is left untouched.
    fn metropolized_move(&self, state: &mut ChainState) -> Result<StepOutcome> {
        let model = self.model;
        let result = psi_rev_k_with(
            model,
            &state.x,
            &state.proposal_gradient,
            &self.cfg.rattle,
            self.cfg.k_steps,
        )?;
        let proposal = match result.classification {
            Classification::Proposed(y) => y,
            Classification::NewtonForwardFail => return Ok(StepOutcome::NewtonForward),
            Classification::NewtonReverseFail => return Ok(StepOutcome::NewtonReverse),
            Classification::NonReversible => return Ok(StepOutcome::NonReversible),
        };
        let h0 = state.potential + model.mass().kinetic_energy(&state.x.p);
        let v1 = model.potential(&proposal.q);
        let h1 = v1 + model.mass().kinetic_energy(&proposal.p);
        let u: f64 = state.rng.random();
        if u.ln() <= h0 - h1 {
            state.x = proposal;
            state.potential = v1;
            state.proposal_gradient = result
                .proposal_gradient
                .expect("proposed steps carry their end gradient");
            Ok(StepOutcome::Accepted)
        } else {
            Ok(StepOutcome::Metropolis)
        }
    }

    /// Runs `n_iter` transitions. `sink` receives `(step_index, point, outcome)`
    /// after every `thin`-th step.
    pub fn run<F>(&self, state: &mut ChainState, n_iter: u64, thin: u64, mut sink: F) -> Result<RejectionTally>
    where
        F: FnMut(u64, &PhasePoint, StepOutcome),
    {
        if n_iter == 0 {
            return Err(Error::InvalidConfig("number of iterations must be at least 1".into()));
        }
        if thin == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        let mut tally = RejectionTally::default();
        for _ in 0..n_iter {
            let outcome = self.step(state)?;
            tally.record(outcome);
            if state.step_index % thin == 0 {
                sink(state.step_index, &state.x, outcome);
            }
        }
        Ok(tally)
    }
}

/// One constrained HMC or MALA transition.
pub fn hmc_step(model: &dyn ConstraintModel, state: &mut ChainState, cfg: &SamplerConfig) -> Result<StepOutcome> {
    if !matches!(cfg.scheme, Scheme::Hmc | Scheme::Mala) {
        return Err(Error::InvalidConfig("hmc_step needs the hmc or mala scheme".into()));
    }
    Sampler::new(model, *cfg)?.step(state)
}

/// One constrained GHMC transition (either splitting).
pub fn ghmc_step(model: &dyn ConstraintModel, state: &mut ChainState, cfg: &SamplerConfig) -> Result<StepOutcome> {
    if !matches!(cfg.scheme, Scheme::GhmcStrang { .. } | Scheme::GhmcLieTrotter { .. }) {
        return Err(Error::InvalidConfig("ghmc_step needs a GHMC scheme".into()));
    }
    Sampler::new(model, *cfg)?.step(state)
}

/// Runs a chain from the model's default start on stream 0 of `cfg.seed`.
pub fn run_chain<F>(
    model: &dyn ConstraintModel,
    cfg: &SamplerConfig,
    n_iter: u64,
    thin: u64,
    sink: F,
) -> Result<(ChainState, RejectionTally)>
where
    F: FnMut(u64, &PhasePoint, StepOutcome),
{
    let sampler = Sampler::new(model, *cfg)?;
    let mut state = sampler.initial_state();
    let tally = sampler.run(&mut state, n_iter, thin, sink)?;
    Ok((state, tally))
}
