//! RATTLE with momentum reversal and the reverse projection check.
//!
//! `rattle_one_step` is the map `(q, p) ↦ (q¹, −p¹)`. `psi_rev` wraps it in
//! the reverse check: run RATTLE again from the proposal and keep the move
//! only if it lands back on the starting position. Every call is classified
//! as exactly one of [`Classification`]'s variants; anything but `Proposed`
//! means the caller keeps its current state.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{momentum_multiplier_with, PhasePoint};
use crate::models::ConstraintModel;
use crate::projection::{newton_project_with, NewtonConfig, ProjectionOutcome};

/// How much of the reverse projection check is performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReverseCheck {
    /// Reverse Newton must converge and return to the starting position.
    #[default]
    Full,
    /// Reverse Newton must converge; the returned position is not compared.
    PartialNoPositionCheck,
    /// No reverse step at all.
    NoneAtAll,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RattleConfig {
    pub dt: f64,
    /// Tolerance on `‖q̂ − q‖` in the reverse check.
    pub eta_rev: f64,
    /// Use `∇V` in the proposal; `false` gives a zero-force random-walk proposal.
    pub use_forces: bool,
    pub reverse_check: ReverseCheck,
    pub newton: NewtonConfig,
}

impl Default for RattleConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            eta_rev: 1e-12,
            use_forces: true,
            reverse_check: ReverseCheck::Full,
            newton: NewtonConfig::default(),
        }
    }
}

impl RattleConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("timestep must be positive (got {})", self.dt)));
        }
        if !(self.eta_rev > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "reverse-check tolerance must be positive (got {})",
                self.eta_rev
            )));
        }
        self.newton.validate()
    }

    /// The gradient driving the proposal at `q`: `∇V(q)`, or zero for random-walk proposals.
    pub fn proposal_gradient(&self, model: &dyn ConstraintModel, q: &DVector<f64>) -> DVector<f64> {
        if self.use_forces {
            model.potential_gradient(q)
        } else {
            DVector::zeros(model.dim())
        }
    }
}

/// A successful RATTLE step.
#[derive(Debug, Clone)]
pub struct RattleStep {
    /// `(q¹, −p¹)`, momentum already reversed.
    pub point: PhasePoint,
    /// `λ^{1/2} = θ / Δt`
    pub half_multiplier: DVector<f64>,
    /// `λ¹`, the momentum-constraint multiplier at `q¹`.
    pub end_multiplier: DVector<f64>,
    /// Proposal gradient evaluated at `q¹`.
    pub end_gradient: DVector<f64>,
    pub projection: ProjectionOutcome,
}

#[derive(Debug, Clone)]
pub enum RattleOutcome {
    Step(RattleStep),
    NewtonFailed(ProjectionOutcome),
}

struct PositionStage {
    q1: DVector<f64>,
    p_half: DVector<f64>,
    theta: ProjectionOutcome,
}

fn position_stage(
    model: &dyn ConstraintModel,
    x: &PhasePoint,
    grad_q: &DVector<f64>,
    jac_q: &DMatrix<f64>,
    cfg: &RattleConfig,
) -> std::result::Result<PositionStage, ProjectionOutcome> {
    let dt = cfg.dt;
    let mass = model.mass();
    let p_kick = if cfg.use_forces {
        &x.p - grad_q * (0.5 * dt)
    } else {
        x.p.clone()
    };
    let q_free = &x.q + mass.apply_inverse(&p_kick) * dt;
    let outcome = newton_project_with(model, jac_q, &q_free, &cfg.newton);
    if !outcome.is_converged() {
        return Err(outcome);
    }
    let q1 = &q_free + mass.apply_inverse_mat(jac_q) * &outcome.theta;
    let p_half = p_kick + jac_q * &outcome.theta / dt;
    Ok(PositionStage {
        q1,
        p_half,
        theta: outcome,
    })
}

fn complete_step(
    model: &dyn ConstraintModel,
    stage: PositionStage,
    cfg: &RattleConfig,
) -> Result<RattleStep> {
    let dt = cfg.dt;
    let end_gradient = cfg.proposal_gradient(model, &stage.q1);
    let p_free = if cfg.use_forces {
        &stage.p_half - &end_gradient * (0.5 * dt)
    } else {
        stage.p_half.clone()
    };
    let jac1 = model.constraint_jacobian(&stage.q1);
    let end_multiplier = momentum_multiplier_with(model.mass(), &jac1, &p_free, cfg.newton.condition_limit)?;
    let p1 = p_free + &jac1 * &end_multiplier;
    Ok(RattleStep {
        point: PhasePoint::new(stage.q1, -p1),
        half_multiplier: &stage.theta.theta / dt,
        end_multiplier,
        end_gradient,
        projection: stage.theta,
    })
}

/// One RATTLE step followed by momentum reversal.
///
/// Returns `Err` only when the momentum projection at `q¹` is singular, which
/// means the manifold assumptions are violated.
pub fn rattle_one_step(
    model: &dyn ConstraintModel,
    x: &PhasePoint,
    cfg: &RattleConfig,
) -> Result<RattleOutcome> {
    let grad = cfg.proposal_gradient(model, &x.q);
    rattle_one_step_with(model, x, &grad, cfg)
}

/// [`rattle_one_step`] with the proposal gradient at `x.q` supplied by the caller.
pub fn rattle_one_step_with(
    model: &dyn ConstraintModel,
    x: &PhasePoint,
    grad_q: &DVector<f64>,
    cfg: &RattleConfig,
) -> Result<RattleOutcome> {
    let jac_q = model.constraint_jacobian(&x.q);
    match position_stage(model, x, grad_q, &jac_q, cfg) {
        Ok(stage) => Ok(RattleOutcome::Step(complete_step(model, stage, cfg)?)),
        Err(fail) => Ok(RattleOutcome::NewtonFailed(fail)),
    }
}

// ---------------------------------------------------------------------------
// Reverse-checked map
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Proposed(PhasePoint),
    NewtonForwardFail,
    NewtonReverseFail,
    NonReversible,
}

impl Classification {
    pub fn is_proposed(&self) -> bool {
        matches!(self, Classification::Proposed(_))
    }
}

#[derive(Debug, Clone)]
pub struct RattleStepResult {
    pub classification: Classification,
    /// Output of the forward RATTLE step when it succeeded.
    pub forward_point: Option<PhasePoint>,
    /// `(λ^{1/2}, λ¹)` of the forward step.
    pub multipliers: Option<(DVector<f64>, DVector<f64>)>,
    /// Proposal gradient at the forward point, reusable once the move is accepted.
    pub proposal_gradient: Option<DVector<f64>>,
}

impl RattleStepResult {
    fn failed(classification: Classification) -> Self {
        Self {
            classification,
            forward_point: None,
            multipliers: None,
            proposal_gradient: None,
        }
    }
}

/// The reverse-checked map: returns the proposal `Ψ_Δt(q, p)` when the
/// forward and reverse steps are well posed and compose to the identity.
pub fn psi_rev(model: &dyn ConstraintModel, x: &PhasePoint, cfg: &RattleConfig) -> Result<RattleStepResult> {
    let grad = cfg.proposal_gradient(model, &x.q);
    psi_rev_with(model, x, &grad, cfg)
}

/// [`psi_rev`] with the proposal gradient at `x.q` supplied by the caller.
pub fn psi_rev_with(
    model: &dyn ConstraintModel,
    x: &PhasePoint,
    grad_q: &DVector<f64>,
    cfg: &RattleConfig,
) -> Result<RattleStepResult> {
    let forward = match rattle_one_step_with(model, x, grad_q, cfg)? {
        RattleOutcome::Step(step) => step,
        RattleOutcome::NewtonFailed(_) => {
            return Ok(RattleStepResult::failed(Classification::NewtonForwardFail))
        }
    };

    let classification = match cfg.reverse_check {
        ReverseCheck::NoneAtAll => Classification::Proposed(forward.point.clone()),
        check => {
            // Only the position of the reverse step enters the check.
            let jac1 = model.constraint_jacobian(&forward.point.q);
            match position_stage(model, &forward.point, &forward.end_gradient, &jac1, cfg) {
                Err(_) => Classification::NewtonReverseFail,
                Ok(back) => {
                    let gap = (&back.q1 - &x.q).norm();
                    if check == ReverseCheck::Full && !(gap < cfg.eta_rev) {
                        Classification::NonReversible
                    } else {
                        Classification::Proposed(forward.point.clone())
                    }
                }
            }
        }
    };

    Ok(RattleStepResult {
        classification,
        forward_point: Some(forward.point),
        multipliers: Some((forward.half_multiplier, forward.end_multiplier)),
        proposal_gradient: Some(forward.end_gradient),
    })
}

/// `K` reverse-checked RATTLE steps with a single momentum reversal at the end.
///
/// Each sub-step continues the trajectory (the reversal of the previous
/// sub-step is undone), so the composite map is itself an involution. A
/// failure in any sub-step aborts with that sub-step's classification.
pub fn psi_rev_k(
    model: &dyn ConstraintModel,
    x: &PhasePoint,
    cfg: &RattleConfig,
    k: usize,
) -> Result<RattleStepResult> {
    let grad = cfg.proposal_gradient(model, &x.q);
    psi_rev_k_with(model, x, &grad, cfg, k)
}

pub fn psi_rev_k_with(
    model: &dyn ConstraintModel,
    x: &PhasePoint,
    grad_q: &DVector<f64>,
    cfg: &RattleConfig,
    k: usize,
) -> Result<RattleStepResult> {
    if k == 0 {
        return Err(Error::InvalidConfig("number of RATTLE sub-steps must be at least 1".into()));
    }
    let mut result = psi_rev_with(model, x, grad_q, cfg)?;
    for _ in 1..k {
        let Classification::Proposed(point) = &result.classification else {
            return Ok(result);
        };
        let grad = result
            .proposal_gradient
            .take()
            .expect("proposed steps carry their end gradient");
        result = psi_rev_with(model, &point.reversed(), &grad, cfg)?;
    }
    Ok(result)
}
