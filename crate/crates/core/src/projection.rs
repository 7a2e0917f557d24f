//! Newton projection of a position back onto the manifold along `M⁻¹∇ξ(q)`.
//!
//! Given `q ∈ ℳ` and a free-flight position `q̃`, find `θ ∈ ℝ^m` such that
//! `ξ(q̃ + M⁻¹∇ξ(q) θ) = 0`, starting from `θ = 0`. Whether the iteration
//! succeeds is what decides if a RATTLE step is admissible, so the outcome
//! must be a deterministic function of `(q, q̃, config)`.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{gram_from_jacobians, DEFAULT_CONDITION_LIMIT};
use crate::models::ConstraintModel;

/// Stopping rule for the Newton loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvergenceCriterion {
    /// `max(‖θ − θ_old‖, ‖ξ(q̃ + M⁻¹∇ξ(q)θ)‖) < ε`
    #[default]
    IncrementAndResidual,
    /// `‖θ − θ_old‖ ‖∇ξ(q)‖ ≤ ε`, an absolute error on positions.
    ScaledIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub condition_limit: f64,
    pub criterion: ConvergenceCriterion,
    /// Converged multipliers larger than this are reported as failures.
    pub max_multiplier: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-12,
            condition_limit: DEFAULT_CONDITION_LIMIT,
            criterion: ConvergenceCriterion::IncrementAndResidual,
            max_multiplier: 1e6,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.max_iterations == 0 {
            return Err(crate::Error::InvalidConfig(
                "Newton max_iterations must be at least 1".into(),
            ));
        }
        if !(self.tolerance > 0.0) || !(self.condition_limit > 1.0) || !(self.max_multiplier > 0.0) {
            return Err(crate::Error::InvalidConfig(
                "Newton tolerance, condition limit and multiplier cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionStatus {
    Converged,
    MaxIterations,
    SingularJacobian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    pub status: ProjectionStatus,
    /// Multiplier; meaningful only when converged.
    pub theta: DVector<f64>,
    pub iterations: usize,
    /// `‖ξ‖` at the last iterate.
    pub residual: f64,
}

impl ProjectionOutcome {
    pub fn is_converged(&self) -> bool {
        self.status == ProjectionStatus::Converged
    }
}

/// Runs the projection from the position `q` (on the manifold) for the free
/// position `q̃`.
pub fn newton_project(
    model: &dyn ConstraintModel,
    q: &DVector<f64>,
    q_tilde: &DVector<f64>,
    cfg: &NewtonConfig,
) -> ProjectionOutcome {
    let jac_q = model.constraint_jacobian(q);
    newton_project_with(model, &jac_q, q_tilde, cfg)
}

/// Same as [`newton_project`] with `∇ξ(q)` already evaluated.
pub fn newton_project_with(
    model: &dyn ConstraintModel,
    jac_q: &DMatrix<f64>,
    q_tilde: &DVector<f64>,
    cfg: &NewtonConfig,
) -> ProjectionOutcome {
    let mass = model.mass();
    let direction = mass.apply_inverse_mat(jac_q);
    let jac_norm = jac_q.norm();

    let mut theta = DVector::zeros(jac_q.ncols());
    let mut q_hat = q_tilde.clone();
    let mut xi = model.constraint(&q_hat);
    let mut residual = xi.norm();

    for k in 1..=cfg.max_iterations {
        let jac = gram_from_jacobians(mass, &model.constraint_jacobian(&q_hat), jac_q);
        let delta = match jac.solve(&xi, cfg.condition_limit) {
            Ok(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => {
                return ProjectionOutcome {
                    status: ProjectionStatus::SingularJacobian,
                    theta,
                    iterations: k,
                    residual,
                }
            }
        };
        theta -= &delta;
        q_hat = q_tilde + &direction * &theta;
        xi = model.constraint(&q_hat);
        residual = xi.norm();

        let eta = match cfg.criterion {
            ConvergenceCriterion::IncrementAndResidual => delta.norm().max(residual),
            ConvergenceCriterion::ScaledIncrement => delta.norm() * jac_norm,
        };
        if eta < cfg.tolerance {
            let status = if theta.norm() > cfg.max_multiplier {
                ProjectionStatus::MaxIterations
            } else {
                debug_assert!(
                    cfg.criterion != ConvergenceCriterion::IncrementAndResidual
                        || residual <= cfg.tolerance
                );
                ProjectionStatus::Converged
            };
            return ProjectionOutcome {
                status,
                theta,
                iterations: k,
                residual,
            };
        }
    }
    ProjectionOutcome {
        status: ProjectionStatus::MaxIterations,
        theta,
        iterations: cfg.max_iterations,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{circle_model, torus_model, TorusParams};
    use nalgebra::dvector;

    #[test]
    fn on_manifold_converges_immediately() {
        let torus = torus_model(TorusParams::default()).unwrap();
        let q = dvector![1.5, 0.0, 0.0];
        let out = newton_project(&torus, &q, &q, &NewtonConfig::default());
        assert_eq!(out.status, ProjectionStatus::Converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.theta[0], 0.0);
    }

    #[test]
    fn circle_matches_analytic_root() {
        let circle = circle_model();
        let q = dvector![1.0, 0.0];
        let dt = 0.5;
        for &u in &[0.3, 1.0, -1.5, 1.9] {
            let q_tilde = &q + dvector![0.0, u] * dt;
            let out = newton_project(&circle, &q, &q_tilde, &NewtonConfig::default());
            assert!(out.is_converged(), "u = {u}");
            let lambda = circle.analytic_multiplier(u.abs(), dt).unwrap();
            assert!((out.theta[0] - dt * lambda).abs() < 1e-10);
        }
    }

    #[test]
    fn circle_without_real_root_fails() {
        let circle = circle_model();
        let q = dvector![1.0, 0.0];
        let dt = 0.5;
        for &u in &[2.01, 2.5, -3.0, 10.0] {
            let q_tilde = &q + dvector![0.0, u] * dt;
            let out = newton_project(&circle, &q, &q_tilde, &NewtonConfig::default());
            assert!(!out.is_converged(), "u = {u}");
        }
    }

    #[test]
    fn torus_small_offset_reaches_tolerance() {
        let torus = torus_model(TorusParams::default()).unwrap();
        let q = dvector![1.5, 0.0, 0.0];
        let q_tilde = &q + dvector![0.05, 0.05, 0.0];
        let out = newton_project(&torus, &q, &q_tilde, &NewtonConfig::default());
        assert!(out.is_converged());
        let projected = &q_tilde + torus.constraint_jacobian(&q) * &out.theta;
        assert!(torus.constraint(&projected)[0].abs() <= 1e-12);
    }

    #[test]
    fn scaled_criterion_also_converges() {
        let torus = torus_model(TorusParams::default()).unwrap();
        let q = dvector![1.5, 0.0, 0.0];
        let q_tilde = &q + dvector![0.02, 0.1, -0.05];
        let cfg = NewtonConfig {
            criterion: ConvergenceCriterion::ScaledIncrement,
            ..NewtonConfig::default()
        };
        let out = newton_project(&torus, &q, &q_tilde, &cfg);
        assert!(out.is_converged());
        assert!(out.residual < 1e-12);
    }

    #[test]
    fn singular_jacobian_detected() {
        // q̃ a quarter turn away: its gradient is orthogonal to the projection direction
        let circle = circle_model();
        let q = dvector![1.0, 0.0];
        let q_tilde = dvector![0.0, 1.0];
        let out = newton_project(&circle, &q, &q_tilde, &NewtonConfig::default());
        assert_eq!(out.status, ProjectionStatus::SingularJacobian);
    }

    #[test]
    fn deterministic() {
        let torus = torus_model(TorusParams::default()).unwrap();
        let q = dvector![1.5, 0.0, 0.0];
        let q_tilde = &q + dvector![0.3, 0.7, 0.2];
        let a = newton_project(&torus, &q, &q_tilde, &NewtonConfig::default());
        let b = newton_project(&torus, &q, &q_tilde, &NewtonConfig::default());
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(NewtonConfig::default().validate().is_ok());
        let bad = NewtonConfig {
            max_iterations: 0,
            ..NewtonConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
