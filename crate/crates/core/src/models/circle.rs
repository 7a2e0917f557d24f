use nalgebra::{DMatrix, DVector};

use super::ConstraintModel;
use crate::geometry::MassMatrix;

/// Unit circle `ξ(q) = ‖q‖² − 1` in `ℝ²`, identity mass, zero potential.
///
/// Solving the position constraint of one RATTLE step reduces to a quadratic
/// in the multiplier, which makes this model an exact oracle for the Newton
/// projection.
#[derive(Debug, Clone)]
pub struct CircleModel {
    mass: MassMatrix,
}

pub fn circle_model() -> CircleModel {
    CircleModel {
        mass: MassMatrix::identity(2),
    }
}

impl CircleModel {
    /// Smallest-magnitude root `λ = (−1 + √(1 − Δt² ‖p‖²)) / (2Δt)` of the
    /// position constraint for a tangent momentum of norm `p_norm`, or `None`
    /// when `Δt ‖p‖ > 1` and no real root exists.
    ///
    /// The Newton multiplier `θ` of the projection equals `Δt λ`.
    pub fn analytic_multiplier(&self, p_norm: f64, dt: f64) -> Option<f64> {
        let disc = 1.0 - dt * dt * p_norm * p_norm;
        if disc < 0.0 {
            return None;
        }
        Some((-1.0 + disc.sqrt()) / (2.0 * dt))
    }
}

impl ConstraintModel for CircleModel {
    fn name(&self) -> &str {
        "circle"
    }

    fn dim(&self) -> usize {
        2
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, q.norm_squared() - 1.0)
    }

    fn constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[2.0 * q[0], 2.0 * q[1]])
    }

    fn potential(&self, _q: &DVector<f64>) -> f64 {
        0.0
    }

    fn potential_gradient(&self, _q: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(2)
    }

    fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    fn initial_position(&self) -> DVector<f64> {
        DVector::from_column_slice(&[1.0, 0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_values() {
        let c = circle_model();
        assert_eq!(c.analytic_multiplier(0.0, 0.3), Some(0.0));
        let dt = 0.25;
        assert_eq!(c.analytic_multiplier(1.0 / dt, dt), Some(-1.0 / (2.0 * dt)));
        assert_eq!(c.analytic_multiplier(1.01 / dt, dt), None);
    }
}
