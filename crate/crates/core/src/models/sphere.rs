use nalgebra::{DMatrix, DVector};

use super::ConstraintModel;
use crate::geometry::MassMatrix;

/// Unit sphere `ξ(q) = ‖q‖² − 1` in `ℝ³` with zero potential.
///
/// Extra geometry for generalization tests; accepts a non-identity mass.
#[derive(Debug, Clone)]
pub struct SphereModel {
    mass: MassMatrix,
}

pub fn sphere_model() -> SphereModel {
    SphereModel {
        mass: MassMatrix::identity(3),
    }
}

impl SphereModel {
    pub fn with_mass(mass: MassMatrix) -> Self {
        assert_eq!(mass.dim(), 3, "sphere lives in R^3");
        Self { mass }
    }
}

impl ConstraintModel for SphereModel {
    fn name(&self) -> &str {
        "sphere"
    }

    fn dim(&self) -> usize {
        3
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, q.norm_squared() - 1.0)
    }

    fn constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 1, (q * 2.0).as_slice())
    }

    fn potential(&self, _q: &DVector<f64>) -> f64 {
        0.0
    }

    fn potential_gradient(&self, _q: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(3)
    }

    fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    fn initial_position(&self) -> DVector<f64> {
        DVector::from_column_slice(&[0.0, 0.0, 1.0])
    }
}
