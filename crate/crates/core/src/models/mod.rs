//! Constraint models: the manifold `{q : ξ(q) = 0}`, the potential `V` and
//! the mass tensor, plus the bundled examples and a name-keyed registry.

mod circle;
mod sphere;
mod torus;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::MassMatrix;

pub use circle::{circle_model, CircleModel};
pub use sphere::{sphere_model, SphereModel};
pub use torus::{
    angle_coordinates, reference_phi_density, reference_phi_probability, torus_model, torus_point, TorusModel,
    TorusParams, TorusPotential,
};

/// A submanifold of `ℝ^d` of codimension `m` with a target potential.
///
/// Gradients are analytic. `constraint_jacobian` returns a `d × m` matrix
/// whose columns are `∇ξ_i`. Implementations may return non-finite values
/// outside their domain; the solvers treat those as failures.
pub trait ConstraintModel: Send + Sync {
    fn name(&self) -> &str;

    /// Ambient dimension `d`.
    fn dim(&self) -> usize;

    /// Number of constraints `m`.
    fn n_constraints(&self) -> usize;

    fn constraint(&self, q: &DVector<f64>) -> DVector<f64>;

    fn constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64>;

    fn potential(&self, q: &DVector<f64>) -> f64;

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64>;

    fn mass(&self) -> &MassMatrix;

    /// Default starting position on the manifold.
    fn initial_position(&self) -> DVector<f64>;
}

/// Names accepted by [`model_by_name`].
pub const MODEL_NAMES: [&str; 5] = [
    "circle",
    "torus-zero",
    "torus-quadratic",
    "torus-doublewell",
    "sphere",
];

/// Default potential constants of the torus variants.
pub const DEFAULT_QUADRATIC_K: f64 = 1.0;
pub const DEFAULT_DOUBLE_WELL_K: f64 = 5.0;

/// Parameters of the torus variant called `name`, if it is one.
pub fn torus_params_by_name(name: &str, k: Option<f64>) -> Option<TorusParams> {
    let potential = match name {
        "torus-zero" => TorusPotential::Zero,
        "torus-quadratic" => TorusPotential::Quadratic(k.unwrap_or(DEFAULT_QUADRATIC_K)),
        "torus-doublewell" => TorusPotential::DoubleWell(k.unwrap_or(DEFAULT_DOUBLE_WELL_K)),
        _ => return None,
    };
    Some(TorusParams {
        potential,
        ..TorusParams::default()
    })
}

/// Looks up a bundled model. `k` overrides the potential constant of the
/// torus variants that have one.
pub fn model_by_name(name: &str, k: Option<f64>) -> Result<Box<dyn ConstraintModel>> {
    if let Some(params) = torus_params_by_name(name, k) {
        return Ok(Box::new(torus_model(params)?));
    }
    match name {
        "circle" => Ok(Box::new(circle_model())),
        "sphere" => Ok(Box::new(sphere_model())),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}
