use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::ConstraintModel;
use crate::error::{Error, Result};
use crate::geometry::{MassMatrix, CONSTRAINT_TOLERANCE};

/// Points closer than this to the symmetry axis are outside the model domain.
const AXIS_EXCLUSION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TorusPotential {
    Zero,
    /// `V(q) = k |q|² / 2`
    Quadratic(f64),
    /// `V(x, y, z) = k (x² − R²)²`
    DoubleWell(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusParams {
    /// Major radius `R`.
    pub major: f64,
    /// Minor radius `r`.
    pub minor: f64,
    pub potential: TorusPotential,
}

impl TorusPotential {
    /// True when the potential vanishes identically, so the target is the
    /// uniform surface measure.
    pub fn is_zero(&self) -> bool {
        match *self {
            TorusPotential::Zero => true,
            TorusPotential::Quadratic(k) | TorusPotential::DoubleWell(k) => k == 0.0,
        }
    }
}

impl Default for TorusParams {
    fn default() -> Self {
        Self {
            major: 1.0,
            minor: 0.5,
            potential: TorusPotential::Zero,
        }
    }
}

/// Torus `ξ(q) = (R − √(x²+y²))² + z² − r²` in `ℝ³` with identity mass.
#[derive(Debug, Clone)]
pub struct TorusModel {
    params: TorusParams,
    name: &'static str,
    mass: MassMatrix,
}

pub fn torus_model(params: TorusParams) -> Result<TorusModel> {
    if !(params.minor > 0.0 && params.minor < params.major) {
        return Err(Error::InvalidParams(format!(
            "torus radii must satisfy 0 < r < R (got R = {}, r = {})",
            params.major, params.minor
        )));
    }
    let name = match params.potential {
        TorusPotential::Zero => "torus-zero",
        TorusPotential::Quadratic(_) => "torus-quadratic",
        TorusPotential::DoubleWell(_) => "torus-doublewell",
    };
    Ok(TorusModel {
        params,
        name,
        mass: MassMatrix::identity(3),
    })
}

impl TorusModel {
    pub fn params(&self) -> &TorusParams {
        &self.params
    }
}

impl ConstraintModel for TorusModel {
    fn name(&self) -> &str {
        self.name
    }

    fn dim(&self) -> usize {
        3
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        let rho = q[0].hypot(q[1]);
        let a = self.params.major - rho;
        DVector::from_element(1, a * a + q[2] * q[2] - self.params.minor * self.params.minor)
    }

    fn constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let rho = q[0].hypot(q[1]);
        if rho < AXIS_EXCLUSION {
            return DMatrix::from_element(3, 1, f64::NAN);
        }
        let c = -2.0 * (self.params.major - rho) / rho;
        DMatrix::from_column_slice(3, 1, &[c * q[0], c * q[1], 2.0 * q[2]])
    }

    fn potential(&self, q: &DVector<f64>) -> f64 {
        match self.params.potential {
            TorusPotential::Zero => 0.0,
            TorusPotential::Quadratic(k) => 0.5 * k * q.norm_squared(),
            TorusPotential::DoubleWell(k) => {
                let r2 = self.params.major * self.params.major;
                let w = q[0] * q[0] - r2;
                k * w * w
            }
        }
    }

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        match self.params.potential {
            TorusPotential::Zero => DVector::zeros(3),
            TorusPotential::Quadratic(k) => q * k,
            TorusPotential::DoubleWell(k) => {
                let r2 = self.params.major * self.params.major;
                DVector::from_column_slice(&[4.0 * k * q[0] * (q[0] * q[0] - r2), 0.0, 0.0])
            }
        }
    }

    fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    fn initial_position(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.params.major + self.params.minor, 0.0, 0.0])
    }
}

/// `((R + r cos φ) cos θ, (R + r cos φ) sin θ, r sin φ)`
pub fn torus_point(params: &TorusParams, theta: f64, phi: f64) -> DVector<f64> {
    let w = params.major + params.minor * phi.cos();
    DVector::from_column_slice(&[w * theta.cos(), w * theta.sin(), params.minor * phi.sin()])
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to TAU itself
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Angles `(θ, φ) ∈ [0, 2π)²` of a point on the torus.
pub fn angle_coordinates(q: &DVector<f64>, params: &TorusParams) -> Result<(f64, f64)> {
    let rho = q[0].hypot(q[1]);
    let a = params.major - rho;
    let residual = (a * a + q[2] * q[2] - params.minor * params.minor).abs();
    if residual > 10.0 * CONSTRAINT_TOLERANCE {
        return Err(Error::OffManifold { residual });
    }
    let theta = wrap_angle(q[1].atan2(q[0]));
    let phi = wrap_angle(q[2].atan2(rho - params.major));
    Ok((theta, phi))
}

/// Marginal density of `φ` under the uniform surface measure,
/// `m(φ) = (1 + (r/R) cos φ) / (2π)`.
pub fn reference_phi_density(params: &TorusParams, phi: f64) -> f64 {
    (1.0 + params.minor / params.major * phi.cos()) / TAU
}

/// `∫_a^b m(φ) dφ`
pub fn reference_phi_probability(params: &TorusParams, a: f64, b: f64) -> f64 {
    ((b - a) + params.minor / params.major * (b.sin() - a.sin())) / TAU
}
