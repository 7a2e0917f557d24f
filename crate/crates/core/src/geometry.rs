//! Linear algebra on the constrained manifold.
//!
//! Everything here is a pure function of its inputs. The constraint Jacobian
//! `∇ξ(q)` is a `d × m` matrix whose columns are the gradients of the
//! constraint components; momenta live in the cotangent space
//! `{p : ∇ξ(q)ᵀ M⁻¹ p = 0}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::ConstraintModel;

/// Default threshold above which an `m × m` system is treated as singular.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;

/// Library-wide tolerance for the phase-space constraints.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Mass matrix
// ---------------------------------------------------------------------------

/// Symmetric positive definite mass tensor with cached factorizations.
#[derive(Debug, Clone)]
pub struct MassMatrix {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    identity: bool,
}

impl MassMatrix {
    pub fn identity(dim: usize) -> Self {
        let id = DMatrix::identity(dim, dim);
        Self {
            matrix: id.clone(),
            inverse: id.clone(),
            sqrt: id.clone(),
            inv_sqrt: id,
            identity: true,
        }
    }

    /// Builds a mass matrix, checking symmetry (1e-12 relative) and positivity.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParams("mass matrix must be square".into()));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidParams(format!(
                "mass matrix not symmetric (max asymmetry {asym:e})"
            )));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParams(
                "mass matrix must be positive definite".into(),
            ));
        }
        let v = &eig.eigenvectors;
        let from_diag = |f: &dyn Fn(f64) -> f64| {
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
            v * d * v.transpose()
        };
        let dim = sym.nrows();
        let identity = sym == DMatrix::identity(dim, dim);
        Ok(Self {
            inverse: from_diag(&|l| 1.0 / l),
            sqrt: from_diag(&|l| l.sqrt()),
            inv_sqrt: from_diag(&|l| 1.0 / l.sqrt()),
            matrix: sym,
            identity,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `M^{1/2}`, used to turn standard normals into `N(0, M)` draws.
    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `M⁻¹ v`
    pub fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.identity {
            v.clone()
        } else {
            &self.inverse * v
        }
    }

    /// `M⁻¹ A` for a matrix of column vectors.
    pub fn apply_inverse_mat(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        if self.identity {
            a.clone()
        } else {
            &self.inverse * a
        }
    }

    pub fn apply_sqrt(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.identity {
            v.clone()
        } else {
            &self.sqrt * v
        }
    }

    /// Kinetic energy `pᵀ M⁻¹ p / 2`.
    pub fn kinetic_energy(&self, p: &DVector<f64>) -> f64 {
        if self.identity {
            0.5 * p.norm_squared()
        } else {
            0.5 * p.dot(&(&self.inverse * p))
        }
    }
}

// ---------------------------------------------------------------------------
// Small dense systems
// ---------------------------------------------------------------------------

/// An `m × m` matrix of the form `Aᵀ M⁻¹ B` with a conditioning estimate.
///
/// The estimate is relative to the scale of the factors,
/// `‖A‖_F ‖M⁻¹‖_F ‖B‖_F / σ_min`, so that a `1 × 1` system built from nearly
/// orthogonal gradients is reported as ill conditioned.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub matrix: DMatrix<f64>,
    pub condition_estimate: f64,
}

impl GramMatrix {
    fn from_parts(matrix: DMatrix<f64>, factor_scale: f64) -> Self {
        let smallest = smallest_singular_value(&matrix);
        let condition_estimate = if matrix.iter().any(|v| !v.is_finite()) {
            f64::INFINITY
        } else if smallest > 0.0 {
            // scale is >= the largest singular value for Gram-type products
            (factor_scale.max(largest_singular_value(&matrix)) / smallest).max(1.0)
        } else {
            f64::INFINITY
        };
        Self {
            matrix,
            condition_estimate,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_invertible(&self, condition_limit: f64) -> bool {
        self.condition_estimate < condition_limit
    }

    /// Solves `G x = rhs` with partial-pivoted LU.
    pub fn solve(&self, rhs: &DVector<f64>, condition_limit: f64) -> Result<DVector<f64>> {
        if !self.is_invertible(condition_limit) {
            return Err(Error::SingularGram {
                condition: self.condition_estimate,
            });
        }
        if self.dim() == 1 {
            return Ok(rhs / self.matrix[(0, 0)]);
        }
        self.matrix
            .clone()
            .lu()
            .solve(rhs)
            .ok_or(Error::SingularGram {
                condition: self.condition_estimate,
            })
    }
}

fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// `Aᵀ M⁻¹ B` for two `d × m` Jacobians.
pub fn gram_from_jacobians(mass: &MassMatrix, a: &DMatrix<f64>, b: &DMatrix<f64>) -> GramMatrix {
    let minv_b = mass.apply_inverse_mat(b);
    let g = a.transpose() * &minv_b;
    let scale = if mass.is_identity() {
        a.norm() * b.norm()
    } else {
        a.norm() * mass.inverse().norm() * b.norm()
    };
    GramMatrix::from_parts(g, scale)
}

/// `∇ξ(q)ᵀ M⁻¹ ∇ξ(q̃)`; with `q̃ = q` this is the Gram matrix `G_M(q)`.
pub fn gram(model: &dyn ConstraintModel, q: &DVector<f64>, q_tilde: &DVector<f64>) -> GramMatrix {
    let a = model.constraint_jacobian(q);
    let b = model.constraint_jacobian(q_tilde);
    gram_from_jacobians(model.mass(), &a, &b)
}

// ---------------------------------------------------------------------------
// Cotangent projections
// ---------------------------------------------------------------------------

/// Position and momentum on the cotangent bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        Self { q, p }
    }

    /// Position with zero momentum.
    pub fn at_rest(q: DVector<f64>) -> Self {
        let p = DVector::zeros(q.len());
        Self { q, p }
    }

    pub fn reversed(&self) -> Self {
        Self {
            q: self.q.clone(),
            p: -&self.p,
        }
    }

    /// `(‖ξ(q)‖, ‖∇ξ(q)ᵀ M⁻¹ p‖)`
    pub fn constraint_residuals(&self, model: &dyn ConstraintModel) -> (f64, f64) {
        let xi = model.constraint(&self.q).norm();
        let jac = model.constraint_jacobian(&self.q);
        let mom = (jac.transpose() * model.mass().apply_inverse(&self.p)).norm();
        (xi, mom)
    }

    pub fn is_valid(&self, model: &dyn ConstraintModel, tol: f64) -> bool {
        let (a, b) = self.constraint_residuals(model);
        a <= tol && b <= tol
    }

    /// `H(q, p) = V(q) + pᵀ M⁻¹ p / 2`
    pub fn energy(&self, model: &dyn ConstraintModel) -> f64 {
        model.potential(&self.q) + model.mass().kinetic_energy(&self.p)
    }
}

/// `Π v = v − ∇ξ G_M⁻¹ ∇ξᵀ M⁻¹ v` with the Jacobian supplied by the caller.
pub fn cotangent_project_with(
    mass: &MassMatrix,
    jac: &DMatrix<f64>,
    v: &DVector<f64>,
    condition_limit: f64,
) -> Result<DVector<f64>> {
    let lambda = momentum_multiplier_with(mass, jac, v, condition_limit)?;
    Ok(v + jac * lambda)
}

/// `λ = −G_M⁻¹ ∇ξᵀ M⁻¹ p` with the Jacobian supplied by the caller.
pub fn momentum_multiplier_with(
    mass: &MassMatrix,
    jac: &DMatrix<f64>,
    p: &DVector<f64>,
    condition_limit: f64,
) -> Result<DVector<f64>> {
    let g = gram_from_jacobians(mass, jac, jac);
    let b = jac.transpose() * mass.apply_inverse(p);
    g.solve(&(-b), condition_limit)
}

/// `M⁻¹`-orthogonal projection of `v` onto the cotangent space at `q`.
pub fn cotangent_project(
    model: &dyn ConstraintModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let jac = model.constraint_jacobian(q);
    cotangent_project_with(model.mass(), &jac, v, DEFAULT_CONDITION_LIMIT)
}

/// Multiplier `λ` solving `G_M(q) λ = −∇ξ(q)ᵀ M⁻¹ p`, so that `p + ∇ξ(q) λ`
/// satisfies the momentum constraint.
pub fn momentum_lagrange_rattle(
    model: &dyn ConstraintModel,
    q: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<DVector<f64>> {
    let jac = model.constraint_jacobian(q);
    momentum_multiplier_with(model.mass(), &jac, p, DEFAULT_CONDITION_LIMIT)
}

// ---------------------------------------------------------------------------
// Ornstein–Uhlenbeck momentum step
// ---------------------------------------------------------------------------

/// Precomputed matrices of the midpoint Ornstein–Uhlenbeck half step with
/// friction `γ` over a time increment `Δt/2`.
#[derive(Debug, Clone)]
pub struct OuPropagator {
    /// `(Id + Δt γ M⁻¹ / 4)⁻¹`
    pub damping: DMatrix<f64>,
    /// `Id − Δt γ M⁻¹ / 4`
    pub explicit: DMatrix<f64>,
    /// `√(γ Δt)`
    pub noise_scale: f64,
}

impl OuPropagator {
    pub fn new(mass: &MassMatrix, gamma: f64, dt: f64) -> Self {
        let d = mass.dim();
        let c = mass.inverse() * (dt * gamma / 4.0);
        let id = DMatrix::<f64>::identity(d, d);
        let damping = (&id + &c)
            .try_inverse()
            .expect("Id + c M^-1 is positive definite for c >= 0");
        Self {
            damping,
            explicit: id - c,
            noise_scale: (gamma * dt).sqrt(),
        }
    }

    /// Multiplier for the constrained midpoint step: solves
    /// `∇ξᵀ M⁻¹ D ∇ξ λ = −∇ξᵀ M⁻¹ p` with `D` the damping matrix.
    pub fn lagrange(&self, mass: &MassMatrix, jac: &DMatrix<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
        let dj = &self.damping * jac;
        let g = gram_from_jacobians(mass, jac, &dj);
        let b = jac.transpose() * mass.apply_inverse(p);
        g.solve(&(-b), DEFAULT_CONDITION_LIMIT)
    }

    /// One constrained half step from a cotangent momentum `p` with noise `g`.
    pub fn step(
        &self,
        mass: &MassMatrix,
        jac: &DMatrix<f64>,
        p: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let unconstrained = &self.damping * (&self.explicit * p + g * self.noise_scale);
        let lambda = self.lagrange(mass, jac, &unconstrained)?;
        Ok(&unconstrained + &self.damping * (jac * lambda))
    }
}

/// Multiplier of the fluctuation/dissipation momentum constraint.
pub fn momentum_lagrange_ou(
    model: &dyn ConstraintModel,
    q: &DVector<f64>,
    p: &DVector<f64>,
    gamma: f64,
    dt: f64,
) -> Result<DVector<f64>> {
    let ou = OuPropagator::new(model.mass(), gamma, dt);
    let jac = model.constraint_jacobian(q);
    ou.lagrange(model.mass(), &jac, p)
}

// ---------------------------------------------------------------------------
// Finite differences (testing aid only)
// ---------------------------------------------------------------------------

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Central-difference Jacobian of `ξ`, laid out like [`ConstraintModel::constraint_jacobian`].
pub fn fd_constraint_jacobian(model: &dyn ConstraintModel, q: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let d = model.dim();
    let m = model.n_constraints();
    let mut jac = DMatrix::zeros(d, m);
    for i in 0..d {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[i] += h;
        minus[i] -= h;
        let diff = (model.constraint(&plus) - model.constraint(&minus)) / (2.0 * h);
        for j in 0..m {
            jac[(i, j)] = diff[j];
        }
    }
    jac
}

/// Central-difference gradient of `V`.
pub fn fd_potential_gradient(model: &dyn ConstraintModel, q: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(model.dim(), |i, _| {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[i] += h;
        minus[i] -= h;
        (model.potential(&plus) - model.potential(&minus)) / (2.0 * h)
    })
}
