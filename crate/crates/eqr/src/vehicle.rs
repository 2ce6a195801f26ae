//! The concrete plant: an underactuated thrust vehicle on S² × R³ × R³.
//!
//! State is the reduced attitude (thrust bearing) η ∈ S² together with
//! velocity and position in R³; inputs are the body-frame angular velocity
//! and the scalar thrust:
//!
//! ```text
//! η̇ = η × Ω,    v̇ = −(T/m) η + g e₃,    ẋ = v.
//! ```
//!
//! SE₂(3) acts transitively on the state space by
//! (R, v_X, x_X) · (η, v, x) = (Rη, Rv + v_X, Rx + x_X), which makes the
//! state space a homogeneous space and admits the lift [`lift`] into the
//! Lie algebra. The stereographic chart [`chart`] is centered at the origin
//! state (e₃, 0, 0).

use nalgebra::{SMatrix, SVector};

use crate::geometry::{hat, AlgebraElement, GroupElement, Vec3};
use crate::{Error, Result};

/// Chart coordinates ε = (σ(η), v, x) ∈ R⁸.
pub type LocalCoords = SVector<f64, 8>;

/// Guard on η₃ + 1 below which the stereographic chart is rejected.
const CHART_GUARD: f64 = 1e-6;

/// Plant state (η, v, x) with η a unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub eta: Vec3,
    pub vel: Vec3,
    pub pos: Vec3,
}

impl State {
    pub fn new(eta: Vec3, vel: Vec3, pos: Vec3) -> Self {
        State { eta, vel, pos }
    }

    /// Normalizes the bearing component; used after integration steps.
    pub fn renormalized(mut self) -> Self {
        self.eta /= self.eta.norm();
        self
    }

    /// Embedded coordinates in R⁹, stacked (η, v, x).
    pub fn to_vector(&self) -> SVector<f64, 9> {
        let mut v = SVector::<f64, 9>::zeros();
        v.fixed_view_mut::<3, 1>(0, 0).copy_from(&self.eta);
        v.fixed_view_mut::<3, 1>(3, 0).copy_from(&self.vel);
        v.fixed_view_mut::<3, 1>(6, 0).copy_from(&self.pos);
        v
    }
}

/// Control input: body-frame angular velocity and scalar thrust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Input {
    pub omega: Vec3,
    pub thrust: f64,
}

impl Input {
    pub fn new(omega: Vec3, thrust: f64) -> Self {
        Input { omega, thrust }
    }

    pub fn zero() -> Self {
        Input {
            omega: Vec3::zeros(),
            thrust: 0.0,
        }
    }
}

/// Known physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub mass: f64,
    pub gravity: f64,
}

impl Default for Params {
    /// Simulation-study values: m = 1.2 kg, g = 9.81 m/s².
    fn default() -> Self {
        Params {
            mass: 1.2,
            gravity: 9.81,
        }
    }
}

/// Time derivative of a [`State`], as an ambient tangent triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub eta: Vec3,
    pub vel: Vec3,
    pub pos: Vec3,
}

impl StateRate {
    pub fn to_vector(&self) -> SVector<f64, 9> {
        let mut v = SVector::<f64, 9>::zeros();
        v.fixed_view_mut::<3, 1>(0, 0).copy_from(&self.eta);
        v.fixed_view_mut::<3, 1>(3, 0).copy_from(&self.vel);
        v.fixed_view_mut::<3, 1>(6, 0).copy_from(&self.pos);
        v
    }
}

/// Chart origin ξ̊ = (e₃, 0, 0).
pub fn origin() -> State {
    State::new(Vec3::new(0.0, 0.0, 1.0), Vec3::zeros(), Vec3::zeros())
}

/// Plant vector field (η × Ω, −(T/m)η + g e₃, v).
pub fn dynamics(xi: &State, u: &Input, p: &Params) -> StateRate {
    StateRate {
        eta: xi.eta.cross(&u.omega),
        vel: -xi.eta * (u.thrust / p.mass) + Vec3::new(0.0, 0.0, p.gravity),
        pos: xi.vel,
    }
}

/// Group action of SE₂(3) on the state space.
pub fn act(x: &GroupElement, xi: &State) -> State {
    State {
        eta: x.rotation * xi.eta,
        vel: x.rotation * xi.vel + x.v_slot,
        pos: x.rotation * xi.pos + x.x_slot,
    }
}

/// Stereographic projection σ(η) = (η₁, η₂) / (1 + η₃).
fn stereographic(eta: &Vec3) -> Result<(f64, f64)> {
    let denom = eta.z + 1.0;
    if denom <= CHART_GUARD {
        return Err(Error::ChartSingularity { eta3: eta.z });
    }
    Ok((eta.x / denom, eta.y / denom))
}

/// Chart χ(ξ) = (σ(η), v, x); fails near the antipode η = −e₃.
pub fn chart(xi: &State) -> Result<LocalCoords> {
    let (s1, s2) = stereographic(&xi.eta)?;
    let mut eps = LocalCoords::zeros();
    eps[0] = s1;
    eps[1] = s2;
    eps.fixed_view_mut::<3, 1>(2, 0).copy_from(&xi.vel);
    eps.fixed_view_mut::<3, 1>(5, 0).copy_from(&xi.pos);
    Ok(eps)
}

/// Inverse chart; always lands on the unit sphere.
pub fn chart_inv(eps: &LocalCoords) -> State {
    let (z1, z2) = (eps[0], eps[1]);
    let r2 = z1 * z1 + z2 * z2;
    let s = 1.0 + r2;
    State {
        eta: Vec3::new(2.0 * z1 / s, 2.0 * z2 / s, (1.0 - r2) / s),
        vel: Vec3::new(eps[2], eps[3], eps[4]),
        pos: Vec3::new(eps[5], eps[6], eps[7]),
    }
}

/// Lift of the plant field into se₂(3):
/// Λ(ξ, u) = (−Ω̂, Ω × v − (T/m)η + g e₃, Ω × x + v).
///
/// Satisfies the defining property Dφ_ξ Λ(ξ, u) = f_u(ξ). The stabilizer
/// of the origin is the circle of rotations about e₃, so the lift is not
/// unique; this is the fixed choice used throughout the pipeline.
pub fn lift(xi: &State, u: &Input, p: &Params) -> AlgebraElement {
    AlgebraElement {
        skew: -u.omega,
        w_v: u.omega.cross(&xi.vel) - xi.eta * (u.thrust / p.mass)
            + Vec3::new(0.0, 0.0, p.gravity),
        w_x: u.omega.cross(&xi.pos) + xi.vel,
    }
}

/// Right-trivialized lifted field: Ẋ = Λ̂(φ(X, ξ̊), u) X, returned as the
/// algebra element Λ(φ(X, ξ̊), u). Integrators advance X by composing
/// exponential increments on the left.
pub fn lifted_field(x: &GroupElement, u: &Input, p: &Params, origin: &State) -> AlgebraElement {
    lift(&act(x, origin), u, p)
}

/// Differential of the partial action X ↦ φ(X, ξ) at the identity, applied
/// to an algebra element: (w × η, w × v + w_v, w × x + w_x).
pub fn action_group_differential(xi: &State, u: &AlgebraElement) -> StateRate {
    StateRate {
        eta: u.skew.cross(&xi.eta),
        vel: u.skew.cross(&xi.vel) + u.w_v,
        pos: u.skew.cross(&xi.pos) + u.w_x,
    }
}

/// Matrix of [`action_group_differential`] on algebra coordinates
/// (w, w_v, w_x), producing ambient tangent coordinates (δη, δv, δx).
pub fn action_group_differential_matrix(xi: &State) -> SMatrix<f64, 9, 9> {
    let mut m = SMatrix::<f64, 9, 9>::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-hat(&xi.eta)));
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-hat(&xi.vel)));
    m.fixed_view_mut::<3, 3>(6, 0).copy_from(&(-hat(&xi.pos)));
    m.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&SMatrix::<f64, 3, 3>::identity());
    m.fixed_view_mut::<3, 3>(6, 6)
        .copy_from(&SMatrix::<f64, 3, 3>::identity());
    m
}

/// Differential of the fixed-group action ξ ↦ φ(X, ξ): block-diagonal
/// rotation on each factor.
pub fn action_state_jacobian(x: &GroupElement) -> SMatrix<f64, 9, 9> {
    let mut m = SMatrix::<f64, 9, 9>::zeros();
    let r = x.rotation.matrix();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m.fixed_view_mut::<3, 3>(6, 6).copy_from(r);
    m
}

/// Differential of the lift in the state, D_ξ Λ(·, u), on ambient
/// coordinates. The lift is affine in the state so this depends on the
/// input only.
pub fn lift_state_jacobian(u: &Input, p: &Params) -> SMatrix<f64, 9, 9> {
    let mut m = SMatrix::<f64, 9, 9>::zeros();
    let ox = hat(&u.omega);
    let id = SMatrix::<f64, 3, 3>::identity();
    m.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(-id * (u.thrust / p.mass)));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&ox);
    m.fixed_view_mut::<3, 3>(6, 3).copy_from(&id);
    m.fixed_view_mut::<3, 3>(6, 6).copy_from(&ox);
    m
}

/// Jacobian of the chart at `xi`, mapping ambient tangents (δη, δv, δx) to
/// chart tangents; the sphere rows are the ambient derivative of σ.
pub fn chart_jacobian(xi: &State) -> Result<SMatrix<f64, 8, 9>> {
    let denom = xi.eta.z + 1.0;
    if denom <= CHART_GUARD {
        return Err(Error::ChartSingularity { eta3: xi.eta.z });
    }
    let mut m = SMatrix::<f64, 8, 9>::zeros();
    let inv = 1.0 / denom;
    m[(0, 0)] = inv;
    m[(0, 2)] = -xi.eta.x * inv * inv;
    m[(1, 1)] = inv;
    m[(1, 2)] = -xi.eta.y * inv * inv;
    m.fixed_view_mut::<6, 6>(2, 3)
        .copy_from(&SMatrix::<f64, 6, 6>::identity());
    Ok(m)
}

/// Jacobian of the inverse chart at ε = 0: the sphere columns inject with
/// a factor of two, the Euclidean factors are identities.
pub fn chart_inv_jacobian_at_zero() -> SMatrix<f64, 9, 8> {
    let mut m = SMatrix::<f64, 9, 8>::zeros();
    m[(0, 0)] = 2.0;
    m[(1, 1)] = 2.0;
    m.fixed_view_mut::<6, 6>(3, 2)
        .copy_from(&SMatrix::<f64, 6, 6>::identity());
    m
}
