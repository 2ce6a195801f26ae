//! Intrinsic tracking error and its linearization.
//!
//! The error state ξ_e = φ(X_d⁻¹, ξ) lives on the state manifold and equals
//! the origin exactly when ξ sits on the desired trajectory. Its chart
//! coordinates ε = χ(ξ_e) obey
//!
//! ```text
//! ε̇ = Dχ [ Dφ_{ξ_e} Ad_{X_d⁻¹}( Λ(φ(X_d, ξ_e), u_d) − Λ(ξ_d, u_d) )
//!        + Dφ_{X_d⁻¹} g(φ(X_d, ξ_e))[ũ] ],
//! ```
//!
//! with equilibrium (ε, ũ) = (0, 0). [`linearize_generic`] assembles the
//! exact Jacobian of this rate at the equilibrium from the analytic
//! differentials of the chart, action, adjoint and lift; it is the
//! production path for the gain design. [`linearize_closed_form`] is the
//! compact constant-structure variant whose angular-velocity channel is
//! expressed in the origin frame; the two agree at hover and differ by the
//! frame rotation R_dᵀ on the Ω̃ channel elsewhere (see the tests).

use std::io::Write;

use nalgebra::{SMatrix, SVector};

use crate::geometry::{hat, GroupElement, Vec3};
use crate::vehicle::{
    act, action_group_differential, action_group_differential_matrix, action_state_jacobian,
    chart, chart_inv, chart_inv_jacobian_at_zero, chart_jacobian, lift, lift_state_jacobian,
    origin, Input, LocalCoords, Params, State,
};
use crate::Result;

/// Time-sampled linearization of the local error dynamics: ε̇ ≈ Aε + Bũ
/// with A 8×8 and B 8×4 (three Ω̃ columns, one T̃ column).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationPair {
    pub a: SMatrix<f64, 8, 8>,
    pub b: SMatrix<f64, 8, 4>,
    pub time: f64,
}

/// Intrinsic error state ξ_e = φ(X_d⁻¹, ξ).
pub fn error_state(x_d: &GroupElement, xi: &State) -> State {
    act(&x_d.inverse(), xi)
}

/// Chart coordinates of the intrinsic error, ε = χ(φ(X_d⁻¹, ξ)).
pub fn local_error(x_d: &GroupElement, xi: &State) -> Result<LocalCoords> {
    chart(&error_state(x_d, xi))
}

/// Input-channel matrix of the plant, G(ξ) with columns (Ω̃₁, Ω̃₂, Ω̃₃, T̃):
/// g(ξ)[ũ] = (η × Ω̃, −(T̃/m) η, 0).
fn input_matrix(xi: &State, p: &Params) -> SMatrix<f64, 9, 4> {
    let mut g = SMatrix::<f64, 9, 4>::zeros();
    g.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&xi.eta));
    g.fixed_view_mut::<3, 1>(3, 3)
        .copy_from(&(-xi.eta / p.mass));
    g
}

/// Full nonlinear rate of the chart error coordinates at (ε, ũ).
///
/// `u_tilde` carries the input error (Ω̃, T̃); its thrust component may be
/// negative.
pub fn nonlinear_error_rate(
    eps: &LocalCoords,
    x_d: &GroupElement,
    xi_d: &State,
    u_d: &Input,
    u_tilde: &Input,
    p: &Params,
) -> Result<SVector<f64, 8>> {
    let xi_e = chart_inv(eps);
    let mapped = act(x_d, &xi_e);

    // drift: Dφ_{ξ_e} Ad_{X_d⁻¹}( Λ(φ(X_d, ξ_e), u_d) − Λ(ξ_d, u_d) )
    let delta_lift = {
        let a = lift(&mapped, u_d, p);
        let b = lift(xi_d, u_d, p);
        x_d.inverse()
            .adjoint(&crate::geometry::AlgebraElement::new(
                a.skew - b.skew,
                a.w_v - b.w_v,
                a.w_x - b.w_x,
            ))
    };
    let drift = action_group_differential(&xi_e, &delta_lift);

    // input: Dφ_{X_d⁻¹} g(φ(X_d, ξ_e))[ũ]
    let rt = x_d.rotation.transpose();
    let g_tilde = input_matrix(&mapped, p);
    let mut u_vec = SMatrix::<f64, 4, 1>::zeros();
    u_vec.fixed_view_mut::<3, 1>(0, 0).copy_from(&u_tilde.omega);
    u_vec[3] = u_tilde.thrust;
    let pushed = g_tilde * u_vec;
    let input_eta = rt * Vec3::new(pushed[0], pushed[1], pushed[2]);
    let input_vel = rt * Vec3::new(pushed[3], pushed[4], pushed[5]);
    let input_pos = rt * Vec3::new(pushed[6], pushed[7], pushed[8]);

    let mut ambient = SVector::<f64, 9>::zeros();
    ambient
        .fixed_view_mut::<3, 1>(0, 0)
        .copy_from(&(drift.eta + input_eta));
    ambient
        .fixed_view_mut::<3, 1>(3, 0)
        .copy_from(&(drift.vel + input_vel));
    ambient
        .fixed_view_mut::<3, 1>(6, 0)
        .copy_from(&(drift.pos + input_pos));

    Ok(chart_jacobian(&xi_e)? * ambient)
}

/// Linearization of the error dynamics at (ε, ũ) = (0, 0) from the analytic
/// differential chain. This is the production path.
pub fn linearize_generic(
    x_d: &GroupElement,
    xi_d: &State,
    u_d: &Input,
    p: &Params,
) -> LinearizationPair {
    let origin_state = origin();
    // chart_jacobian cannot fail at the origin
    let dchart = chart_jacobian(&origin_state).expect("chart regular at origin");
    let dphi_group = action_group_differential_matrix(&origin_state);
    let adj_inv = x_d.inverse().adjoint_matrix();
    let dlift = lift_state_jacobian(u_d, p);
    let dphi_state = action_state_jacobian(x_d);
    let dchart_inv = chart_inv_jacobian_at_zero();

    let a = dchart * dphi_group * adj_inv * dlift * dphi_state * dchart_inv;

    let dphi_inv_state = action_state_jacobian(&x_d.inverse());
    let b = dchart * dphi_inv_state * input_matrix(xi_d, p);

    LinearizationPair { a, b, time: 0.0 }
}

/// The compact constant-structure linearization, valid with the angular
/// velocity and thrust expressed in the origin frame:
///
/// ```text
///     [ 0                0     0   ]        [ [0 −½ 0; ½ 0 0]   0      ]
/// A = [ −(T_d/m)·2·J     Ω_d^×  0   ],  B = [ 0              −e₃/m    ]
///     [ 0                I     Ω_d^× ]      [ 0                0      ]
/// ```
///
/// with J the injection of R² into the first two coordinates.
pub fn linearize_closed_form(omega_d: &Vec3, thrust_d: f64, p: &Params) -> LinearizationPair {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let coeff = -thrust_d / p.mass;
    a[(2, 0)] = 2.0 * coeff;
    a[(3, 1)] = 2.0 * coeff;
    let ox = hat(omega_d);
    a.fixed_view_mut::<3, 3>(2, 2).copy_from(&ox);
    a.fixed_view_mut::<3, 3>(5, 5).copy_from(&ox);
    a.fixed_view_mut::<3, 3>(5, 2)
        .copy_from(&SMatrix::<f64, 3, 3>::identity());

    let mut b = SMatrix::<f64, 8, 4>::zeros();
    b[(0, 1)] = -0.5;
    b[(1, 0)] = 0.5;
    b[(4, 3)] = -1.0 / p.mass;

    LinearizationPair { a, b, time: 0.0 }
}

/// Writes the 97-column linearization CSV: t, 64 A entries row-major,
/// 32 B entries row-major.
pub fn write_linearization_csv(
    pairs: &[LinearizationPair],
    out: &mut impl Write,
) -> std::io::Result<()> {
    write!(out, "t")?;
    for i in 0..8 {
        for j in 0..8 {
            write!(out, ",a_{}{}", i + 1, j + 1)?;
        }
    }
    for i in 0..8 {
        for j in 0..4 {
            write!(out, ",b_{}{}", i + 1, j + 1)?;
        }
    }
    writeln!(out)?;
    for pair in pairs {
        write!(out, "{:.12e}", pair.time)?;
        for i in 0..8 {
            for j in 0..8 {
                write!(out, ",{:.12e}", pair.a[(i, j)])?;
            }
        }
        for i in 0..8 {
            for j in 0..4 {
                write!(out, ",{:.12e}", pair.b[(i, j)])?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Central-difference Jacobians of [`nonlinear_error_rate`] at (0, 0); the
/// independent ground truth the analytic linearization is tested against.
pub fn finite_difference_linearization(
    x_d: &GroupElement,
    xi_d: &State,
    u_d: &Input,
    p: &Params,
    h: f64,
) -> Result<LinearizationPair> {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let zero_u = Input::new(Vec3::zeros(), 0.0);
    for j in 0..8 {
        let mut eps = LocalCoords::zeros();
        eps[j] = h;
        let plus = nonlinear_error_rate(&eps, x_d, xi_d, u_d, &zero_u, p)?;
        eps[j] = -h;
        let minus = nonlinear_error_rate(&eps, x_d, xi_d, u_d, &zero_u, p)?;
        a.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    let mut b = SMatrix::<f64, 8, 4>::zeros();
    let zero_eps = LocalCoords::zeros();
    for j in 0..4 {
        let mut delta = [0.0; 4];
        delta[j] = h;
        let u_plus = Input::new(Vec3::new(delta[0], delta[1], delta[2]), delta[3]);
        let u_minus = Input::new(-Vec3::new(delta[0], delta[1], delta[2]), -delta[3]);
        let plus = nonlinear_error_rate(&zero_eps, x_d, xi_d, u_d, &u_plus, p)?;
        let minus = nonlinear_error_rate(&zero_eps, x_d, xi_d, u_d, &u_minus, p)?;
        b.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Ok(LinearizationPair { a, b, time: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatness::{sample_trajectory, FlatCurve};
    use crate::geometry::exp_so3;
    use crate::lifting::lift_trajectory;
    use crate::vehicle::dynamics;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e1() -> Vec3 {
        Vec3::new(1.0, 0.0, 0.0)
    }
    fn e3() -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    fn rand_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    fn rand_group(rng: &mut impl Rng) -> GroupElement {
        GroupElement::new(
            exp_so3(&rand_vec(rng, 2.0)),
            rand_vec(rng, 3.0),
            rand_vec(rng, 3.0),
        )
    }

    fn rand_state(rng: &mut impl Rng) -> State {
        let eta = loop {
            let v = rand_vec(rng, 1.0);
            if v.norm() > 1e-2 {
                break v.normalize();
            }
        };
        State::new(eta, rand_vec(rng, 3.0), rand_vec(rng, 3.0))
    }

    #[test]
    fn error_state_on_trajectory_is_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..100 {
            let x_d = rand_group(&mut rng);
            let xi = act(&x_d, &origin());
            let err = error_state(&x_d, &xi);
            assert!((err.to_vector() - origin().to_vector()).norm() < 1e-12);
        }
    }

    #[test]
    fn error_state_origin_only_on_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..100 {
            let x_d = rand_group(&mut rng);
            let xi = rand_state(&mut rng);
            let err = error_state(&x_d, &xi);
            let on_trajectory = (xi.to_vector() - act(&x_d, &origin()).to_vector()).norm() < 1e-12;
            let at_origin = (err.to_vector() - origin().to_vector()).norm() < 1e-12;
            assert_eq!(on_trajectory, at_origin);
            // inverse action recovers the plant state
            let back = act(&x_d, &err);
            assert!((back.to_vector() - xi.to_vector()).norm() < 1e-11);
        }
    }

    #[test]
    fn error_state_identity_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let xi = rand_state(&mut rng);
        let err = error_state(&GroupElement::identity(), &xi);
        assert_relative_eq!(err.to_vector(), xi.to_vector(), epsilon = 1e-15);
    }

    #[test]
    fn local_error_cases() {
        // on-trajectory
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let x_d = rand_group(&mut rng);
        let eps = local_error(&x_d, &act(&x_d, &origin())).unwrap();
        assert!(eps.norm() < 1e-12);

        // pure position offset with identity group: chart is the identity on x
        let offset = Vec3::new(0.3, -0.7, 1.1);
        let xi = State::new(e3(), Vec3::zeros(), offset);
        let eps = local_error(&GroupElement::identity(), &xi).unwrap();
        let mut expected = LocalCoords::zeros();
        expected.fixed_view_mut::<3, 1>(5, 0).copy_from(&offset);
        assert_relative_eq!(eps, expected, epsilon = 1e-15);

        // bearing tipped 0.2 rad about e1
        let eta = exp_so3(&(e1() * 0.2)) * e3();
        let xi = State::new(eta, Vec3::zeros(), Vec3::zeros());
        let eps = local_error(&GroupElement::identity(), &xi).unwrap();
        assert_relative_eq!(eps[0], eta.x / (1.0 + eta.z), epsilon = 1e-15);
        assert_relative_eq!(eps[1], eta.y / (1.0 + eta.z), epsilon = 1e-15);
    }

    #[test]
    fn rate_vanishes_at_equilibrium() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let p = Params::default();
        for _ in 0..50 {
            let x_d = rand_group(&mut rng);
            let xi_d = act(&x_d, &origin());
            let u_d = Input::new(rand_vec(&mut rng, 1.0), rng.gen_range(0.0..20.0));
            let rate = nonlinear_error_rate(
                &LocalCoords::zeros(),
                &x_d,
                &xi_d,
                &u_d,
                &Input::new(Vec3::zeros(), 0.0),
                &p,
            )
            .unwrap();
            assert!(rate.norm() < 1e-12, "rate {}", rate.norm());
        }
    }

    #[test]
    fn rate_pure_thrust_error_at_identity() {
        let p = Params::default();
        let u_d = Input::new(Vec3::zeros(), p.mass * p.gravity);
        let t_tilde = 0.37;
        let rate = nonlinear_error_rate(
            &LocalCoords::zeros(),
            &GroupElement::identity(),
            &origin(),
            &u_d,
            &Input::new(Vec3::zeros(), t_tilde),
            &p,
        )
        .unwrap();
        let mut expected = SVector::<f64, 8>::zeros();
        expected[4] = -t_tilde / p.mass;
        assert_relative_eq!(rate, expected, epsilon = 1e-12);
    }

    /// d/dt χ(φ(X_d(t)⁻¹, ξ(t))) along a simulated perturbed trajectory
    /// matches the analytic rate to second order in the node spacing.
    #[test]
    fn rate_matches_trajectory_finite_differences() {
        let p = Params::default();
        let dt = 1e-3;
        let sched = sample_trajectory(&FlatCurve::Helix, 0.0, 1.0, dt, &p).unwrap();
        let lifted = lift_trajectory(&sched, &origin(), &p).unwrap();

        let u_tilde = Input::new(Vec3::new(0.01, -0.02, 0.03), 0.05);
        let eps0 = LocalCoords::from_column_slice(&[0.05, -0.04, 0.1, 0.0, -0.1, 0.2, 0.1, -0.3]);
        let mut xi = act(lifted.elements().first().unwrap(), &chart_inv(&eps0));

        // integrate the plant at a finer step, storing states at the nodes
        let fine = 10usize;
        let h = dt / fine as f64;
        let mut states = vec![xi];
        for i in 0..sched.len() - 1 {
            for k in 0..fine {
                let t = sched.times()[i] + k as f64 * h;
                let u_of = |t: f64| {
                    let (_, ud) = lifted.at(t).unwrap();
                    Input::new(ud.omega + u_tilde.omega, ud.thrust + u_tilde.thrust)
                };
                xi = rk4_plant(&xi, t, h, &u_of, &p);
            }
            states.push(xi);
        }

        let eps_at = |i: usize| -> SVector<f64, 8> {
            local_error(&lifted.elements()[i], &states[i]).unwrap()
        };
        let mut worst: f64 = 0.0;
        for i in (10..sched.len() - 10).step_by(97) {
            let fd = (eps_at(i + 1) - eps_at(i - 1)) / (2.0 * dt);
            let pred = nonlinear_error_rate(
                &eps_at(i),
                &lifted.elements()[i],
                &sched.point(i).state,
                &sched.point(i).input,
                &u_tilde,
                &p,
            )
            .unwrap();
            worst = worst.max((fd - pred).norm());
        }
        assert!(worst < 1e-5, "worst residual {worst}");
    }

    fn rk4_plant(
        xi: &State,
        t: f64,
        h: f64,
        u_of: &impl Fn(f64) -> Input,
        p: &Params,
    ) -> State {
        let f = |s: &State, t: f64| dynamics(s, &u_of(t), p);
        let k1 = f(xi, t);
        let step = |s: &State, k: &crate::vehicle::StateRate, scale: f64| {
            State::new(s.eta + k.eta * scale, s.vel + k.vel * scale, s.pos + k.pos * scale)
        };
        let k2 = f(&step(xi, &k1, h / 2.0), t + h / 2.0);
        let k3 = f(&step(xi, &k2, h / 2.0), t + h / 2.0);
        let k4 = f(&step(xi, &k3, h), t + h);
        State::new(
            xi.eta + (k1.eta + k2.eta * 2.0 + k3.eta * 2.0 + k4.eta) * (h / 6.0),
            xi.vel + (k1.vel + k2.vel * 2.0 + k3.vel * 2.0 + k4.vel) * (h / 6.0),
            xi.pos + (k1.pos + k2.pos * 2.0 + k3.pos * 2.0 + k4.pos) * (h / 6.0),
        )
        .renormalized()
    }

    /// Ground truth: the analytic chain matches central differences of the
    /// nonlinear rate at the equilibrium, along the helix.
    #[test]
    fn generic_linearization_matches_finite_differences() {
        let p = Params::default();
        let sched = sample_trajectory(&FlatCurve::Helix, 0.0, 10.0, 1e-2, &p).unwrap();
        let lifted = lift_trajectory(&sched, &origin(), &p).unwrap();
        let mut worst: f64 = 0.0;
        for i in (0..sched.len()).step_by(20) {
            let x_d = &lifted.elements()[i];
            let pt = sched.point(i);
            let analytic = linearize_generic(x_d, &pt.state, &pt.input, &p);
            let fd = finite_difference_linearization(x_d, &pt.state, &pt.input, &p, 1e-5).unwrap();
            let scale_a = analytic.a.abs().max().max(1.0);
            let scale_b = analytic.b.abs().max().max(1.0);
            worst = worst
                .max((analytic.a - fd.a).abs().max() / scale_a)
                .max((analytic.b - fd.b).abs().max() / scale_b);
        }
        assert!(worst < 1e-5, "worst relative residual {worst}");
    }

    #[test]
    fn generic_matches_closed_form_at_hover() {
        let p = Params::default();
        let u_hover = Input::new(Vec3::zeros(), p.mass * p.gravity);
        let generic = linearize_generic(&GroupElement::identity(), &origin(), &u_hover, &p);
        let closed = linearize_closed_form(&Vec3::zeros(), u_hover.thrust, &p);
        assert!((generic.a - closed.a).abs().max() < 1e-12);
        assert!((generic.b - closed.b).abs().max() < 1e-12);
        // zero maps to zero
        let rate = generic.a * SVector::<f64, 8>::zeros();
        assert_eq!(rate, SVector::<f64, 8>::zeros());
    }

    #[test]
    fn closed_form_block_readoff() {
        let p = Params::default();
        // no thrust, no rotation: only the v-to-x identity block remains
        let pair = linearize_closed_form(&Vec3::zeros(), 0.0, &p);
        let mut expected = SMatrix::<f64, 8, 8>::zeros();
        expected
            .fixed_view_mut::<3, 3>(5, 2)
            .copy_from(&SMatrix::<f64, 3, 3>::identity());
        assert_eq!(pair.a, expected);

        // hover thrust: the v-rows sigma-block is -g times twice the injection
        let hover = linearize_closed_form(&Vec3::zeros(), p.mass * p.gravity, &p);
        assert_relative_eq!(hover.a[(2, 0)], -2.0 * p.gravity, epsilon = 1e-12);
        assert_relative_eq!(hover.a[(3, 1)], -2.0 * p.gravity, epsilon = 1e-12);
        assert_eq!(hover.a[(4, 0)], 0.0);
        assert_eq!(hover.a[(4, 1)], 0.0);

        // thrust column in chart ordering
        let expected_col = SVector::<f64, 8>::from_column_slice(&[
            0.0,
            0.0,
            0.0,
            0.0,
            -1.0 / p.mass,
            0.0,
            0.0,
            0.0,
        ]);
        assert_eq!(hover.b.column(3).into_owned(), expected_col);
    }

    /// The generic Ω̃ block equals the closed-form Ω̃ block composed with
    /// R_dᵀ on the input.
    #[test]
    fn input_blocks_differ_by_desired_frame() {
        let p = Params::default();
        let sched = sample_trajectory(&FlatCurve::Helix, 0.0, 5.0, 1e-2, &p).unwrap();
        let lifted = lift_trajectory(&sched, &origin(), &p).unwrap();
        for i in (0..sched.len()).step_by(50) {
            let x_d = &lifted.elements()[i];
            let pt = sched.point(i);
            let generic = linearize_generic(x_d, &pt.state, &pt.input, &p);
            let closed = linearize_closed_form(&pt.input.omega, pt.input.thrust, &p);

            let gen_omega = generic.b.fixed_view::<8, 3>(0, 0).into_owned();
            let closed_omega = closed.b.fixed_view::<8, 3>(0, 0).into_owned();
            let rotated = closed_omega * x_d.rotation.matrix().transpose();
            assert!((gen_omega - rotated).abs().max() < 1e-9);

            // thrust columns agree outright
            assert!(
                (generic.b.column(3) - closed.b.column(3)).norm() < 1e-9,
                "thrust columns differ at node {i}"
            );

            // block structure of A agrees: sigma rows zero, sigma coupling equal,
            // v-to-x identity, and the skew blocks related by the frame rotation
            assert!(generic.a.fixed_view::<2, 8>(0, 0).abs().max() < 1e-12);
            assert!(
                (generic.a.fixed_view::<3, 2>(2, 0) - closed.a.fixed_view::<3, 2>(2, 0))
                    .abs()
                    .max()
                    < 1e-9
            );
            assert!(
                (generic.a.fixed_view::<3, 3>(5, 2).into_owned()
                    - SMatrix::<f64, 3, 3>::identity())
                .abs()
                .max()
                    < 1e-12
            );
            let frame_omega = x_d.rotation.matrix().transpose() * pt.input.omega;
            let expected_skew = hat(&frame_omega);
            assert!(
                (generic.a.fixed_view::<3, 3>(2, 2).into_owned() - expected_skew)
                    .abs()
                    .max()
                    < 1e-9
            );
            assert!(
                (generic.a.fixed_view::<3, 3>(5, 5).into_owned() - expected_skew)
                    .abs()
                    .max()
                    < 1e-9
            );
        }
    }

    /// B has exactly three controlled directions: two tilt channels and
    /// thrust; rotation about the current bearing is unactuated on the
    /// reduced state, so the fourth singular value vanishes with kernel
    /// along η_d.
    #[test]
    fn input_matrix_rank_structure() {
        let p = Params::default();
        let sched = sample_trajectory(&FlatCurve::Helix, 0.0, 5.0, 1e-2, &p).unwrap();
        let lifted = lift_trajectory(&sched, &origin(), &p).unwrap();
        for i in (0..sched.len()).step_by(50) {
            let pt = sched.point(i);
            let pair = linearize_generic(&lifted.elements()[i], &pt.state, &pt.input, &p);
            let svd = pair.b.svd(false, false);
            let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!(sv[2] > 1e-6, "third singular value {}", sv[2]);
            assert!(sv[3] < 1e-12, "fourth singular value {}", sv[3]);

            // kernel: the bearing direction in the Ω̃ channel
            let mut null_dir = SMatrix::<f64, 4, 1>::zeros();
            null_dir
                .fixed_view_mut::<3, 1>(0, 0)
                .copy_from(&pt.state.eta);
            assert!((pair.b * null_dir).norm() < 1e-12);
        }
    }

    #[test]
    fn csv_shape() {
        let p = Params::default();
        let pair = linearize_closed_form(&Vec3::zeros(), p.mass * p.gravity, &p);
        let mut buf = Vec::new();
        write_linearization_csv(&[pair], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), 97);
        assert_eq!(lines[1].split(',').count(), 97);
    }
}
