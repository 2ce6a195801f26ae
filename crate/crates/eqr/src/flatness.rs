//! Differential-flatness trajectory generation.
//!
//! The thrust-vehicle kinematics are flat in the position: given a C³ curve
//! x_d(t), every state and input along the trajectory follows from the
//! first three derivatives. With w = −ẍ_d + g e₃,
//!
//! ```text
//! T  = m ‖w‖,          η_d = m w / T,
//! Ṫ  = m² x⃛_dᵀ(ẍ_d − g e₃) / T,
//! η̇_d = m Ṫ (ẍ_d − g e₃) / T² − m x⃛_d / T,
//! Ω_d = η̇_d × η_d,
//! ```
//!
//! where the angular-velocity component about η_d is a free function and is
//! fixed to zero ([`FLAT_OMEGA_BEARING_COMPONENT`]).

use std::io::Write;

use crate::geometry::Vec3;
use crate::vehicle::{Input, Params, State};
use crate::{Error, Result};

/// The free component of Ω_d along η_d, fixed to zero so that Ω_d ⟂ η_d
/// everywhere.
pub const FLAT_OMEGA_BEARING_COMPONENT: f64 = 0.0;

/// Thrust magnitudes below this are treated as the free-fall singularity.
const THRUST_CUTOFF: f64 = 1e-6;

/// A C³ position curve with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum FlatCurve {
    /// x_d(t) = (cos(t)/2, sin(t)/2, t): radius one half, unit angular rate,
    /// unit climb rate.
    Helix,
    /// Constant position.
    Hover { position: Vec3 },
    /// Componentwise polynomial; `coeffs[k]` multiplies t^k.
    Polynomial { coeffs: Vec<Vec3> },
}

impl FlatCurve {
    pub fn position(&self, t: f64) -> Vec3 {
        match self {
            FlatCurve::Helix => Vec3::new(0.5 * t.cos(), 0.5 * t.sin(), t),
            FlatCurve::Hover { position } => *position,
            FlatCurve::Polynomial { coeffs } => poly_eval(coeffs, t, 0),
        }
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        match self {
            FlatCurve::Helix => Vec3::new(-0.5 * t.sin(), 0.5 * t.cos(), 1.0),
            FlatCurve::Hover { .. } => Vec3::zeros(),
            FlatCurve::Polynomial { coeffs } => poly_eval(coeffs, t, 1),
        }
    }

    pub fn acceleration(&self, t: f64) -> Vec3 {
        match self {
            FlatCurve::Helix => Vec3::new(-0.5 * t.cos(), -0.5 * t.sin(), 0.0),
            FlatCurve::Hover { .. } => Vec3::zeros(),
            FlatCurve::Polynomial { coeffs } => poly_eval(coeffs, t, 2),
        }
    }

    pub fn jerk(&self, t: f64) -> Vec3 {
        match self {
            FlatCurve::Helix => Vec3::new(0.5 * t.sin(), -0.5 * t.cos(), 0.0),
            FlatCurve::Hover { .. } => Vec3::zeros(),
            FlatCurve::Polynomial { coeffs } => poly_eval(coeffs, t, 3),
        }
    }
}

fn poly_eval(coeffs: &[Vec3], t: f64, derivative: usize) -> Vec3 {
    let mut acc = Vec3::zeros();
    for (k, c) in coeffs.iter().enumerate().skip(derivative) {
        let mut factor = 1.0;
        for j in 0..derivative {
            factor *= (k - j) as f64;
        }
        acc += c * (factor * t.powi((k - derivative) as i32));
    }
    acc
}

/// One point of a desired trajectory: state, feedforward input, time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredPoint {
    pub state: State,
    pub input: Input,
    pub time: f64,
}

/// Evaluates the flatness map at time `t`.
pub fn flat_to_state(curve: &FlatCurve, t: f64, p: &Params) -> Result<DesiredPoint> {
    let (point, _) = flat_to_state_with_rates(curve, t, p)?;
    Ok(point)
}

/// Flatness map returning the bearing rate η̇_d as well; the extra output
/// feeds consistency checks and has no role in the control pipeline.
pub fn flat_to_state_with_rates(
    curve: &FlatCurve,
    t: f64,
    p: &Params,
) -> Result<(DesiredPoint, Vec3)> {
    let g_e3 = Vec3::new(0.0, 0.0, p.gravity);
    let vel = curve.velocity(t);
    let acc = curve.acceleration(t);
    let jerk = curve.jerk(t);

    let w = -acc + g_e3;
    let thrust = p.mass * w.norm();
    if thrust <= THRUST_CUTOFF {
        return Err(Error::FreeFallSingularity { t, thrust });
    }
    let eta = w * (p.mass / thrust);
    let thrust_rate = p.mass * p.mass * jerk.dot(&(acc - g_e3)) / thrust;
    let eta_rate = (acc - g_e3) * (p.mass * thrust_rate / (thrust * thrust))
        - jerk * (p.mass / thrust);
    let omega = eta_rate.cross(&eta) + eta * FLAT_OMEGA_BEARING_COMPONENT;

    let point = DesiredPoint {
        state: State::new(eta, vel, curve.position(t)),
        input: Input::new(omega, thrust),
        time: t,
    };
    Ok((point, eta_rate))
}

/// Rate of change of the flat thrust magnitude; exposed for the
/// finite-difference consistency check against [`flat_to_state`].
pub fn flat_thrust_rate(curve: &FlatCurve, t: f64, p: &Params) -> Result<f64> {
    let g_e3 = Vec3::new(0.0, 0.0, p.gravity);
    let acc = curve.acceleration(t);
    let jerk = curve.jerk(t);
    let thrust = p.mass * (-acc + g_e3).norm();
    if thrust <= THRUST_CUTOFF {
        return Err(Error::FreeFallSingularity { t, thrust });
    }
    Ok(p.mass * p.mass * jerk.dot(&(acc - g_e3)) / thrust)
}

/// Uniformly sampled desired trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredSchedule {
    times: Vec<f64>,
    points: Vec<DesiredPoint>,
}

/// Samples the flatness map on the uniform grid t0, t0+dt, …, tf
/// (endpoints included).
pub fn sample_trajectory(
    curve: &FlatCurve,
    t0: f64,
    tf: f64,
    dt: f64,
    p: &Params,
) -> Result<DesiredSchedule> {
    if dt <= 0.0 || tf <= t0 {
        return Err(Error::InvalidGrid {
            reason: format!("need dt > 0 and tf > t0, got dt = {dt}, [{t0}, {tf}]"),
        });
    }
    let ratio = (tf - t0) / dt;
    if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::InvalidGrid {
            reason: format!("dt = {dt} does not evenly divide [{t0}, {tf}]"),
        });
    }
    let n = ratio.round() as usize + 1;
    let mut times = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let t = if i == n - 1 { tf } else { t0 + i as f64 * dt };
        times.push(t);
        points.push(flat_to_state(curve, t, p)?);
    }
    Ok(DesiredSchedule { times, points })
}

impl DesiredSchedule {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[DesiredPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DesiredPoint {
        &self.points[i]
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn tf(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Locates `t` on the grid, returning the segment index and the
    /// normalized offset s ∈ [0, 1] into it.
    pub(crate) fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (t0, tf) = (self.t0(), self.tf());
        if t < t0 - 1e-9 || t > tf + 1e-9 {
            return Err(Error::OutOfRange { t, t0, t1: tf });
        }
        if self.times.len() == 1 {
            return Ok((0, 0.0));
        }
        let dt = self.dt();
        let i = (((t - t0) / dt).floor() as usize).min(self.times.len() - 2);
        let s = ((t - self.times[i]) / dt).clamp(0.0, 1.0);
        Ok((i, s))
    }

    /// Input feedforward at `t`, linearly interpolated between nodes.
    pub fn input_at(&self, t: f64) -> Result<Input> {
        let (i, s) = self.locate(t)?;
        if s == 0.0 || self.times.len() == 1 {
            return Ok(self.points[i].input);
        }
        let (a, b) = (&self.points[i].input, &self.points[i + 1].input);
        Ok(Input::new(
            a.omega * (1.0 - s) + b.omega * s,
            a.thrust * (1.0 - s) + b.thrust * s,
        ))
    }

    /// Input at the midpoint of segment `i`, from the cubic through the four
    /// surrounding nodes. Keeps fourth-order integrators fed with
    /// O(dt⁴)-accurate stage inputs; falls back to linear interpolation when
    /// the grid is too short for a stencil.
    pub fn input_midpoint(&self, i: usize) -> Input {
        let n = self.points.len();
        assert!(i + 1 < n, "segment index out of range");
        let u = |k: usize| -> (Vec3, f64) {
            let inp = &self.points[k].input;
            (inp.omega, inp.thrust)
        };
        let blend = |w: [f64; 4], idx: [usize; 4]| -> Input {
            let mut omega = Vec3::zeros();
            let mut thrust = 0.0;
            for (wk, k) in w.iter().zip(idx.iter()) {
                let (o, th) = u(*k);
                omega += o * *wk;
                thrust += th * *wk;
            }
            Input::new(omega, thrust)
        };
        if n < 4 {
            let (a, b) = (u(i), u(i + 1));
            return Input::new((a.0 + b.0) * 0.5, (a.1 + b.1) * 0.5);
        }
        if i == 0 {
            blend([5.0 / 16.0, 15.0 / 16.0, -5.0 / 16.0, 1.0 / 16.0], [0, 1, 2, 3])
        } else if i + 2 >= n {
            blend(
                [1.0 / 16.0, -5.0 / 16.0, 15.0 / 16.0, 5.0 / 16.0],
                [n - 4, n - 3, n - 2, n - 1],
            )
        } else {
            blend(
                [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0],
                [i - 1, i, i + 1, i + 2],
            )
        }
    }

    /// Writes the 17-column trajectory CSV:
    /// t, eta_{1..3}, v_{1..3}, x_{1..3}, omega_{1..3}, thrust.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "t,eta_1,eta_2,eta_3,v_1,v_2,v_3,x_1,x_2,x_3,omega_1,omega_2,omega_3,thrust"
        )?;
        for (t, pt) in self.times.iter().zip(self.points.iter()) {
            let s = &pt.state;
            let u = &pt.input;
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                t, s.eta.x, s.eta.y, s.eta.z, s.vel.x, s.vel.y, s.vel.z,
                s.pos.x, s.pos.y, s.pos.z, u.omega.x, u.omega.y, u.omega.z, u.thrust
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{dynamics, origin};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e3() -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    fn rand_poly(rng: &mut impl Rng) -> FlatCurve {
        let coeffs = (0..5)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        FlatCurve::Polynomial { coeffs }
    }

    #[test]
    fn hover_points_at_gravity() {
        let p = Params::default();
        let curve = FlatCurve::Hover {
            position: Vec3::new(1.0, -2.0, 3.0),
        };
        let pt = flat_to_state(&curve, 4.2, &p).unwrap();
        assert_relative_eq!(pt.state.eta, e3(), epsilon = 1e-15);
        assert_relative_eq!(pt.input.thrust, p.mass * p.gravity, epsilon = 1e-12);
        assert_relative_eq!(pt.input.omega, Vec3::zeros(), epsilon = 1e-15);
    }

    #[test]
    fn helix_initial_bearing() {
        let p = Params::default();
        let pt = flat_to_state(&FlatCurve::Helix, 0.0, &p).unwrap();
        // frozen values from direct evaluation of the flatness formulas
        assert_relative_eq!(pt.state.eta.x, 0.0509023260103963, epsilon = 1e-14);
        assert_relative_eq!(pt.state.eta.y, 0.0, epsilon = 1e-14);
        assert_relative_eq!(pt.state.eta.z, 0.9987036363239754, epsilon = 1e-14);
        // matches the reported bearing (0.0509, 0, 0.999) to 1e-3
        assert!((pt.state.eta.x - 0.0509).abs() < 1e-3);
        assert!((pt.state.eta.z - 0.999).abs() < 1e-3);
    }

    #[test]
    fn helix_initial_thrust_and_rate() {
        let p = Params::default();
        let pt = flat_to_state(&FlatCurve::Helix, 0.0, &p).unwrap();
        assert_relative_eq!(pt.input.thrust, 11.787280602412077, epsilon = 1e-12);
        assert_relative_eq!(
            flat_thrust_rate(&FlatCurve::Helix, 0.0, &p).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(pt.input.omega.x, 0.05083633808393126, epsilon = 1e-12);
        assert_relative_eq!(pt.input.omega.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(pt.input.omega.z, -0.002591046793268668, epsilon = 1e-12);
    }

    #[test]
    fn helix_dynamics_consistency_at_zero() {
        let p = Params::default();
        let pt = flat_to_state(&FlatCurve::Helix, 0.0, &p).unwrap();
        let rate = dynamics(&pt.state, &pt.input, &p);
        assert_relative_eq!(rate.vel, Vec3::new(-0.5, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn curve_derivatives_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let h = 1e-5;
        for curve in [FlatCurve::Helix, rand_poly(&mut rng)] {
            for i in 0..20 {
                let t = -1.0 + 0.3 * i as f64;
                let fd_v = (curve.position(t + h) - curve.position(t - h)) / (2.0 * h);
                assert!((fd_v - curve.velocity(t)).norm() < 1e-5);
                let fd_a = (curve.velocity(t + h) - curve.velocity(t - h)) / (2.0 * h);
                assert!((fd_a - curve.acceleration(t)).norm() < 1e-5);
                let fd_j = (curve.acceleration(t + h) - curve.acceleration(t - h)) / (2.0 * h);
                assert!((fd_j - curve.jerk(t)).norm() < 1e-5);
            }
        }
    }

    /// The thrust rate must match finite differences of the thrust itself;
    /// this pins the chain-rule coefficient in the Ṫ formula.
    #[test]
    fn thrust_rate_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = Params::default();
        let h = 1e-5;
        for _ in 0..20 {
            let curve = rand_poly(&mut rng);
            let t = rng.gen_range(-1.0..1.0);
            let thrust_at = |t: f64| flat_to_state(&curve, t, &p).unwrap().input.thrust;
            let fd = (thrust_at(t + h) - thrust_at(t - h)) / (2.0 * h);
            let analytic = flat_thrust_rate(&curve, t, &p).unwrap();
            assert!(
                (fd - analytic).abs() < 1e-6 * analytic.abs().max(1.0),
                "fd {fd} vs analytic {analytic}"
            );
        }
    }

    /// (ξ_d, u_d) satisfies the plant dynamics: the flat bearing rate and
    /// the acceleration reproduce the vector field, checked against finite
    /// differences of the flat outputs themselves.
    #[test]
    fn flat_pairs_satisfy_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let p = Params::default();
        let h = 1e-6;
        for _ in 0..20 {
            let curve = rand_poly(&mut rng);
            let t = rng.gen_range(-1.0..1.0);
            let (pt, eta_rate) = flat_to_state_with_rates(&curve, t, &p).unwrap();
            let rate = dynamics(&pt.state, &pt.input, &p);

            assert!((pt.state.eta.norm() - 1.0).abs() < 1e-12);
            assert!(pt.state.eta.dot(&eta_rate).abs() < 1e-9);
            assert!((rate.eta - eta_rate).norm() < 1e-9);

            let eta_fd = (flat_to_state(&curve, t + h, &p).unwrap().state.eta
                - flat_to_state(&curve, t - h, &p).unwrap().state.eta)
                / (2.0 * h);
            assert!((rate.eta - eta_fd).norm() < 1e-8);
            assert!((rate.vel - curve.acceleration(t)).norm() < 1e-9);
            assert!((rate.pos - curve.velocity(t)).norm() < 1e-12);
        }
    }

    #[test]
    fn free_fall_is_rejected() {
        let p = Params::default();
        // x(t) = (g/2) t^2 e3 makes the acceleration cancel gravity exactly
        let curve = FlatCurve::Polynomial {
            coeffs: vec![Vec3::zeros(), Vec3::zeros(), e3() * (p.gravity / 2.0)],
        };
        assert!(matches!(
            flat_to_state(&curve, 0.7, &p),
            Err(Error::FreeFallSingularity { .. })
        ));
    }

    #[test]
    fn sample_grid_structure() {
        let p = Params::default();
        assert!(matches!(
            sample_trajectory(&FlatCurve::Helix, 0.0, 1.0, 0.3, &p),
            Err(Error::InvalidGrid { .. })
        ));
        let sched = sample_trajectory(&FlatCurve::Helix, 0.0, 10.0, 0.01, &p).unwrap();
        assert_eq!(sched.len(), 1001);
        assert_eq!(sched.t0(), 0.0);
        assert_eq!(sched.tf(), 10.0);
        let first = flat_to_state(&FlatCurve::Helix, 0.0, &p).unwrap();
        assert_eq!(sched.point(0).state, first.state);

        let hover = FlatCurve::Hover { position: Vec3::zeros() };
        let hs = sample_trajectory(&hover, 0.0, 1.0, 0.25, &p).unwrap();
        for pt in hs.points() {
            assert_eq!(pt.state, hs.point(0).state);
        }
    }

    /// η_d(t+dt) − (η_d + dt·η_d×Ω_d) shrinks at second order in dt.
    #[test]
    fn sample_first_order_consistency() {
        let p = Params::default();
        let err = |dt: f64| -> f64 {
            let sched = sample_trajectory(&FlatCurve::Helix, 0.0, 2.0, dt, &p).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..sched.len() - 1 {
                let a = sched.point(i);
                let b = sched.point(i + 1);
                let predicted = a.state.eta + a.state.eta.cross(&a.input.omega) * dt;
                worst = worst.max((b.state.eta - predicted).norm());
            }
            worst
        };
        let coarse = err(0.01);
        let fine = err(0.005);
        assert!(coarse < 1e-5);
        let ratio = coarse / fine;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn midpoint_interpolation_is_fourth_order() {
        let p = Params::default();
        let err = |dt: f64| -> f64 {
            let sched = sample_trajectory(&FlatCurve::Helix, 0.0, 2.0, dt, &p).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..sched.len() - 1 {
                let mid = sched.input_midpoint(i);
                let truth = flat_to_state(&FlatCurve::Helix, sched.times()[i] + dt / 2.0, &p)
                    .unwrap()
                    .input;
                worst = worst
                    .max((mid.omega - truth.omega).norm())
                    .max((mid.thrust - truth.thrust).abs());
            }
            worst
        };
        let coarse = err(0.02);
        let fine = err(0.01);
        assert!(coarse / fine > 12.0, "ratio {}", coarse / fine);
    }

    proptest! {
        #[test]
        fn flat_omega_orthogonal_to_bearing(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let curve = rand_poly(&mut rng);
            let t = rng.gen_range(-1.0..1.0);
            let p = Params::default();
            if let Ok(pt) = flat_to_state(&curve, t, &p) {
                prop_assert!(pt.input.omega.dot(&pt.state.eta).abs() < 1e-12);
                prop_assert!(pt.input.thrust > 0.0);
            }
        }
    }

    #[test]
    fn csv_shape() {
        let p = Params::default();
        let sched = sample_trajectory(&FlatCurve::Helix, 0.0, 0.1, 0.05, &p).unwrap();
        let mut buf = Vec::new();
        sched.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 14);
    }

    #[test]
    fn hover_at_zero_matches_origin_state() {
        let p = Params::default();
        let pt = flat_to_state(
            &FlatCurve::Hover { position: Vec3::zeros() },
            0.0,
            &p,
        )
        .unwrap();
        assert_relative_eq!(pt.state.to_vector(), origin().to_vector(), epsilon = 1e-14);
    }
}
