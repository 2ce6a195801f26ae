//! Closed-loop experiments: single runs, initial-condition sweeps over S²,
//! RMSE metrics and result serialization.
//!
//! The plant is integrated with fixed-step RK4 at `dt_plant`, with the
//! feedback evaluated at every integrator stage so the closed loop is
//! treated as one continuous ODE; the bearing is renormalized after each
//! full step. Both controllers consume the same precomputed artifacts
//! (desired schedule, lifted trajectory, gain schedules), which are
//! immutable and shared across sweep workers.

use std::io::Write;

use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;

use crate::error_dynamics::{linearize_generic, local_error};
use crate::flatness::{sample_trajectory, DesiredPoint, DesiredSchedule, FlatCurve};
use crate::geometry::Vec3;
use crate::lifting::{lift_trajectory, LiftedTrajectory};
use crate::lqr::{solve_riccati, transform_weights, GainSchedule, WeightSet};
use crate::plqr::{embedded_error, plqr_control, plqr_gains};
use crate::vehicle::{act, dynamics, origin, Input, Params, State};
use crate::Result;

/// Which feedback law closes the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Eqr,
    Plqr,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControllerKind::Eqr => write!(f, "eqr"),
            ControllerKind::Plqr => write!(f, "plqr"),
        }
    }
}

/// Initial-condition perturbation: the bearing is placed at the spherical
/// angles (θ from e₃, azimuth φ) and the Euclidean states start at the
/// desired values plus the offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialOffset {
    pub theta: f64,
    pub phi: f64,
    pub v_offset: Vec3,
    pub x_offset: Vec3,
}

impl InitialOffset {
    pub fn bearing(theta: f64, phi: f64) -> Self {
        InitialOffset {
            theta,
            phi,
            v_offset: Vec3::zeros(),
            x_offset: Vec3::zeros(),
        }
    }

    /// Start exactly on the desired trajectory.
    pub fn on_trajectory(eta_d0: &Vec3) -> Self {
        InitialOffset {
            theta: eta_d0.z.clamp(-1.0, 1.0).acos(),
            phi: eta_d0.y.atan2(eta_d0.x),
            v_offset: Vec3::zeros(),
            x_offset: Vec3::zeros(),
        }
    }

    pub fn eta(&self) -> Vec3 {
        Vec3::new(
            self.theta.sin() * self.phi.cos(),
            self.theta.sin() * self.phi.sin(),
            self.theta.cos(),
        )
    }
}

/// Scenario description for one closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub curve: FlatCurve,
    pub t_final: f64,
    pub dt_plant: f64,
    pub dt_gain: f64,
    pub controller: ControllerKind,
    pub init: InitialOffset,
    pub params: Params,
    pub weights: WeightSet,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            curve: FlatCurve::Helix,
            t_final: 10.0,
            dt_plant: 1e-3,
            dt_gain: 1e-3,
            controller: ControllerKind::Eqr,
            init: InitialOffset::bearing(0.0, 0.0),
            params: Params::default(),
            weights: WeightSet::default(),
        }
    }
}

/// Time series and summary metrics of one closed-loop run.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub inputs: Vec<Input>,
    /// Norm of the embedded 9-d error per sample.
    pub error_norms: Vec<f64>,
    /// Norm of the chart error per sample; NaN for the baseline controller.
    pub eps_norms: Vec<f64>,
    pub rmse: f64,
    pub converged: bool,
    pub failure: Option<String>,
}

impl SimResult {
    /// Writes the 16-column run CSV:
    /// t, state (9), input (4), embedded error norm, chart error norm.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "t,eta_1,eta_2,eta_3,v_1,v_2,v_3,x_1,x_2,x_3,omega_1,omega_2,omega_3,thrust,err_norm,eps_norm"
        )?;
        for i in 0..self.times.len() {
            let s = &self.states[i];
            let u = &self.inputs[i];
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.times[i], s.eta.x, s.eta.y, s.eta.z, s.vel.x, s.vel.y, s.vel.z,
                s.pos.x, s.pos.y, s.pos.z, u.omega.x, u.omega.y, u.omega.z, u.thrust,
                self.error_norms[i], self.eps_norms[i]
            )?;
        }
        Ok(())
    }
}

/// Root-mean-square of the embedded error between aligned state series.
pub fn rmse(states: &[State], desired: &[State]) -> f64 {
    assert_eq!(states.len(), desired.len(), "series lengths differ");
    if states.is_empty() {
        return 0.0;
    }
    let sum: f64 = states
        .iter()
        .zip(desired.iter())
        .map(|(s, d)| embedded_error(s, d).norm_squared())
        .sum();
    (sum / states.len() as f64).sqrt()
}

/// Precomputed pipeline shared by every run of a scenario: desired
/// schedule, lifted trajectory and both gain schedules.
pub struct SimEngine {
    params: Params,
    t_final: f64,
    dt_plant: f64,
    schedule: DesiredSchedule,
    lifted: LiftedTrajectory,
    eqr_gains: GainSchedule<8>,
    plqr_gains: GainSchedule<9>,
}

/// Final-second mean error below this marks a run as converged.
const CONVERGENCE_ERROR: f64 = 1e-2;

/// State-norm guard; beyond it the run is flagged as diverged.
const STATE_GUARD: f64 = 1e6;

impl SimEngine {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let schedule =
            sample_trajectory(&cfg.curve, 0.0, cfg.t_final, cfg.dt_gain, &cfg.params)?;
        let lifted = lift_trajectory(&schedule, &origin(), &cfg.params)?;

        // chart-controller gains: linearize along the lifted trajectory and
        // transform the weights per node
        let n = schedule.len();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for i in 0..n {
            let pt = schedule.point(i);
            let pair = linearize_generic(&lifted.elements()[i], &pt.state, &pt.input, &cfg.params);
            a.push(pair.a);
            b.push(pair.b);
            q.push(transform_weights(&cfg.weights.q, &lifted.elements()[i]));
        }
        let f_terminal = transform_weights(&cfg.weights.f, lifted.elements().last().unwrap());
        let eqr_gains = solve_riccati(&a, &b, &q, &f_terminal, &cfg.weights.s, schedule.times())?;

        let plqr_gains = plqr_gains(&schedule, &cfg.weights, &cfg.params)?;

        Ok(SimEngine {
            params: cfg.params,
            t_final: cfg.t_final,
            dt_plant: cfg.dt_plant,
            schedule,
            lifted,
            eqr_gains,
            plqr_gains,
        })
    }

    pub fn schedule(&self) -> &DesiredSchedule {
        &self.schedule
    }

    pub fn lifted(&self) -> &LiftedTrajectory {
        &self.lifted
    }

    pub fn eqr_gains(&self) -> &GainSchedule<8> {
        &self.eqr_gains
    }

    pub fn plqr_gains(&self) -> &GainSchedule<9> {
        &self.plqr_gains
    }

    fn initial_state(&self, init: &InitialOffset) -> State {
        let pt0 = self.schedule.point(0);
        State::new(
            init.eta(),
            pt0.state.vel + init.v_offset,
            pt0.state.pos + init.x_offset,
        )
    }

    /// Feedback at time `t` for the state `xi`; also returns the chart
    /// error norm when the chart controller is active (NaN otherwise).
    ///
    /// The chart controller forms ξ_e = φ(X_d⁻¹, ξ), ε = χ(ξ_e),
    /// ũ = −K(t)ε and applies u_d + ũ with thrust clamped at zero; a chart
    /// singularity surfaces as an error for the caller to record.
    pub fn control(&self, kind: ControllerKind, t: f64, xi: &State) -> Result<(Input, f64)> {
        let (x_d, u_d) = self.lifted.at(t)?;
        match kind {
            ControllerKind::Eqr => {
                let eps = local_error(&x_d, xi)?;
                let k = self.eqr_gains.gain_at(t)?;
                let u_tilde: SVector<f64, 4> = -(k * eps);
                let input = Input::new(
                    u_d.omega + Vec3::new(u_tilde[0], u_tilde[1], u_tilde[2]),
                    (u_d.thrust + u_tilde[3]).max(0.0),
                );
                Ok((input, eps.norm()))
            }
            ControllerKind::Plqr => {
                let desired = DesiredPoint {
                    state: act(&x_d, &origin()),
                    input: u_d,
                    time: t,
                };
                let k: SMatrix<f64, 4, 9> = self.plqr_gains.gain_at(t)?;
                Ok((plqr_control(xi, &desired, &k), f64::NAN))
            }
        }
    }

    /// One RK4 step of the closed loop over [t, t + h].
    fn step(&self, kind: ControllerKind, t: f64, h: f64, xi: &State) -> Result<State> {
        let f = |s: &State, u: &Input| dynamics(s, u, &self.params);
        let advance = |s: &State, k: &crate::vehicle::StateRate, scale: f64| {
            State::new(
                s.eta + k.eta * scale,
                s.vel + k.vel * scale,
                s.pos + k.pos * scale,
            )
        };

        let (u1, _) = self.control(kind, t, xi)?;
        let k1 = f(xi, &u1);
        let s2 = advance(xi, &k1, h * 0.5);
        let (u2, _) = self.control(kind, t + h * 0.5, &s2)?;
        let k2 = f(&s2, &u2);
        let s3 = advance(xi, &k2, h * 0.5);
        let (u3, _) = self.control(kind, t + h * 0.5, &s3)?;
        let k3 = f(&s3, &u3);
        let s4 = advance(xi, &k3, h);
        let (u4, _) = self.control(kind, t + h, &s4)?;
        let k4 = f(&s4, &u4);

        Ok(State::new(
            xi.eta + (k1.eta + k2.eta * 2.0 + k3.eta * 2.0 + k4.eta) * (h / 6.0),
            xi.vel + (k1.vel + k2.vel * 2.0 + k3.vel * 2.0 + k4.vel) * (h / 6.0),
            xi.pos + (k1.pos + k2.pos * 2.0 + k3.pos * 2.0 + k4.pos) * (h / 6.0),
        )
        .renormalized())
    }

    /// Runs the closed loop from the given initial perturbation.
    ///
    /// Divergence (chart singularity or state blowup) is recorded in the
    /// result, not raised: the series is truncated, the RMSE is set to
    /// infinity and `converged` is false.
    pub fn run(&self, init: &InitialOffset, kind: ControllerKind) -> SimResult {
        let steps = (self.t_final / self.dt_plant).round() as usize;
        let mut xi = self.initial_state(init);
        let mut times = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        let mut inputs = Vec::with_capacity(steps + 1);
        let mut error_norms = Vec::with_capacity(steps + 1);
        let mut eps_norms = Vec::with_capacity(steps + 1);
        let mut sq_sum = 0.0;
        let mut failure: Option<String> = None;

        for k in 0..=steps {
            let t = if k == steps {
                self.t_final
            } else {
                k as f64 * self.dt_plant
            };

            let (input, eps_norm) = match self.control(kind, t, &xi) {
                Ok(pair) => pair,
                Err(e) => {
                    failure = Some(format!("t = {t:.3}: {e}"));
                    break;
                }
            };

            let (x_d, _) = self.lifted.at(t).expect("t within schedule");
            let desired_state = act(&x_d, &origin());
            let err = embedded_error(&xi, &desired_state).norm();

            times.push(t);
            states.push(xi);
            inputs.push(input);
            error_norms.push(err);
            eps_norms.push(eps_norm);
            sq_sum += err * err;

            if !err.is_finite()
                || xi.vel.norm() > STATE_GUARD
                || xi.pos.norm() > STATE_GUARD
            {
                failure = Some(format!("t = {t:.3}: state left the trust region"));
                break;
            }

            if k < steps {
                match self.step(kind, t, self.dt_plant, &xi) {
                    Ok(next) => xi = next,
                    Err(e) => {
                        failure = Some(format!("t = {t:.3}: {e}"));
                        break;
                    }
                }
            }
        }

        let diverged = failure.is_some();
        let rmse_val = if diverged || times.is_empty() {
            f64::INFINITY
        } else {
            (sq_sum / times.len() as f64).sqrt()
        };

        let converged = if diverged {
            false
        } else {
            let window_start = (self.t_final - 1.0).max(0.0);
            let tail: Vec<f64> = times
                .iter()
                .zip(error_norms.iter())
                .filter(|(t, _)| **t >= window_start)
                .map(|(_, e)| *e)
                .collect();
            let mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
            !tail.is_empty() && mean < CONVERGENCE_ERROR
        };

        SimResult {
            times,
            states,
            inputs,
            error_norms,
            eps_norms,
            rmse: rmse_val,
            converged,
            failure,
        }
    }
}

/// Convenience wrapper: build the pipeline for `cfg` and run it once.
pub fn integrate_closed_loop(cfg: &SimConfig) -> Result<SimResult> {
    let engine = SimEngine::new(cfg)?;
    Ok(engine.run(&cfg.init, cfg.controller))
}

/// One sweep cell: both controllers run from the same initial bearing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub theta: f64,
    pub phi: f64,
    pub rmse_eqr: f64,
    pub converged_eqr: bool,
    pub rmse_plqr: f64,
    pub converged_plqr: bool,
}

/// Initial-condition sweep over S², row-major in θ then φ.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub cells: Vec<SweepCell>,
}

/// Runs both controllers over the (θ, φ) grid: θ spans [0, π] inclusive,
/// φ spans [0, 2π) half-open. Cells are independent tasks; `threads = 0`
/// uses the global worker pool. Output ordering is by cell index, so the
/// parallel schedule never affects the result.
pub fn sweep(engine: &SimEngine, n_theta: usize, n_phi: usize, threads: usize) -> SweepGrid {
    assert!(n_theta >= 2 && n_phi >= 2, "sweep grid must be at least 2x2");

    let run_cell = |idx: usize| -> SweepCell {
        let i = idx / n_phi;
        let j = idx % n_phi;
        let theta = std::f64::consts::PI * i as f64 / (n_theta - 1) as f64;
        let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
        let init = InitialOffset::bearing(theta, phi);
        let eqr = engine.run(&init, ControllerKind::Eqr);
        let plqr = engine.run(&init, ControllerKind::Plqr);
        SweepCell {
            theta,
            phi,
            rmse_eqr: eqr.rmse,
            converged_eqr: eqr.converged,
            rmse_plqr: plqr.rmse,
            converged_plqr: plqr.converged,
        }
    };

    let total = n_theta * n_phi;
    let cells: Vec<SweepCell> = if threads == 0 {
        (0..total).into_par_iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("worker pool");
        pool.install(|| (0..total).into_par_iter().map(run_cell).collect())
    };

    SweepGrid {
        n_theta,
        n_phi,
        cells,
    }
}

impl SweepGrid {
    pub fn cell(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[i * self.n_phi + j]
    }

    /// Fraction of cells whose run converged, per controller.
    pub fn converged_fraction(&self, kind: ControllerKind) -> f64 {
        let count = self
            .cells
            .iter()
            .filter(|c| match kind {
                ControllerKind::Eqr => c.converged_eqr,
                ControllerKind::Plqr => c.converged_plqr,
            })
            .count();
        count as f64 / self.cells.len() as f64
    }

    /// Writes the sweep CSV:
    /// theta, phi, rmse_eqr, converged_eqr, rmse_plqr, converged_plqr.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "theta,phi,rmse_eqr,converged_eqr,rmse_plqr,converged_plqr")?;
        for c in &self.cells {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{},{:.12e},{}",
                c.theta,
                c.phi,
                c.rmse_eqr,
                c.converged_eqr as u8,
                c.rmse_plqr,
                c.converged_plqr as u8
            )?;
        }
        Ok(())
    }

    /// Writes a plain-text grayscale heatmap (PGM "P2"): one pixel per
    /// cell, RMSE clipped to [0, clip] and scaled to 0..255.
    pub fn write_pgm(
        &self,
        kind: ControllerKind,
        clip: f64,
        out: &mut impl Write,
    ) -> std::io::Result<()> {
        writeln!(out, "P2")?;
        writeln!(out, "{} {}", self.n_phi, self.n_theta)?;
        writeln!(out, "255")?;
        for i in 0..self.n_theta {
            let row: Vec<String> = (0..self.n_phi)
                .map(|j| {
                    let c = self.cell(i, j);
                    let value = match kind {
                        ControllerKind::Eqr => c.rmse_eqr,
                        ControllerKind::Plqr => c.rmse_plqr,
                    };
                    let scaled = (value.min(clip) / clip * 255.0).round() as u32;
                    scaled.min(255).to_string()
                })
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }
}
