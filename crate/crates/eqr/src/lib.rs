//! Tracking control for an underactuated thrust vehicle on the homogeneous
//! space S² × R³ × R³ with SE₂(3) symmetry.
//!
//! The crate implements the full equivariant-regulator (EqR) pipeline:
//!
//! 1. [`flatness`] — generate a feasible trajectory (ξ_d, u_d) from a C³
//!    position curve via differential flatness.
//! 2. [`lifting`] — lift the trajectory to a group trajectory X_d(t) on
//!    SE₂(3) by integrating the lifted kinematics.
//! 3. [`error_dynamics`] — form the intrinsic tracking error
//!    ξ_e = φ(X_d⁻¹, ξ), express it in a fixed stereographic chart centered
//!    at the origin (e₃, 0, 0), and linearize the error dynamics.
//! 4. [`lqr`] — transform the cost weights into chart coordinates and solve
//!    the backward Riccati equation for the time-varying gain K(t).
//! 5. [`simulator`] — run closed-loop experiments, initial-condition sweeps
//!    over S², and serialize results.
//!
//! A standard projected-LQR baseline on the embedded R⁹ error is provided
//! in [`plqr`] for comparison.

pub mod error_dynamics;
pub mod flatness;
pub mod geometry;
pub mod lifting;
pub mod lqr;
pub mod plqr;
pub mod simulator;
pub mod vehicle;

/// Errors raised by the numeric pipeline.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// `log_so3` called on a rotation within the degenerate band around a
    /// half turn; the axis is not recoverable from the skew part there.
    #[error("rotation angle within {margin:.1e} of pi; logarithm axis is degenerate")]
    AngleNearPi { margin: f64 },

    /// The stereographic chart is singular at the antipode of the origin
    /// bearing; `eta3` is the offending third component.
    #[error("chart singularity: eta3 = {eta3} is within the antipodal guard")]
    ChartSingularity { eta3: f64 },

    /// The flatness map degenerates when the commanded acceleration cancels
    /// gravity (thrust magnitude underflows).
    #[error("free-fall singularity at t = {t}: thrust magnitude {thrust:.3e} below cutoff")]
    FreeFallSingularity { t: f64, thrust: f64 },

    /// A schedule was queried outside its time grid.
    #[error("time {t} outside schedule range [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },

    /// The backward Riccati sweep left the trust region; the grid is too
    /// coarse or the linearized pair has lost stabilizability.
    #[error("riccati solution norm {norm:.3e} exceeded blowup guard at t = {t}")]
    RiccatiBlowup { t: f64, norm: f64 },

    /// A schedule constructor was handed an empty or non-uniform grid.
    #[error("invalid schedule grid: {reason}")]
    InvalidGrid { reason: String },

    /// Weight matrices failed their symmetry or definiteness checks.
    #[error("invalid weights: {reason}")]
    InvalidWeights { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
