//! Finite-horizon time-varying LQR machinery.
//!
//! The cost weights are specified on the embedded R⁹ state shared with the
//! baseline controller; [`transform_weights`] maps them into the 8-d chart
//! coordinates through the differentials of the action and the inverse
//! chart, so both controllers penalize the same infinitesimal errors.
//! [`solve_riccati`] integrates
//!
//! ```text
//! Ṗ = −AᵀP − PA + PBS⁻¹BᵀP − Q,    P(t_f) = F,
//! ```
//!
//! backward with classical RK4 on the trajectory grid (matrix schedules are
//! interpolated to the half nodes with the same four-point cubic used for
//! trajectory inputs) and stores the gain K = S⁻¹BᵀP per node.

use std::io::Write;

use nalgebra::SMatrix;

use crate::geometry::GroupElement;
use crate::vehicle::{action_state_jacobian, chart_inv_jacobian_at_zero};
use crate::{Error, Result};

/// Norm guard for the backward sweep.
const BLOWUP_GUARD: f64 = 1e12;

/// Embedded-coordinate cost weights shared by both controllers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSet {
    pub f: SMatrix<f64, 9, 9>,
    pub q: SMatrix<f64, 9, 9>,
    pub s: SMatrix<f64, 4, 4>,
}

impl WeightSet {
    /// Validates symmetry and the definiteness conditions: F, Q positive
    /// semidefinite, S positive definite.
    pub fn new(
        f: SMatrix<f64, 9, 9>,
        q: SMatrix<f64, 9, 9>,
        s: SMatrix<f64, 4, 4>,
    ) -> Result<Self> {
        for (name, m) in [("F", &f), ("Q", &q)] {
            if (m - m.transpose()).abs().max() > 1e-12 {
                return Err(Error::InvalidWeights {
                    reason: format!("{name} is not symmetric"),
                });
            }
            let min_eig = m
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            if min_eig < -1e-12 {
                return Err(Error::InvalidWeights {
                    reason: format!("{name} has eigenvalue {min_eig:.3e} < 0"),
                });
            }
        }
        if (s - s.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidWeights {
                reason: "S is not symmetric".into(),
            });
        }
        let min_eig = s
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_eig < 1e-9 {
            return Err(Error::InvalidWeights {
                reason: format!("S has eigenvalue {min_eig:.3e} below the PD cutoff"),
            });
        }
        Ok(WeightSet { f, q, s })
    }

    pub fn diagonal(f_diag: [f64; 9], q_diag: [f64; 9], s_diag: [f64; 4]) -> Result<Self> {
        Self::new(
            SMatrix::from_diagonal(&f_diag.into()),
            SMatrix::from_diagonal(&q_diag.into()),
            SMatrix::from_diagonal(&s_diag.into()),
        )
    }
}

impl Default for WeightSet {
    /// Simulation-study weights: F = Q = diag(1,1,1, 2,2,2, 0.1,0.1,0.1),
    /// S = diag(0.5, 0.5, 0.5, 0.5).
    fn default() -> Self {
        WeightSet::diagonal(
            [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.1, 0.1, 0.1],
            [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.1, 0.1, 0.1],
            [0.5, 0.5, 0.5, 0.5],
        )
        .expect("study weights are valid")
    }
}

/// Maps an embedded 9×9 weight into chart coordinates at the trajectory
/// point X_d: (Dχ⁻¹|₀)ᵀ Dφ_{X_d}ᵀ W Dφ_{X_d} Dχ⁻¹|₀.
pub fn transform_weights(w: &SMatrix<f64, 9, 9>, x_d: &GroupElement) -> SMatrix<f64, 8, 8> {
    let m = action_state_jacobian(x_d) * chart_inv_jacobian_at_zero();
    let out = m.transpose() * w * m;
    // symmetrize away rounding
    (out + out.transpose()) * 0.5
}

/// Gain schedule produced by the backward Riccati sweep. `N` is the error
/// dimension: 8 for the chart controller, 9 for the embedded baseline.
#[derive(Debug, Clone)]
pub struct GainSchedule<const N: usize> {
    times: Vec<f64>,
    gains: Vec<SMatrix<f64, 4, N>>,
    solutions: Vec<SMatrix<f64, N, N>>,
}

impl<const N: usize> GainSchedule<N> {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn gains(&self) -> &[SMatrix<f64, 4, N>] {
        &self.gains
    }

    pub fn solutions(&self) -> &[SMatrix<f64, N, N>] {
        &self.solutions
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn tf(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Gain at `t`, linearly interpolated between nodes.
    pub fn gain_at(&self, t: f64) -> Result<SMatrix<f64, 4, N>> {
        let (t0, tf) = (self.t0(), self.tf());
        if t < t0 - 1e-9 || t > tf + 1e-9 {
            return Err(Error::OutOfRange { t, t0, t1: tf });
        }
        if self.times.len() == 1 {
            return Ok(self.gains[0]);
        }
        let dt = self.times[1] - self.times[0];
        let i = (((t - t0) / dt).floor() as usize).min(self.times.len() - 2);
        let s = ((t - self.times[i]) / dt).clamp(0.0, 1.0);
        Ok(self.gains[i] * (1.0 - s) + self.gains[i + 1] * s)
    }

    /// Writes the gain CSV: t followed by the K entries row-major.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "t")?;
        for i in 0..4 {
            for j in 0..N {
                write!(out, ",k_{}{}", i + 1, j + 1)?;
            }
        }
        writeln!(out)?;
        for (t, k) in self.times.iter().zip(self.gains.iter()) {
            write!(out, "{:.12e}", t)?;
            for i in 0..4 {
                for j in 0..N {
                    write!(out, ",{:.12e}", k[(i, j)])?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Four-point cubic value at the midpoint of segment `i` of a uniformly
/// sampled matrix schedule; falls back to the two-point average for short
/// schedules.
pub(crate) fn midpoint4<const R: usize, const C: usize>(
    values: &[SMatrix<f64, R, C>],
    i: usize,
) -> SMatrix<f64, R, C> {
    let n = values.len();
    debug_assert!(i + 1 < n);
    if n < 4 {
        return (values[i] + values[i + 1]) * 0.5;
    }
    let blend = |w: [f64; 4], idx: [usize; 4]| -> SMatrix<f64, R, C> {
        let mut acc = SMatrix::<f64, R, C>::zeros();
        for (wk, k) in w.iter().zip(idx.iter()) {
            acc += values[*k] * *wk;
        }
        acc
    };
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

/// Backward Riccati sweep over node schedules of A(t), B(t), Q(t).
///
/// All slices share the uniform `times` grid; `f_terminal` seeds
/// P(t_f) exactly and the solution is symmetrized after every step.
pub fn solve_riccati<const N: usize>(
    a: &[SMatrix<f64, N, N>],
    b: &[SMatrix<f64, N, 4>],
    q: &[SMatrix<f64, N, N>],
    f_terminal: &SMatrix<f64, N, N>,
    s: &SMatrix<f64, 4, 4>,
    times: &[f64],
) -> Result<GainSchedule<N>> {
    let n = times.len();
    if n == 0 || a.len() != n || b.len() != n || q.len() != n {
        return Err(Error::InvalidGrid {
            reason: format!(
                "schedule lengths disagree: times {}, A {}, B {}, Q {}",
                n,
                a.len(),
                b.len(),
                q.len()
            ),
        });
    }
    let s_inv = s.try_inverse().ok_or_else(|| Error::InvalidWeights {
        reason: "S is not invertible".into(),
    })?;

    let rate = |p: &SMatrix<f64, N, N>,
                a_t: &SMatrix<f64, N, N>,
                b_t: &SMatrix<f64, N, 4>,
                q_t: &SMatrix<f64, N, N>|
     -> SMatrix<f64, N, N> {
        -a_t.transpose() * p - p * a_t + p * b_t * s_inv * b_t.transpose() * p - q_t
    };

    let mut solutions = vec![SMatrix::<f64, N, N>::zeros(); n];
    solutions[n - 1] = *f_terminal;

    for i in (1..n).rev() {
        let h = times[i - 1] - times[i]; // negative
        let (a1, b1, q1) = (&a[i], &b[i], &q[i]);
        let am = midpoint4(a, i - 1);
        let bm = midpoint4(b, i - 1);
        let qm = midpoint4(q, i - 1);
        let (a0, b0, q0) = (&a[i - 1], &b[i - 1], &q[i - 1]);

        let p = &solutions[i];
        let k1 = rate(p, a1, b1, q1);
        let k2 = rate(&(p + k1 * (h * 0.5)), &am, &bm, &qm);
        let k3 = rate(&(p + k2 * (h * 0.5)), &am, &bm, &qm);
        let k4 = rate(&(p + k3 * h), a0, b0, q0);
        let mut next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        next = (next + next.transpose()) * 0.5;

        let norm = next.abs().max();
        if !norm.is_finite() || norm > BLOWUP_GUARD {
            return Err(Error::RiccatiBlowup {
                t: times[i - 1],
                norm,
            });
        }
        solutions[i - 1] = next;
    }

    let gains = solutions
        .iter()
        .zip(b.iter())
        .map(|(p, b_t)| s_inv * b_t.transpose() * p)
        .collect();

    Ok(GainSchedule {
        times: times.to_vec(),
        gains,
        solutions,
    })
}
