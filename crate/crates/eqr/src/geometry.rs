//! Matrix Lie group primitives for SO(3) and SE₂(3).
//!
//! Elements of SE₂(3) are stored componentwise as a rotation and two R³
//! slots (velocity-like and position-like). The 5×5 homogeneous embedding
//!
//! ```text
//!     [ R  v  x ]
//! X = [ 0  1  0 ]
//!     [ 0  0  1 ]
//! ```
//!
//! is exposed through [`GroupElement::embed`] and serves as the independent
//! reference representation in tests; all production operations use closed
//! forms on the components.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat5 = SMatrix<f64, 5, 5>;

/// Angles below this are evaluated with truncated series instead of the
/// Rodrigues trigonometric coefficients.
const SMALL_ANGLE: f64 = 1e-6;

/// Guard band on trace(R) + 1; inside it the rotation logarithm is rejected.
const NEAR_PI_TRACE_MARGIN: f64 = 1e-9;

/// Skew-symmetric matrix of `w`, so that `hat(w) * u = w × u`.
pub fn hat(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`]; reads the three independent entries of a
/// skew-symmetric matrix.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A rotation matrix in SO(3).
///
/// The wrapped matrix is expected to satisfy RᵀR = I and det R = +1 to
/// within 1e-9; constructors coming from [`exp_so3`] and group operations
/// preserve this, and [`Rot3::orthonormalize`] projects drifting products
/// back onto the group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3(Mat3);

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Mat3::identity())
    }

    /// Wraps a matrix that is already known to be a rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rot3(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rot3(self.0.transpose())
    }

    /// Deviation from orthonormality, ‖RᵀR − I‖∞.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).abs().max()
    }

    /// Projects the matrix back onto SO(3).
    ///
    /// Two Newton steps of the polar-factor iteration
    /// R ← R(3I − RᵀR)/2, quadratically convergent for the near-orthogonal
    /// drift produced by long composition chains.
    pub fn orthonormalize(&mut self) {
        for _ in 0..2 {
            let correction = Mat3::identity() * 3.0 - self.0.transpose() * self.0;
            self.0 = self.0 * correction * 0.5;
        }
    }
}

impl std::ops::Mul<Rot3> for Rot3 {
    type Output = Rot3;
    fn mul(self, rhs: Rot3) -> Rot3 {
        Rot3(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for Rot3 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl std::ops::Mul<&Vec3> for &Rot3 {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Rodrigues exponential of an axis-angle vector.
pub fn exp_so3(w: &Vec3) -> Rot3 {
    let theta2 = w.norm_squared();
    let wx = hat(w);
    let (a, b) = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        // sin(t)/t and (1-cos(t))/t^2 to second order
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rot3(Mat3::identity() + wx * a + wx * wx * b)
}

/// Rotation logarithm, returning the axis-angle vector with ‖w‖ ≤ π.
///
/// Rejects rotations whose angle is within the degenerate band around π,
/// where the axis cannot be read off the skew part; callers that need a
/// half turn construct it explicitly via [`exp_so3`].
pub fn log_so3(r: &Rot3) -> Result<Vec3> {
    let trace = r.matrix().trace();
    if trace <= -1.0 + NEAR_PI_TRACE_MARGIN {
        return Err(Error::AngleNearPi {
            margin: NEAR_PI_TRACE_MARGIN,
        });
    }
    let cos_theta = ((trace - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let skew = (r.matrix() - r.matrix().transpose()) * 0.5;
    let factor = if theta < SMALL_ANGLE {
        // t / sin(t) to second order
        1.0 + theta * theta / 6.0
    } else {
        theta / theta.sin()
    };
    Ok(vee(&skew) * factor)
}

/// Element of SE₂(3): a rotation plus velocity and position slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub rotation: Rot3,
    pub v_slot: Vec3,
    pub x_slot: Vec3,
}

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement {
            rotation: Rot3::identity(),
            v_slot: Vec3::zeros(),
            x_slot: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Rot3, v_slot: Vec3, x_slot: Vec3) -> Self {
        GroupElement {
            rotation,
            v_slot,
            x_slot,
        }
    }

    /// Group product: (R_X R_Y, R_X v_Y + v_X, R_X x_Y + x_X).
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            rotation: self.rotation * other.rotation,
            v_slot: self.rotation * other.v_slot + self.v_slot,
            x_slot: self.rotation * other.x_slot + self.x_slot,
        }
    }

    /// Group inverse: (Rᵀ, −Rᵀv, −Rᵀx).
    pub fn inverse(&self) -> GroupElement {
        let rt = self.rotation.transpose();
        GroupElement {
            rotation: rt,
            v_slot: -(rt * self.v_slot),
            x_slot: -(rt * self.x_slot),
        }
    }

    /// Adjoint action Ad_X(U) = X Û X⁻¹, in closed form on components.
    pub fn adjoint(&self, u: &AlgebraElement) -> AlgebraElement {
        let rw = self.rotation * u.skew;
        AlgebraElement {
            skew: rw,
            w_v: self.rotation * u.w_v + self.v_slot.cross(&rw),
            w_x: self.rotation * u.w_x + self.x_slot.cross(&rw),
        }
    }

    /// Adjoint as a 9×9 matrix on algebra coordinates (w, w_v, w_x).
    pub fn adjoint_matrix(&self) -> SMatrix<f64, 9, 9> {
        let mut m = SMatrix::<f64, 9, 9>::zeros();
        let r = self.rotation.matrix();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        m.fixed_view_mut::<3, 3>(6, 6).copy_from(r);
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat(&self.v_slot) * r));
        m.fixed_view_mut::<3, 3>(6, 0).copy_from(&(hat(&self.x_slot) * r));
        m
    }

    /// 5×5 homogeneous embedding.
    pub fn embed(&self) -> Mat5 {
        let mut m = Mat5::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v_slot);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.x_slot);
        m
    }

    /// Group logarithm; fails like [`log_so3`] for near-half-turn rotations.
    pub fn log(&self) -> Result<AlgebraElement> {
        let w = log_so3(&self.rotation)?;
        let jinv = so3_left_jacobian_inv(&w);
        Ok(AlgebraElement {
            skew: w,
            w_v: jinv * self.v_slot,
            w_x: jinv * self.x_slot,
        })
    }
}

/// Element of the Lie algebra se₂(3), stored as three vectors: the vee of
/// the skew block plus the two slot columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraElement {
    pub skew: Vec3,
    pub w_v: Vec3,
    pub w_x: Vec3,
}

impl AlgebraElement {
    pub fn zero() -> Self {
        AlgebraElement {
            skew: Vec3::zeros(),
            w_v: Vec3::zeros(),
            w_x: Vec3::zeros(),
        }
    }

    pub fn new(skew: Vec3, w_v: Vec3, w_x: Vec3) -> Self {
        AlgebraElement { skew, w_v, w_x }
    }

    pub fn scale(&self, s: f64) -> AlgebraElement {
        AlgebraElement {
            skew: self.skew * s,
            w_v: self.w_v * s,
            w_x: self.w_x * s,
        }
    }

    pub fn add(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            skew: self.skew + other.skew,
            w_v: self.w_v + other.w_v,
            w_x: self.w_x + other.w_x,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.skew.norm_squared() + self.w_v.norm_squared() + self.w_x.norm_squared()).sqrt()
    }

    /// Lie bracket [U, V], matching the commutator of the 5×5 embeddings.
    pub fn bracket(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            skew: self.skew.cross(&other.skew),
            w_v: self.skew.cross(&other.w_v) - other.skew.cross(&self.w_v),
            w_x: self.skew.cross(&other.w_x) - other.skew.cross(&self.w_x),
        }
    }

    /// 5×5 embedding with zero bottom rows.
    pub fn embed(&self) -> Mat5 {
        let mut m = Mat5::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&self.skew));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.w_v);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.w_x);
        m
    }

    /// Group exponential: exp(Û) = (exp(ŵ), J_l(w) w_v, J_l(w) w_x) with
    /// J_l the left Jacobian of SO(3).
    pub fn exp(&self) -> GroupElement {
        let j = so3_left_jacobian(&self.skew);
        GroupElement {
            rotation: exp_so3(&self.skew),
            v_slot: j * self.w_v,
            x_slot: j * self.w_x,
        }
    }

    /// Coordinates as a flat 9-vector (w, w_v, w_x).
    pub fn to_vector(&self) -> SMatrix<f64, 9, 1> {
        let mut v = SMatrix::<f64, 9, 1>::zeros();
        v.fixed_view_mut::<3, 1>(0, 0).copy_from(&self.skew);
        v.fixed_view_mut::<3, 1>(3, 0).copy_from(&self.w_v);
        v.fixed_view_mut::<3, 1>(6, 0).copy_from(&self.w_x);
        v
    }
}

/// Left Jacobian of SO(3): J_l(w) = I + (1−cosθ)/θ² ŵ + (θ−sinθ)/θ³ ŵ².
pub fn so3_left_jacobian(w: &Vec3) -> Mat3 {
    let theta2 = w.norm_squared();
    let wx = hat(w);
    let (a, b) = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Mat3::identity() + wx * a + wx * wx * b
}

/// Inverse left Jacobian of SO(3).
pub fn so3_left_jacobian_inv(w: &Vec3) -> Mat3 {
    let theta2 = w.norm_squared();
    let wx = hat(w);
    let c = if theta2 < 1e-8 {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let theta = theta2.sqrt();
        let half = theta * 0.5;
        (1.0 - half * half.cos() / half.sin()) / theta2
    };
    Mat3::identity() - wx * 0.5 + wx * wx * c
}

/// Truncated dexp⁻¹ used by the Munthe-Kaas integrator stages:
/// v − ½[u, v] + 1/12 [u, [u, v]].
pub fn dexp_inv(u: &AlgebraElement, v: &AlgebraElement) -> AlgebraElement {
    let uv = u.bracket(v);
    let uuv = u.bracket(&uv);
    v.add(&uv.scale(-0.5)).add(&uuv.scale(1.0 / 12.0))
}
