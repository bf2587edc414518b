//! Minimal SO(3)/SE(3) geometry: rotation matrices, the Rodrigues
//! exponential, rotation distances, and the pose/twist value types everything
//! else is built on.
//!
//! Rotations are stored as orthonormal 3x3 matrices rather than quaternions
//! because the pose-integration rule is stated in matrix form
//! (`R_i = exp([w dt]x) R_{i-1}`). Composition re-orthonormalizes so that
//! drift stays far below 1e-9 over 10^4 chained composes.

use nalgebra::{Matrix3, Vector3};

/// Threshold below which `rotation_exp` switches to its Taylor form.
/// Under 1e-8 rad the `sin(t)/t` style coefficients lose all their
/// significant digits to cancellation, while the quadratic Taylor error
/// (~t^3/6) is below f64 resolution.
const SMALL_ANGLE: f64 = 1e-8;

/// Skew-symmetric cross-product matrix: `skew(w) * x == w.cross(&x)`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -w.z, w.y, //
        w.z, 0.0, -w.x, //
        -w.y, w.x, 0.0,
    )
}

/// A 3D rotation, kept orthonormal with determinant +1.
///
/// Construct via [`Rotation::identity`], [`rotation_exp`], or
/// [`Rotation::from_unit_quaternion`]; arbitrary matrices go through
/// [`Rotation::from_matrix`], which projects to the nearest orthonormal
/// frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Accepts a matrix that is already close to orthonormal (within `1e-6`
    /// elementwise on `R^T R - I` and `det R - 1`) and re-orthonormalizes it.
    /// Returns `None` for matrices that are not near a proper rotation.
    pub fn from_matrix(m: Matrix3<f64>) -> Option<Self> {
        let candidate = Rotation(m).renormalized();
        let defect = (m - candidate.0).abs().max();
        if defect < 1e-6 && m.iter().all(|v| v.is_finite()) {
            Some(candidate)
        } else {
            None
        }
    }

    /// Unit quaternion in (w, x, y, z) order. The caller is responsible for
    /// normalization; see `dataset` for the tolerance applied to files.
    pub fn from_unit_quaternion(q: [f64; 4]) -> Self {
        let [w, x, y, z] = q;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        // Standard quaternion-to-matrix expansion; exact orthonormality
        // follows from |q| = 1 up to rounding, so renormalize once.
        let m = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Rotation(m).renormalized()
    }

    /// Unit quaternion (w, x, y, z) with w >= 0 (the sign ambiguity is fixed
    /// so that equal rotations serialize identically).
    pub fn to_unit_quaternion(&self) -> [f64; 4] {
        let m = &self.0;
        // Shepperd's method: pick the largest of the four squared components
        // to avoid catastrophic cancellation.
        let t = m.trace();
        let (w, x, y, z);
        if t > 0.0 {
            let s = (t + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if w < 0.0 {
            [-w / n, -x / n, -y / n, -z / n]
        } else {
            [w / n, x / n, y / n, z / n]
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transposed(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// `self * other`, re-orthonormalized so long chains of composes do not
    /// accumulate orthogonality drift.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0).renormalized()
    }

    /// Nearest orthonormal frame via modified Gram-Schmidt on the columns;
    /// the third column is rebuilt from a cross product, which also pins
    /// det = +1 for inputs near a proper rotation.
    pub fn renormalized(&self) -> Rotation {
        let c0 = self.0.column(0).into_owned();
        let c1 = self.0.column(1).into_owned();
        let b0 = c0.normalize();
        let b1 = (c1 - b0 * c1.dot(&b0)).normalize();
        let b2 = b0.cross(&b1);
        Rotation(Matrix3::from_columns(&[b0, b1, b2]))
    }

    /// Max elementwise deviation of `R^T R` from the identity. Diagnostic
    /// used by tests and by `from_matrix`.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }
}

/// Rodrigues exponential: the rotation by angle `|w|` about axis `w/|w|`,
///
/// `exp([w]x) = I + sin(t) K + (1 - cos(t)) K^2`, `K = skew(w/t)`, `t = |w|`.
///
/// For `|w| <` 1e-8 rad the second-order Taylor form `I + [w]x + 1/2 [w]x^2`
/// is used instead to avoid the 0/0 in `K`.
pub fn rotation_exp(axis_angle: &Vector3<f64>) -> Rotation {
    let theta = axis_angle.norm();
    let k = skew(axis_angle);
    let m = if theta < SMALL_ANGLE {
        Matrix3::identity() + k + k * k * 0.5
    } else {
        let k = k / theta;
        Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
    };
    // Both branches are orthonormal to within a few ulps at their angles;
    // renormalization keeps downstream compose chains clean.
    Rotation(m).renormalized()
}

/// Left Jacobian of the rotation exponential: maps an additive change of the
/// axis-angle vector to the equivalent left-multiplied increment,
/// `exp([w + dw]x) ~= exp([J_l(w) dw]x) exp([w]x)`.
///
/// `J_l = I + (1 - cos t)/t^2 [w]x + (t - sin t)/t^3 [w]x^2` with `t = |w|`.
/// Below 1e-4 rad the quadratic Taylor form `I + 1/2 [w]x + 1/6 [w]x^2` is
/// used: the `(1 - cos t)` numerator loses digits to cancellation well
/// before the exponential's own 1e-8 threshold, while the Taylor truncation
/// error (~t^3/24) is already below 1e-13 there.
pub(crate) fn so3_left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let t = w.norm();
    let k = skew(w);
    if t < 1e-4 {
        Matrix3::identity() + k * 0.5 + k * k * (1.0 / 6.0)
    } else {
        let t2 = t * t;
        Matrix3::identity() + k * ((1.0 - t.cos()) / t2) + k * k * ((t - t.sin()) / (t2 * t))
    }
}

/// Geodesic angle between two rotations in radians:
/// `arccos(clamp((trace(a^T b) - 1) / 2, -1, 1))`, in `[0, pi]`.
pub fn geodesic_angle(a: &Rotation, b: &Rotation) -> f64 {
    let c = ((a.0.transpose() * b.0).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos()
}

/// Squared chordal (Frobenius) distance `sum_ij (a_ij - b_ij)^2`, which
/// equals `8 sin^2(theta/2)` for geodesic angle theta. Smooth everywhere,
/// which is why the window objective uses it instead of the geodesic angle.
pub fn chordal_sq(a: &Rotation, b: &Rotation) -> f64 {
    (a.0 - b.0).norm_squared()
}

/// Object pose at one frame: orientation plus position of the object origin
/// in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose { rotation: Rotation::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose { rotation, translation }
    }

    /// Maps a body-frame point into the world frame.
    pub fn transform_point(&self, body: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(body) + self.translation
    }
}

/// Instantaneous rigid-body motion: linear velocity of a reference point
/// plus angular velocity, both in world coordinates. Which point `linear`
/// refers to is context-dependent (the estimator reports its rotation
/// center; the tracker transports to the tracked origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Twist { linear: Vector3::zeros(), angular: Vector3::zeros() }
    }

    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Twist { linear, angular }
    }

    /// Velocity of the material point at `p` given that `self.linear` is the
    /// velocity of the material point at `reference`:
    /// `v_p = v + w x (p - reference)`.
    pub fn velocity_at(&self, p: &Vector3<f64>, reference: &Vector3<f64>) -> Vector3<f64> {
        self.linear + self.angular.cross(&(p - reference))
    }

    /// Same twist expressed with `linear` re-referenced from `from` to `to`.
    pub fn transported(&self, from: &Vector3<f64>, to: &Vector3<f64>) -> Twist {
        Twist { linear: self.velocity_at(to, from), angular: self.angular }
    }
}
