//! Scaled-axis (rotation vector) conversions.

use nalgebra::{Matrix3, Rotation3, Vector3};

/// Above this angle the axis is recovered from the symmetric part of the
/// matrix, where the skew part has lost precision.
const NEAR_PI: f64 = 3.0;

/// Below this `sin(angle)` a rotation is treated as an exact half turn.
const HALF_TURN_SIN: f64 = 1e-12;

/// Converts a rotation to its scaled-axis vector: unit axis times angle, with
/// the angle in `[0, pi]`.
///
/// At exactly `pi` the axis is ambiguous; the sign is fixed so that the
/// largest-magnitude component is positive.
pub fn scaled_axis(rotation: &Rotation3<f64>) -> Vector3<f64> {
    let m = rotation.matrix();
    let vee = 0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = vee.norm();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = sin.atan2(cos);

    if angle < NEAR_PI {
        if sin == 0.0 {
            return Vector3::zeros();
        }
        return vee * (angle / sin);
    }

    let axis = axis_from_symmetric_part(m, cos);
    // vee = sin(angle) * axis carries the sign until it drowns in round-off.
    let aligned = if sin > HALF_TURN_SIN && axis.dot(&vee) < 0.0 { -axis } else { axis };
    aligned * angle
}

/// Axis of a rotation whose angle is near pi, from `R + R^T = 2 cos I + 2 (1 - cos) a a^T`.
/// The component with the largest magnitude is returned positive.
fn axis_from_symmetric_part(m: &Matrix3<f64>, cos: f64) -> Vector3<f64> {
    let one_minus_cos = 1.0 - cos;
    let diag = Vector3::new(m[(0, 0)], m[(1, 1)], m[(2, 2)]);
    let k = diag.imax();
    let ak = ((diag[k] - cos) / one_minus_cos).max(0.0).sqrt();
    let mut axis = Vector3::zeros();
    axis[k] = ak;
    for j in 0..3 {
        if j != k {
            axis[j] = (m[(k, j)] + m[(j, k)]) / (2.0 * one_minus_cos * ak);
        }
    }
    let axis = axis.normalize();
    let big = axis.iamax();
    if axis[big] < 0.0 {
        -axis
    } else {
        axis
    }
}

/// Inverse of [`scaled_axis`].
pub fn from_scaled_axis(v: &Vector3<f64>) -> Rotation3<f64> {
    Rotation3::new(*v)
}

/// Rotation from URDF-style roll/pitch/yaw (fixed axes x, then y, then z).
pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Rotation3<f64> {
    Rotation3::from_euler_angles(roll, pitch, yaw)
}
