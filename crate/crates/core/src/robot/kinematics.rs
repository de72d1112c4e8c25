use nalgebra::{DMatrix, Matrix6xX};

use super::{Pose, RobotModel};
use crate::error::Result;

/// 6 x n geometric Jacobian: linear velocity rows first, then angular.
pub type Jacobian = Matrix6xX<f64>;

/// World poses of every moving link followed by the end-effector.
///
/// Entry `i < n` is the frame of the link driven by joint `i` (its origin is
/// the joint origin); entry `n` is the end-effector.
pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<Vec<Pose>> {
    model.check_dof(q)?;
    let mut frames = Vec::with_capacity(model.dof() + 1);
    let mut current = Pose::identity();
    for (joint, &angle) in model.joints().iter().zip(q) {
        current = current * joint.local_transform(angle);
        frames.push(current);
    }
    frames.push(current * *model.end_effector_offset());
    Ok(frames)
}

pub fn geometric_jacobian(model: &RobotModel, q: &[f64]) -> Result<Jacobian> {
    let frames = forward_kinematics(model, q)?;
    Ok(jacobian_from_frames(model, &frames))
}

/// Jacobian from already computed [`forward_kinematics`] output.
pub fn jacobian_from_frames(model: &RobotModel, frames: &[Pose]) -> Jacobian {
    let n = model.dof();
    let ee = frames[n].position;
    let mut jac = Jacobian::zeros(n);
    for (i, joint) in model.joints().iter().enumerate() {
        let z = frames[i].rotation * joint.axis.into_inner();
        let v = z.cross(&(ee - frames[i].position));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&v);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    jac
}

/// Yoshikawa manipulability `sqrt(det(J J^T))`.
pub fn manipulability(model: &RobotModel, q: &[f64]) -> Result<f64> {
    Ok(manipulability_of_jacobian(&geometric_jacobian(model, q)?))
}

/// Manipulability of a geometric Jacobian.
///
/// Chains with six or more joints use all six rows. Shorter chains cannot
/// span a 6-D twist, so only the three linear-velocity rows are used, and
/// when there are fewer joints than rows the Gram determinant of the columns
/// is taken instead. In every case the result is the product of the singular
/// values of the selected block.
pub fn manipulability_of_jacobian(jac: &Jacobian) -> f64 {
    let n = jac.ncols();
    let det = if n >= 6 {
        (jac * jac.transpose()).determinant()
    } else {
        let rows: DMatrix<f64> = jac.rows(0, 3).into_owned();
        if n >= 3 {
            (&rows * rows.transpose()).determinant()
        } else {
            (rows.transpose() * &rows).determinant()
        }
    };
    det.max(0.0).sqrt()
}
