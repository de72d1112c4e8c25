//! Scalar task functions of the joint configuration.

use nalgebra::Vector3;

use super::{GoalUpdate, SolverState};
use crate::error::Result;
use crate::robot::{capsule_distance, forward_kinematics, Pose, RobotModel};
use crate::rotation::scaled_axis;

/// End-effector position error expressed in the goal frame.
pub fn position_error_vector(ee: &Pose, goal: &Pose) -> Vector3<f64> {
    goal.rotation.inverse() * (ee.position - goal.position)
}

/// Scaled axis of the end-effector rotation relative to the goal rotation.
pub fn rotation_error_vector(ee: &Pose, goal: &Pose) -> Vector3<f64> {
    scaled_axis(&(goal.rotation.inverse() * ee.rotation))
}

/// Component `axis` of the position error in the goal frame, in metres.
pub fn position_error(model: &RobotModel, q: &[f64], goal: &GoalUpdate, axis: usize) -> Result<f64> {
    check_axis(axis)?;
    let frames = forward_kinematics(model, q)?;
    Ok(position_error_vector(&frames[model.dof()], &goal.target)[axis])
}

/// Component `axis` of the rotation error (scaled axis, goal frame), in radians.
pub fn rotation_error(model: &RobotModel, q: &[f64], goal: &GoalUpdate, axis: usize) -> Result<f64> {
    check_axis(axis)?;
    let frames = forward_kinematics(model, q)?;
    Ok(rotation_error_vector(&frames[model.dof()], &goal.target)[axis])
}

fn check_axis(axis: usize) -> Result<()> {
    if axis > 2 {
        return Err(crate::Error::invalid(format!("axis index {axis} is not 0, 1 or 2")));
    }
    Ok(())
}

/// Backward-difference velocity, acceleration and jerk of one joint.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JointDerivatives {
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
}

/// Derivatives of joint `i` if the robot moves to `q` from the history in `state`.
pub fn joint_derivatives(state: &SolverState, q: &[f64], i: usize) -> JointDerivatives {
    let dt = state.dt;
    let (q0, q1, q2, q3) = (q[i], state.q_prev[i], state.q_prev2[i], state.q_prev3[i]);
    JointDerivatives {
        velocity: (q0 - q1) / dt,
        acceleration: (q0 - 2.0 * q1 + q2) / (dt * dt),
        jerk: (q0 - 3.0 * q1 + 3.0 * q2 - q3) / (dt * dt * dt),
    }
}

/// Per-joint velocity, acceleration and jerk.
pub fn smoothness_terms(state: &SolverState, q: &[f64]) -> Vec<JointDerivatives> {
    (0..q.len()).map(|i| joint_derivatives(state, q, i)).collect()
}

/// Surface distance of every non-adjacent capsule pair, in
/// [`RobotModel::collision_pairs`] order.
pub fn self_collision_terms(model: &RobotModel, q: &[f64]) -> Result<Vec<((usize, usize), f64)>> {
    let frames = forward_kinematics(model, q)?;
    let capsules = model.posed_capsules(&frames);
    Ok(model
        .collision_pairs()
        .iter()
        .map(|&(a, b)| ((a, b), capsule_distance(&capsules[a], &capsules[b])))
        .collect())
}
