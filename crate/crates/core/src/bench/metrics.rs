//! Motion-quality metrics of a solved goal stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::GoalRange;
use crate::objective::{position_error_vector, rotation_error_vector, GoalUpdate};
use crate::robot::{forward_kinematics, manipulability, RobotModel};

/// Metrics of one run, or their mean over several runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Metres, over position DoFs with zero tolerance.
    pub mean_pos_error: f64,
    /// Radians, over rotation DoFs with zero tolerance.
    pub mean_rot_error: f64,
    pub mean_joint_velocity: f64,
    pub mean_joint_acceleration: f64,
    pub mean_joint_jerk: f64,
    pub mean_manipulability: f64,
    pub exceed_tolerance_count: f64,
    /// Total L1 joint-space path length, in radians.
    pub mean_joint_movement: f64,
}

impl Metrics {
    pub const FIELDS: [&'static str; 8] = [
        "mean_pos_error",
        "mean_rot_error",
        "mean_joint_velocity",
        "mean_joint_acceleration",
        "mean_joint_jerk",
        "mean_manipulability",
        "exceed_tolerance_count",
        "mean_joint_movement",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.mean_pos_error,
            self.mean_rot_error,
            self.mean_joint_velocity,
            self.mean_joint_acceleration,
            self.mean_joint_jerk,
            self.mean_manipulability,
            self.exceed_tolerance_count,
            self.mean_joint_movement,
        ]
    }

    fn from_values(v: [f64; 8]) -> Self {
        Metrics {
            mean_pos_error: v[0],
            mean_rot_error: v[1],
            mean_joint_velocity: v[2],
            mean_joint_acceleration: v[3],
            mean_joint_jerk: v[4],
            mean_manipulability: v[5],
            exceed_tolerance_count: v[6],
            mean_joint_movement: v[7],
        }
    }
}

/// Means and sample standard deviations over a set of runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean: Metrics,
    pub std: Metrics,
    pub trials: usize,
}

impl MetricsReport {
    /// Aggregates runs in the order given.
    pub fn aggregate(runs: &[Metrics]) -> Self {
        let n = runs.len();
        if n == 0 {
            return MetricsReport::default();
        }
        let mut mean = [0.0; 8];
        for r in runs {
            for (m, v) in mean.iter_mut().zip(r.values()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = [0.0; 8];
        if n > 1 {
            for r in runs {
                for ((s, v), m) in var.iter_mut().zip(r.values()).zip(mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s = (*s / (n - 1) as f64).sqrt());
        }
        MetricsReport { mean: Metrics::from_values(mean), std: Metrics::from_values(var), trials: n }
    }

    pub fn single(run: Metrics) -> Self {
        MetricsReport { mean: run, std: Metrics::default(), trials: 1 }
    }
}

/// Pose error of one frame, `[x, y, z, rx, ry, rz]` in the goal frame.
pub fn pose_errors(model: &RobotModel, q: &[f64], goal: &GoalUpdate) -> Result<[f64; 6]> {
    let frames = forward_kinematics(model, q)?;
    let ee = &frames[model.dof()];
    let p = position_error_vector(ee, &goal.target);
    let r = rotation_error_vector(ee, &goal.target);
    Ok([p.x, p.y, p.z, r.x, r.y, r.z])
}

/// Whether any DoF with a finite, nonzero tolerance is out of its bounds.
pub fn exceeds_tolerance(errors: &[f64; 6], tolerances: &[GoalRange; 6]) -> bool {
    errors
        .iter()
        .zip(tolerances)
        .any(|(e, t)| !t.is_degenerate() && !t.is_unbounded() && !t.contains(*e))
}

/// Metrics of the configurations `trajectory[t]` solved for `goals[t]`.
///
/// Derivatives use backward differences with the history before the first
/// frame taken to be at rest at `trajectory[0]`. Tolerances come from each
/// goal.
pub fn compute_metrics(model: &RobotModel, trajectory: &[Vec<f64>], goals: &[GoalUpdate], dt: f64) -> Result<Metrics> {
    if trajectory.len() != goals.len() {
        return Err(Error::invalid(format!(
            "trajectory has {} frames but there are {} goals",
            trajectory.len(),
            goals.len()
        )));
    }
    if trajectory.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("frame period must be positive, got {dt}")));
    }
    let n = model.dof();
    let frames = trajectory.len() as f64;
    let at = |t: isize| &trajectory[t.max(0) as usize];

    let mut m = Metrics::default();
    for (t, (q, goal)) in trajectory.iter().zip(goals).enumerate() {
        model.check_dof(q)?;
        let errors = pose_errors(model, q, goal)?;
        let exact = |k: usize| goal.tolerances[k].is_degenerate();
        let norm = |range: std::ops::Range<usize>| {
            range.filter(|&k| exact(k)).map(|k| errors[k] * errors[k]).sum::<f64>().sqrt()
        };
        m.mean_pos_error += norm(0..3);
        m.mean_rot_error += norm(3..6);
        if exceeds_tolerance(&errors, &goal.tolerances) {
            m.exceed_tolerance_count += 1.0;
        }
        m.mean_manipulability += manipulability(model, q)?;

        let t = t as isize;
        let (q1, q2, q3) = (at(t - 1), at(t - 2), at(t - 3));
        for i in 0..n {
            let step = q[i] - q1[i];
            m.mean_joint_velocity += step.abs() / dt;
            m.mean_joint_acceleration += (q[i] - 2.0 * q1[i] + q2[i]).abs() / (dt * dt);
            m.mean_joint_jerk += (q[i] - 3.0 * q1[i] + 3.0 * q2[i] - q3[i]).abs() / (dt * dt * dt);
            m.mean_joint_movement += step.abs();
        }
    }
    m.mean_pos_error /= frames;
    m.mean_rot_error /= frames;
    m.mean_manipulability /= frames;
    let samples = frames * n as f64;
    m.mean_joint_velocity /= samples;
    m.mean_joint_acceleration /= samples;
    m.mean_joint_jerk /= samples;
    Ok(m)
}
