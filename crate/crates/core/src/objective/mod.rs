//! Weighted-sum objective over task losses.

mod config;
mod tasks;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{GoalRange, LossKind, LossParams};
use crate::robot::{forward_kinematics, jacobian_from_frames, manipulability_of_jacobian, Capsule, Pose, RobotModel};

pub use config::{FamilyParams, Mode, TaskConfig, TaskEntry, MIN_LINK_DISTANCE};
pub use tasks::{
    joint_derivatives, position_error, position_error_vector, rotation_error, rotation_error_vector,
    self_collision_terms, smoothness_terms, JointDerivatives,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PositionDof,
    RotationDof,
    JointVelocity,
    JointAcceleration,
    JointJerk,
    SelfCollisionPair,
    Manipulability,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::PositionDof => "position_dof",
            TaskKind::RotationDof => "rotation_dof",
            TaskKind::JointVelocity => "joint_velocity",
            TaskKind::JointAcceleration => "joint_acceleration",
            TaskKind::JointJerk => "joint_jerk",
            TaskKind::SelfCollisionPair => "self_collision_pair",
            TaskKind::Manipulability => "manipulability",
        }
    }

    fn is_pose(self) -> bool {
        matches!(self, TaskKind::PositionDof | TaskKind::RotationDof)
    }
}

/// Transformation applied to a raw task value before the loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ErrorMap {
    #[default]
    Identity,
    /// Values inside `[lower, upper]` (inclusive) become zero; others pass
    /// through unchanged.
    DeadZone { lower: f64, upper: f64 },
}

impl ErrorMap {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ErrorMap::Identity => x,
            ErrorMap::DeadZone { lower, upper } => trac_error_mapping(x, lower, upper),
        }
    }
}

/// Discontinuous tolerance handling: an error inside `[lo, hi]` counts as
/// zero, anything else is reported unchanged.
pub fn trac_error_mapping(p_err: f64, lo: f64, hi: f64) -> f64 {
    if lo <= p_err && p_err <= hi {
        0.0
    } else {
        p_err
    }
}

/// One weighted term of the objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Pose axis (0..3), joint, or collision-pair index; unused for manipulability.
    pub index: usize,
    pub loss_kind: LossKind,
    pub range: GoalRange,
    pub params: LossParams,
    pub weight: f64,
    /// Width of a one-sided range, in task units.
    #[serde(default = "unit_width")]
    pub width: f64,
    #[serde(default)]
    pub error_map: ErrorMap,
}

fn unit_width() -> f64 {
    1.0
}

impl TaskSpec {
    pub fn new(kind: TaskKind, index: usize, loss_kind: LossKind, range: GoalRange, params: LossParams, weight: f64) -> Self {
        TaskSpec { kind, index, loss_kind, range, params, weight, width: 1.0, error_map: ErrorMap::Identity }
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        let what = || format!("{} task {}", self.kind.name(), self.index);
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::config(format!("{}: weight must be positive, got {}", what(), self.weight)));
        }
        if !(self.width > 0.0) {
            return Err(Error::config(format!("{}: width must be positive", what())));
        }
        self.params.validate().map_err(|e| Error::config(format!("{}: {e}", what())))?;
        self.loss_kind
            .check_range(&self.range)
            .map_err(|e| Error::config(format!("{}: {e}", what())))?;
        let limit = match self.kind {
            TaskKind::PositionDof | TaskKind::RotationDof => 3,
            TaskKind::JointVelocity | TaskKind::JointAcceleration | TaskKind::JointJerk => model.dof(),
            TaskKind::SelfCollisionPair => model.collision_pairs().len(),
            TaskKind::Manipulability => usize::MAX,
        };
        if self.index >= limit {
            return Err(Error::config(format!("{}: index out of range (limit {limit})", what())));
        }
        Ok(())
    }
}

/// Streamed goal for one frame: target pose plus per-DoF tolerances
/// `[x, y, z, rx, ry, rz]` on the error expressed in the goal frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalUpdate {
    pub timestamp: f64,
    pub target: Pose,
    pub tolerances: [GoalRange; 6],
}

impl GoalUpdate {
    /// Goal that must be matched exactly in all six DoFs.
    pub fn exact(timestamp: f64, target: Pose) -> Self {
        GoalUpdate { timestamp, target, tolerances: [GoalRange::exact(0.0); 6] }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate(1e-8)?;
        for (i, t) in self.tolerances.iter().enumerate() {
            t.validate()?;
            if !t.contains(0.0) {
                return Err(Error::invalid(format!("tolerance {i} [{}, {}] excludes zero error", t.lower, t.upper)));
            }
        }
        Ok(())
    }
}

/// Configuration history backing the smoothness tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub q_prev: Vec<f64>,
    pub q_prev2: Vec<f64>,
    pub q_prev3: Vec<f64>,
    /// Frame period in seconds.
    pub dt: f64,
}

impl SolverState {
    /// History at rest at `seed`, so the first frame sees no spurious motion.
    pub fn at_rest(seed: &[f64], dt: f64) -> Self {
        SolverState { q_prev: seed.to_vec(), q_prev2: seed.to_vec(), q_prev3: seed.to_vec(), dt }
    }

    /// Pushes a newly solved configuration into the history.
    pub fn advance(&mut self, q: &[f64]) {
        std::mem::swap(&mut self.q_prev3, &mut self.q_prev2);
        std::mem::swap(&mut self.q_prev2, &mut self.q_prev);
        self.q_prev.clear();
        self.q_prev.extend_from_slice(q);
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid(format!("frame period must be positive, got {}", self.dt)));
        }
        if [&self.q_prev, &self.q_prev2, &self.q_prev3].iter().any(|h| h.len() != n) {
            return Err(Error::invalid(format!("history vectors must have {n} entries")));
        }
        Ok(())
    }
}

/// How [`Objective::gradient`] differentiates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GradientScheme {
    #[default]
    Central,
    Forward,
}

/// Per-coordinate finite-difference step.
pub fn gradient_step(q: f64) -> f64 {
    1e-7 * (1.0 + q.abs())
}

/// The objective for one frame, with everything but `q` fixed.
#[derive(Clone, Debug)]
pub struct Objective<'a> {
    model: &'a RobotModel,
    goal: &'a GoalUpdate,
    state: &'a SolverState,
    tasks: &'a [TaskSpec],
    needs_frames: bool,
    needs_jacobian: bool,
    needs_capsules: bool,
}

impl<'a> Objective<'a> {
    /// Validates the task list against the model and returns the objective.
    pub fn new(model: &'a RobotModel, goal: &'a GoalUpdate, state: &'a SolverState, tasks: &'a [TaskSpec]) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::config("the task list is empty"));
        }
        for t in tasks {
            t.validate(model)?;
        }
        state.validate(model.dof())?;
        goal.validate()?;
        Ok(Self::new_unchecked(model, goal, state, tasks))
    }

    pub(crate) fn new_unchecked(
        model: &'a RobotModel,
        goal: &'a GoalUpdate,
        state: &'a SolverState,
        tasks: &'a [TaskSpec],
    ) -> Self {
        let has = |k: TaskKind| tasks.iter().any(|t| t.kind == k);
        let needs_jacobian = has(TaskKind::Manipulability);
        let needs_capsules = has(TaskKind::SelfCollisionPair);
        let needs_frames = needs_jacobian || needs_capsules || tasks.iter().any(|t| t.kind.is_pose());
        Objective { model, goal, state, tasks, needs_frames, needs_jacobian, needs_capsules }
    }

    pub fn model(&self) -> &RobotModel {
        self.model
    }

    pub fn dof(&self) -> usize {
        self.model.dof()
    }

    /// `F(q) = sum_j w_j f_j(chi_j(q))`, summed in task order.
    pub fn value(&self, q: &[f64]) -> f64 {
        let frames = if self.needs_frames {
            forward_kinematics(self.model, q).expect("dimension checked by caller")
        } else {
            Vec::new()
        };
        let (pos_err, rot_err) = match frames.last() {
            Some(ee) => (position_error_vector(ee, &self.goal.target), rotation_error_vector(ee, &self.goal.target)),
            None => (Vector3::zeros(), Vector3::zeros()),
        };
        let capsules: Vec<Capsule> = if self.needs_capsules { self.model.posed_capsules(&frames) } else { Vec::new() };
        let manip = if self.needs_jacobian {
            manipulability_of_jacobian(&jacobian_from_frames(self.model, &frames))
        } else {
            0.0
        };

        let mut total = 0.0;
        for task in self.tasks {
            let raw = match task.kind {
                TaskKind::PositionDof => pos_err[task.index],
                TaskKind::RotationDof => rot_err[task.index],
                TaskKind::JointVelocity => joint_derivatives(self.state, q, task.index).velocity,
                TaskKind::JointAcceleration => joint_derivatives(self.state, q, task.index).acceleration,
                TaskKind::JointJerk => joint_derivatives(self.state, q, task.index).jerk,
                TaskKind::SelfCollisionPair => {
                    let (a, b) = self.model.collision_pairs()[task.index];
                    crate::robot::capsule_distance(&capsules[a], &capsules[b])
                }
                TaskKind::Manipulability => manip,
            };
            let x = task.error_map.apply(raw);
            let loss = task
                .loss_kind
                .eval(x, &task.range, &task.params, task.width)
                .expect("task ranges validated at assembly");
            total += task.weight * loss;
        }
        total
    }

    /// Finite-difference gradient with step [`gradient_step`] per coordinate.
    pub fn gradient(&self, q: &[f64], scheme: GradientScheme) -> Vec<f64> {
        let mut grad = vec![0.0; q.len()];
        self.gradient_into(q, scheme, None, &mut grad);
        grad
    }

    /// Like [`gradient`](Self::gradient), writing into `grad`. `f0` is the value
    /// at `q` if already known (used by the forward scheme).
    pub fn gradient_into(&self, q: &[f64], scheme: GradientScheme, f0: Option<f64>, grad: &mut [f64]) {
        let mut probe = q.to_vec();
        let f0 = match scheme {
            GradientScheme::Forward => f0.unwrap_or_else(|| self.value(q)),
            GradientScheme::Central => 0.0,
        };
        for i in 0..q.len() {
            let h = gradient_step(q[i]);
            probe[i] = q[i] + h;
            let up = self.value(&probe);
            grad[i] = match scheme {
                GradientScheme::Forward => (up - f0) / h,
                GradientScheme::Central => {
                    probe[i] = q[i] - h;
                    (up - self.value(&probe)) / (2.0 * h)
                }
            };
            probe[i] = q[i];
        }
    }
}

/// Objective value at `q`.
pub fn evaluate_objective(
    q: &[f64],
    model: &RobotModel,
    goal: &GoalUpdate,
    state: &SolverState,
    tasks: &[TaskSpec],
) -> Result<f64> {
    model.check_dof(q)?;
    Ok(Objective::new(model, goal, state, tasks)?.value(q))
}

/// Central finite-difference gradient of the objective at `q`.
pub fn objective_gradient(
    q: &[f64],
    model: &RobotModel,
    goal: &GoalUpdate,
    state: &SolverState,
    tasks: &[TaskSpec],
) -> Result<Vec<f64>> {
    model.check_dof(q)?;
    Ok(Objective::new(model, goal, state, tasks)?.gradient(q, GradientScheme::Central))
}
