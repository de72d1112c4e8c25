//! Task families, loss parameters and per-frame task assembly.
//!
//! A task configuration file has a `families` table holding the loss
//! parameters and weight of each task family, and an optional `tasks` array
//! listing which tasks to build. Without `tasks` the full default set is
//! used: six pose DoFs, velocity/acceleration/jerk per joint, every
//! non-adjacent capsule pair, and manipulability.
//!
//! ```toml
//! [families.joint_velocity]
//! loss_kind = "swamp_groove"
//! c = 0.2
//! a1 = 10.0
//! a2 = 1.0
//! m = 2
//! n = 4
//! weight = 1.0
//!
//! [[tasks]]
//! kind = "joint_velocity"   # all joints
//!
//! [[tasks]]
//! kind = "joint_jerk"
//! index = 2
//! weight = 0.5
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ErrorMap, GoalUpdate, TaskKind, TaskSpec};
use crate::error::{Error, Result};
use crate::loss::{GoalRange, LossKind, LossParams};
use crate::robot::RobotModel;

/// Minimum allowed surface distance between non-adjacent links, in metres.
pub const MIN_LINK_DISTANCE: f64 = 0.02;

const DEFAULT_TASKS: &str = include_str!("../../assets/tasks.toml");

const FAMILY_NAMES: [&str; 9] = [
    "position",
    "position_ranged",
    "rotation",
    "rotation_ranged",
    "joint_velocity",
    "joint_acceleration",
    "joint_jerk",
    "self_collision",
    "manipulability",
];

/// How pose tolerances enter the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Zero tolerances become groove tasks, finite ones swamp tasks, infinite
    /// ones are dropped.
    Ranged,
    /// Every pose DoF is a groove task at zero error; tolerances are ignored.
    Relaxed,
    /// Tolerances are folded into the pose error by the discontinuous
    /// dead-zone map before a groove loss; pose tasks only.
    Trac,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Ranged, Mode::Relaxed, Mode::Trac];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ranged" => Ok(Mode::Ranged),
            "relaxed" => Ok(Mode::Relaxed),
            "trac" => Ok(Mode::Trac),
            other => Err(Error::invalid(format!("unknown mode `{other}` (expected ranged, relaxed or trac)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ranged => "ranged",
            Mode::Relaxed => "relaxed",
            Mode::Trac => "trac",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Loss parameters and weight shared by every task of one family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub loss_kind: LossKind,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub a1: f64,
    #[serde(default)]
    pub a2: f64,
    #[serde(default = "two")]
    pub m: u32,
    #[serde(default = "two")]
    pub n: u32,
    pub weight: f64,
    /// Width of one-sided ranges, in task units.
    #[serde(default = "one")]
    pub width: f64,
}

fn one() -> f64 {
    1.0
}

fn two() -> u32 {
    2
}

impl FamilyParams {
    pub fn loss_params(&self) -> Result<LossParams> {
        LossParams::new(self.c, self.a1, self.a2, self.m, self.n)
    }
}

/// Partial override of a family's loss parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsOverride {
    pub c: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub m: Option<u32>,
    pub n: Option<u32>,
    pub width: Option<f64>,
}

/// One entry of the explicit task list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub kind: TaskKind,
    /// Restricts the entry to one axis, joint or pair; all of them if absent.
    #[serde(default)]
    pub index: Option<usize>,
    #[serde(default)]
    pub loss_kind: Option<LossKind>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub params: Option<ParamsOverride>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(default)]
    pub families: BTreeMap<String, FamilyParams>,
    #[serde(default)]
    pub tasks: Vec<TaskEntry>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig::from_toml_str(DEFAULT_TASKS).expect("bundled task configuration is valid")
    }
}

impl TaskConfig {
    /// Parses a configuration. Families missing from `text` keep their
    /// bundled defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut config: TaskConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("task configuration: {e}")))?;
        if text != DEFAULT_TASKS {
            let defaults: TaskConfig = toml::from_str(DEFAULT_TASKS).expect("bundled task configuration is valid");
            for (name, fam) in defaults.families {
                config.families.entry(name).or_insert(fam);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, fam) in &self.families {
            if !FAMILY_NAMES.contains(&name.as_str()) {
                return Err(Error::config(format!("families.{name}: unknown task family")));
            }
            fam.loss_params().map_err(|e| Error::config(format!("families.{name}: {e}")))?;
            if !(fam.weight > 0.0) || !(fam.width > 0.0) {
                return Err(Error::config(format!("families.{name}: weight and width must be positive")));
            }
        }
        for name in FAMILY_NAMES {
            if !self.families.contains_key(name) {
                return Err(Error::config(format!("families.{name}: missing")));
            }
        }
        Ok(())
    }

    pub fn family(&self, name: &str) -> &FamilyParams {
        &self.families[name]
    }

    pub fn family_mut(&mut self, name: &str) -> Option<&mut FamilyParams> {
        self.families.get_mut(name)
    }

    /// Builds the task list for one frame.
    pub fn assemble(&self, model: &RobotModel, goal: &GoalUpdate, mode: Mode) -> Result<Vec<TaskSpec>> {
        let default_entries;
        let entries = if self.tasks.is_empty() {
            default_entries = default_task_entries();
            &default_entries
        } else {
            &self.tasks
        };

        let mut out = Vec::new();
        for entry in entries {
            if mode == Mode::Trac && !entry.kind.is_pose() {
                continue;
            }
            let count = match entry.kind {
                TaskKind::PositionDof | TaskKind::RotationDof => 3,
                TaskKind::JointVelocity | TaskKind::JointAcceleration | TaskKind::JointJerk => model.dof(),
                TaskKind::SelfCollisionPair => model.collision_pairs().len(),
                TaskKind::Manipulability => 1,
            };
            let indices: Vec<usize> = match entry.index {
                Some(i) if i >= count => {
                    return Err(Error::config(format!("{} task index {i} out of range", entry.kind.name())));
                }
                Some(i) => vec![i],
                None => (0..count).collect(),
            };
            for i in indices {
                if let Some(task) = self.build(model, goal, mode, entry, i)? {
                    task.validate(model)?;
                    out.push(task);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::config("task assembly produced no tasks"));
        }
        Ok(out)
    }

    fn build(&self, model: &RobotModel, goal: &GoalUpdate, mode: Mode, entry: &TaskEntry, i: usize) -> Result<Option<TaskSpec>> {
        let kind = entry.kind;
        let (family, range, error_map) = match kind {
            TaskKind::PositionDof | TaskKind::RotationDof => {
                let (exact, ranged) = if kind == TaskKind::PositionDof {
                    ("position", "position_ranged")
                } else {
                    ("rotation", "rotation_ranged")
                };
                let tol = goal.tolerances[if kind == TaskKind::PositionDof { i } else { i + 3 }];
                match mode {
                    Mode::Relaxed => (exact, GoalRange::exact(0.0), ErrorMap::Identity),
                    _ if tol.is_unbounded() => return Ok(None),
                    _ if tol.is_degenerate() => (exact, GoalRange::exact(0.0), ErrorMap::Identity),
                    Mode::Ranged => (ranged, GoalRange { preferred: Some(0.0), ..tol }, ErrorMap::Identity),
                    Mode::Trac => (
                        exact,
                        GoalRange::exact(0.0),
                        ErrorMap::DeadZone { lower: tol.lower, upper: tol.upper },
                    ),
                }
            }
            TaskKind::JointVelocity => {
                let v = model.joints()[i].velocity_limit;
                ("joint_velocity", GoalRange::with_preferred(-v, v, 0.0)?, ErrorMap::Identity)
            }
            TaskKind::JointAcceleration => {
                let a = model.joints()[i].acceleration_limit;
                ("joint_acceleration", GoalRange::with_preferred(-a, a, 0.0)?, ErrorMap::Identity)
            }
            TaskKind::JointJerk => ("joint_jerk", GoalRange::exact(0.0), ErrorMap::Identity),
            TaskKind::SelfCollisionPair => (
                "self_collision",
                GoalRange::new(MIN_LINK_DISTANCE, f64::INFINITY)?,
                ErrorMap::Identity,
            ),
            TaskKind::Manipulability => ("manipulability", GoalRange::exact(1.0), ErrorMap::Identity),
        };

        let fam = self.family(family);
        let o = entry.params.unwrap_or_default();
        let params = LossParams::new(
            o.c.unwrap_or(fam.c),
            o.a1.unwrap_or(fam.a1),
            o.a2.unwrap_or(fam.a2),
            o.m.unwrap_or(fam.m),
            o.n.unwrap_or(fam.n),
        )
        .map_err(|e| Error::config(format!("{} task {i}: {e}", kind.name())))?;
        Ok(Some(TaskSpec {
            kind,
            index: i,
            loss_kind: entry.loss_kind.unwrap_or(fam.loss_kind),
            range,
            params,
            weight: entry.weight.unwrap_or(fam.weight),
            width: o.width.unwrap_or(fam.width),
            error_map,
        }))
    }
}

fn default_task_entries() -> Vec<TaskEntry> {
    [
        TaskKind::PositionDof,
        TaskKind::RotationDof,
        TaskKind::JointVelocity,
        TaskKind::JointAcceleration,
        TaskKind::JointJerk,
        TaskKind::SelfCollisionPair,
        TaskKind::Manipulability,
    ]
    .into_iter()
    .map(|kind| TaskEntry { kind, index: None, loss_kind: None, weight: None, params: None })
    .collect()
}
