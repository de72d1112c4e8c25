//! TOML robot description files.
//!
//! ```toml
//! name = "planar"
//! home = [0.0, 0.5]                     # optional
//!
//! [[joints]]
//! name = "shoulder"
//! axis = [0.0, 0.0, 1.0]
//! origin_translation = [0.0, 0.0, 0.0]  # metres, in the parent link frame
//! origin_rotation = [0.0, 0.0, 0.0]     # scaled axis, radians
//! limits = { position = [-3.14, 3.14], velocity = 2.0, acceleration = 8.0 }
//!
//! [[capsules]]
//! link = "shoulder"                     # `base` or a joint name
//! a = [0.0, 0.0, 0.0]
//! b = [1.0, 0.0, 0.0]
//! radius = 0.05
//!
//! [end_effector_offset]
//! translation = [1.0, 0.0, 0.0]
//! rotation = [0.0, 0.0, 0.0]
//! ```
//!
//! `velocity` and `acceleration` are optional and default to
//! [`DEFAULT_VELOCITY_LIMIT`] and [`DEFAULT_ACCELERATION_LIMIT`].

use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{CapsuleShape, JointSpec, Pose, RobotModel};
use crate::error::{Error, Result};

pub const DEFAULT_VELOCITY_LIMIT: f64 = std::f64::consts::PI;
pub const DEFAULT_ACCELERATION_LIMIT: f64 = 10.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDescription {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<Vec<f64>>,
    pub joints: Vec<JointEntry>,
    #[serde(default)]
    pub capsules: Vec<CapsuleEntry>,
    #[serde(default)]
    pub end_effector_offset: TransformEntry,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub name: String,
    #[serde(default = "revolute", rename = "type")]
    pub kind: String,
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin_translation: [f64; 3],
    #[serde(default)]
    pub origin_rotation: [f64; 3],
    pub limits: LimitsEntry,
}

fn revolute() -> String {
    "revolute".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsEntry {
    pub position: [f64; 2],
    #[serde(default = "default_velocity")]
    pub velocity: f64,
    #[serde(default = "default_acceleration")]
    pub acceleration: f64,
}

fn default_velocity() -> f64 {
    DEFAULT_VELOCITY_LIMIT
}

fn default_acceleration() -> f64 {
    DEFAULT_ACCELERATION_LIMIT
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsuleEntry {
    pub link: String,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformEntry {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
}

impl RobotDescription {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("robot description: {e}")))
    }

    pub fn into_model(self) -> Result<RobotModel> {
        let mut joints = Vec::with_capacity(self.joints.len());
        for (i, j) in self.joints.iter().enumerate() {
            let at = |key: &str, e: Error| Error::config(format!("joints[{i}].{key}: {e}"));
            if j.kind != "revolute" {
                return Err(Error::config(format!(
                    "joints[{i}].type: only revolute joints are supported, got `{}`",
                    j.kind
                )));
            }
            let origin = Pose::from_scaled_axis(Vector3::from(j.origin_translation), Vector3::from(j.origin_rotation));
            let [lo, hi] = j.limits.position;
            if !(lo < hi) {
                return Err(Error::config(format!("joints[{i}].limits.position: lower {lo} must be below upper {hi}")));
            }
            let spec = JointSpec::new(j.name.clone(), Vector3::from(j.axis), origin, lo, hi)
                .map_err(|e| at("axis", e))?
                .with_motion_limits(j.limits.velocity, j.limits.acceleration)
                .map_err(|e| at("limits", e))?;
            joints.push(spec);
        }
        let capsules = self
            .capsules
            .iter()
            .map(|c| CapsuleShape {
                parent_link: c.link.clone(),
                endpoint_a: Point3::from(c.a),
                endpoint_b: Point3::from(c.b),
                radius: c.radius,
            })
            .collect();
        let ee = Pose::from_scaled_axis(
            Vector3::from(self.end_effector_offset.translation),
            Vector3::from(self.end_effector_offset.rotation),
        );
        let model = RobotModel::new(self.name, joints, capsules, ee).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::config(format!("joints/capsules: {msg}")),
            other => other,
        })?;
        match self.home {
            Some(home) => model.with_home(home).map_err(|e| Error::config(format!("home: {e}"))),
            None => Ok(model),
        }
    }
}

impl RobotModel {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        RobotDescription::from_toml_str(text)?.into_model()
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
}
