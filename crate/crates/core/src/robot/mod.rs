//! Serial-chain robot model.
//!
//! Links are numbered from the base: link 0 is the fixed base and link `i + 1`
//! is the body moved by joint `i`. Capsules attach to links by name, where the
//! base is called `base` and every other link carries the name of the joint
//! that drives it.

mod collision;
mod description;
mod kinematics;

use std::ops::Mul;

use nalgebra::{Point3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::rotation;

pub use collision::{capsule_distance, closest_points_between_segments, Capsule};
pub use description::{RobotDescription, DEFAULT_ACCELERATION_LIMIT, DEFAULT_VELOCITY_LIMIT};
pub use kinematics::{
    forward_kinematics, geometric_jacobian, jacobian_from_frames, manipulability, manipulability_of_jacobian,
    Jacobian,
};

/// Name of the fixed base link.
pub const BASE_LINK: &str = "base";

/// Rigid transform: rotation followed by translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose { position: Vector3::zeros(), rotation: Rotation3::identity() }
    }

    pub fn new(position: Vector3<f64>, rotation: Rotation3<f64>) -> Self {
        Pose { position, rotation }
    }

    pub fn from_translation(position: Vector3<f64>) -> Self {
        Pose { position, rotation: Rotation3::identity() }
    }

    /// Pose from a translation and a scaled-axis rotation.
    pub fn from_scaled_axis(position: Vector3<f64>, rotation: Vector3<f64>) -> Self {
        Pose { position, rotation: rotation::from_scaled_axis(&rotation) }
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Pose { position: -(inv * self.position), rotation: inv }
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.position)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Checks orthonormality and a positive determinant within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let m = self.rotation.matrix();
        let gram = m.transpose() * m;
        let off = (gram - nalgebra::Matrix3::identity()).abs().max();
        let det = m.determinant();
        if off > tol || (det - 1.0).abs() > tol || !self.position.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid(format!(
                "pose rotation is not a proper rotation (orthonormality error {off:e}, det {det})"
            )));
        }
        Ok(())
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            position: self.position + self.rotation * rhs.position,
            rotation: self.rotation * rhs.rotation,
        }
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        *self * *rhs
    }
}

/// One revolute joint.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub axis: Unit<Vector3<f64>>,
    /// Fixed transform from the parent link frame to the joint frame.
    pub origin: Pose,
    pub lower: f64,
    pub upper: f64,
    pub velocity_limit: f64,
    pub acceleration_limit: f64,
}

impl JointSpec {
    pub fn new(name: impl Into<String>, axis: Vector3<f64>, origin: Pose, lower: f64, upper: f64) -> Result<Self> {
        let name = name.into();
        let norm = axis.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("joint `{name}`: axis must have unit norm, got {norm}")));
        }
        let joint = JointSpec {
            name,
            axis: Unit::new_unchecked(axis),
            origin,
            lower,
            upper,
            velocity_limit: DEFAULT_VELOCITY_LIMIT,
            acceleration_limit: DEFAULT_ACCELERATION_LIMIT,
        };
        joint.validate()?;
        Ok(joint)
    }

    pub fn with_motion_limits(mut self, velocity: f64, acceleration: f64) -> Result<Self> {
        self.velocity_limit = velocity;
        self.acceleration_limit = acceleration;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if !(self.lower < self.upper) {
            return Err(Error::invalid(format!(
                "joint `{name}`: lower limit {} must be below upper limit {}",
                self.lower, self.upper
            )));
        }
        if !(self.velocity_limit > 0.0) || !(self.acceleration_limit > 0.0) {
            return Err(Error::invalid(format!("joint `{name}`: velocity and acceleration limits must be positive")));
        }
        if ((self.axis.norm() - 1.0).abs()) > 1e-9 {
            return Err(Error::invalid(format!("joint `{name}`: axis must have unit norm")));
        }
        self.origin.validate(1e-8)
    }

    /// Transform of the joint frame relative to its parent at angle `q`.
    pub fn local_transform(&self, q: f64) -> Pose {
        let spin = Rotation3::from_axis_angle(&self.axis, q);
        Pose { position: self.origin.position, rotation: self.origin.rotation * spin }
    }
}

/// Collision capsule attached to a link, endpoints in the link frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CapsuleShape {
    pub parent_link: String,
    pub endpoint_a: Point3<f64>,
    pub endpoint_b: Point3<f64>,
    pub radius: f64,
}

impl CapsuleShape {
    pub fn in_frame(&self, frame: &Pose) -> Capsule {
        Capsule::new(frame.transform_point(&self.endpoint_a), frame.transform_point(&self.endpoint_b), self.radius)
    }
}

/// Immutable kinematic description of a serial-chain robot.
#[derive(Clone, Debug)]
pub struct RobotModel {
    pub name: String,
    joints: Vec<JointSpec>,
    capsules: Vec<CapsuleShape>,
    /// Link index of each capsule (0 = base).
    capsule_links: Vec<usize>,
    collision_pairs: Vec<(usize, usize)>,
    end_effector_offset: Pose,
    home: Vec<f64>,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<JointSpec>,
        capsules: Vec<CapsuleShape>,
        end_effector_offset: Pose,
    ) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("a robot needs at least one joint"));
        }
        for j in &joints {
            j.validate()?;
        }
        for (i, a) in joints.iter().enumerate() {
            if a.name == BASE_LINK || joints[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::invalid(format!("joint name `{}` is reserved or repeated", a.name)));
            }
        }
        end_effector_offset.validate(1e-8)?;

        let mut capsule_links = Vec::with_capacity(capsules.len());
        for c in &capsules {
            if !(c.radius > 0.0) {
                return Err(Error::invalid(format!("capsule on `{}`: radius must be positive", c.parent_link)));
            }
            let link = if c.parent_link == BASE_LINK {
                0
            } else {
                joints
                    .iter()
                    .position(|j| j.name == c.parent_link)
                    .map(|i| i + 1)
                    .ok_or_else(|| Error::invalid(format!("capsule names unknown link `{}`", c.parent_link)))?
            };
            capsule_links.push(link);
        }

        let mut collision_pairs = Vec::new();
        for i in 0..capsules.len() {
            for j in i + 1..capsules.len() {
                if capsule_links[i].abs_diff(capsule_links[j]) >= 2 {
                    collision_pairs.push((i, j));
                }
            }
        }

        let home = joints.iter().map(|j| 0f64.clamp(j.lower, j.upper)).collect();
        Ok(RobotModel {
            name: name.into(),
            home,
            joints,
            capsules,
            capsule_links,
            collision_pairs,
            end_effector_offset,
        })
    }

    /// Number of joints.
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn capsules(&self) -> &[CapsuleShape] {
        &self.capsules
    }

    /// Link index (0 = base) of capsule `i`.
    pub fn capsule_link(&self, i: usize) -> usize {
        self.capsule_links[i]
    }

    /// Capsule index pairs on non-adjacent links.
    pub fn collision_pairs(&self) -> &[(usize, usize)] {
        &self.collision_pairs
    }

    pub fn end_effector_offset(&self) -> &Pose {
        &self.end_effector_offset
    }

    /// Nominal start configuration; defaults to zero clamped into the limits.
    pub fn home(&self) -> &[f64] {
        &self.home
    }

    pub fn with_home(mut self, home: Vec<f64>) -> Result<Self> {
        self.check_dof(&home)?;
        if let Some((j, q)) = self.joints.iter().zip(&home).find(|(j, q)| !(j.lower..=j.upper).contains(*q)) {
            return Err(Error::invalid(format!("home angle {q} of joint `{}` is outside its limits", j.name)));
        }
        self.home = home;
        Ok(self)
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.upper).collect()
    }

    pub fn check_dof(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::invalid(format!(
                "configuration has {} entries but `{}` has {} joints",
                q.len(),
                self.name,
                self.dof()
            )));
        }
        Ok(())
    }

    /// The same robot with its base moved by `transform`.
    pub fn with_base_transform(&self, transform: &Pose) -> Self {
        let mut moved = self.clone();
        let first = &mut moved.joints[0];
        first.origin = transform * &first.origin;
        for (c, &link) in moved.capsules.iter_mut().zip(&self.capsule_links) {
            if link == 0 {
                c.endpoint_a = transform.transform_point(&c.endpoint_a);
                c.endpoint_b = transform.transform_point(&c.endpoint_b);
            }
        }
        moved
    }

    /// World-frame capsules for the link frames returned by [`forward_kinematics`].
    pub fn posed_capsules(&self, frames: &[Pose]) -> Vec<Capsule> {
        self.capsules
            .iter()
            .zip(&self.capsule_links)
            .map(|(c, &link)| if link == 0 { c.in_frame(&Pose::identity()) } else { c.in_frame(&frames[link - 1]) })
            .collect()
    }
}
