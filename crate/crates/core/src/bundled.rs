//! Robot descriptions and task defaults compiled into the library.

use crate::robot::{JointSpec, Pose, RobotModel};
use nalgebra::Vector3;

pub const UR5: &str = include_str!("../assets/ur5.toml");
pub const SAWYER: &str = include_str!("../assets/sawyer.toml");
pub const PLANAR_2R: &str = include_str!("../assets/planar2r.toml");
pub const TASKS: &str = include_str!("../assets/tasks.toml");

/// Names accepted by [`by_name`].
pub const ROBOT_NAMES: [&str; 3] = ["ur5", "sawyer", "planar_2r"];

/// Six-joint industrial arm.
pub fn ur5() -> RobotModel {
    RobotModel::from_toml_str(UR5).expect("bundled UR5 description is valid")
}

/// Seven-joint redundant arm.
pub fn sawyer() -> RobotModel {
    RobotModel::from_toml_str(SAWYER).expect("bundled Sawyer description is valid")
}

/// Planar arm with two unit links rotating about z.
pub fn planar_2r() -> RobotModel {
    RobotModel::from_toml_str(PLANAR_2R).expect("bundled planar description is valid")
}

/// One revolute joint about z at the origin with the end effector at
/// `(reach, 0, 0)`.
pub fn single_joint(reach: f64) -> RobotModel {
    let joint = JointSpec::new(
        "joint",
        Vector3::z(),
        Pose::identity(),
        -std::f64::consts::PI,
        std::f64::consts::PI,
    )
    .expect("valid joint");
    RobotModel::new("single_joint", vec![joint], Vec::new(), Pose::from_translation(Vector3::new(reach, 0.0, 0.0)))
        .expect("valid model")
}

/// Looks up a bundled robot by name.
pub fn by_name(name: &str) -> Option<RobotModel> {
    match name {
        "ur5" => Some(ur5()),
        "sawyer" => Some(sawyer()),
        "planar_2r" | "planar2r" => Some(planar_2r()),
        _ => None,
    }
}
