//! Real-time inverse kinematics for robots whose tasks may have a single goal,
//! an interval of equally valid goals, or an interval with a preferred goal.
//!
//! Every task is a scalar function of the joint configuration passed through
//! a parametric loss ([`loss`]); the weighted sum of those losses is minimised
//! under joint limits by a warm-started local solver ([`solver`]). The
//! [`bench`] module replays the Cartesian-tolerance benchmark applications and
//! computes the motion-quality metrics.

pub mod bench;
pub mod bundled;
pub mod error;
pub mod loss;
pub mod objective;
pub mod robot;
pub mod rotation;
pub mod solver;

pub use error::{Error, Result};
pub use loss::{GoalRange, LossKind, LossParams};
pub use robot::{Pose, RobotModel};
