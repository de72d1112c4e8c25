//! Goal streams for the four benchmark applications.
//!
//! Writing, spraying and wiping happen on a whiteboard whose facing angle is
//! drawn per seed: 0 is an upright board facing the robot, `pi/2` a flat board
//! facing up. The tool's z axis points into the board and its x axis runs
//! along the board's width. Filling moves a cup held upright between three
//! random points sampled from fixed cubes.
//!
//! Every stream is a chain of segments, each traversed with minimum-jerk
//! timing, so the goal is at rest at segment joints.

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Application, ToleranceSpec};
use crate::error::{Error, Result};
use crate::objective::GoalUpdate;
use crate::robot::{forward_kinematics, Pose, RobotModel};

/// Placement of the benchmark props relative to the robot base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scene {
    /// Board size along its width and height, in metres.
    pub board_width: f64,
    pub board_height: f64,
    /// Horizontal distance from the base to the board centre along +x.
    pub board_distance: f64,
    /// Board centre height above the base; `None` uses the robot's shoulder height.
    pub board_elevation: Option<f64>,
    /// Edge length of the filling cubes.
    pub cube_size: f64,
    /// Paths are shrunk about their anchor until every waypoint lies within
    /// this fraction of the robot's reach from its shoulder.
    pub reach_fraction: f64,
    pub strokes: usize,
    pub spray_points: usize,
    pub wipe_legs: usize,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            board_width: 0.6,
            board_height: 0.4,
            board_distance: 0.5,
            board_elevation: None,
            cube_size: 0.2,
            reach_fraction: 0.8,
            strokes: 5,
            spray_points: 10,
            wipe_legs: 5,
        }
    }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.board_width, self.board_height, self.board_distance, self.cube_size, self.reach_fraction]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !ok || self.strokes == 0 || self.spray_points < 2 || self.wipe_legs == 0 {
            return Err(Error::config(format!("invalid scene: {self:?}")));
        }
        Ok(())
    }
}

/// Planar rectangle the writing, spraying and wiping tools touch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Whiteboard {
    pub center: Vector3<f64>,
    /// Unit vector along the width.
    pub u: Vector3<f64>,
    /// Unit vector along the height.
    pub v: Vector3<f64>,
    /// Unit normal on the side facing the robot.
    pub normal: Vector3<f64>,
    pub width: f64,
    pub height: f64,
    pub facing_angle: f64,
}

impl Whiteboard {
    pub fn new(center: Vector3<f64>, facing_angle: f64, width: f64, height: f64) -> Self {
        let (s, c) = facing_angle.sin_cos();
        Whiteboard {
            center,
            u: Vector3::y(),
            v: Vector3::new(s, 0.0, c),
            normal: Vector3::new(-c, 0.0, s),
            width,
            height,
            facing_angle,
        }
    }

    /// Point at board coordinates `(a, b)` measured from the centre.
    pub fn point(&self, a: f64, b: f64) -> Vector3<f64> {
        self.center + self.u * a + self.v * b
    }

    /// Tool orientation pressing into the board.
    pub fn tool_rotation(&self) -> Rotation3<f64> {
        let z = -self.normal;
        Rotation3::from_basis_unchecked(&[self.u, z.cross(&self.u), z])
    }

    pub fn distance_to_plane(&self, p: &Vector3<f64>) -> f64 {
        (p - self.center).dot(&self.normal)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let a = rng.gen_range(-0.5..=0.5) * self.width;
        let b = rng.gen_range(-0.5..=0.5) * self.height;
        self.point(a, b)
    }
}

/// One piece of a path, parameterised on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    Line(Vector3<f64>, Vector3<f64>),
    Bezier([Vector3<f64>; 4]),
    Dwell(Vector3<f64>),
}

impl Segment {
    pub fn at(&self, s: f64) -> Vector3<f64> {
        match self {
            Segment::Line(a, b) => a + (b - a) * s,
            Segment::Bezier([p0, p1, p2, p3]) => {
                let r = 1.0 - s;
                p0 * (r * r * r) + p1 * (3.0 * r * r * s) + p2 * (3.0 * r * s * s) + p3 * (s * s * s)
            }
            Segment::Dwell(p) => *p,
        }
    }

    fn map(&mut self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) {
        match self {
            Segment::Line(a, b) => {
                *a = f(a);
                *b = f(b);
            }
            Segment::Bezier(ps) => ps.iter_mut().for_each(|p| *p = f(p)),
            Segment::Dwell(p) => *p = f(p),
        }
    }

    fn control_points(&self) -> Vec<Vector3<f64>> {
        match self {
            Segment::Line(a, b) => vec![*a, *b],
            Segment::Bezier(ps) => ps.to_vec(),
            Segment::Dwell(p) => vec![*p],
        }
    }
}

/// Minimum-jerk time scaling `10t^3 - 15t^4 + 6t^5`.
pub fn min_jerk(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Geometry of one application before it is turned into goals.
#[derive(Clone, Debug, PartialEq)]
pub struct PathPlan {
    pub application: Application,
    /// Segments with their share of the total duration.
    pub segments: Vec<(Segment, f64)>,
    pub rotation: Rotation3<f64>,
    pub board: Option<Whiteboard>,
    /// Point the path is shrunk about when it exceeds the robot's reach.
    pub anchor: Vector3<f64>,
    pub scale: f64,
}

impl PathPlan {
    /// Builds the geometry for `application`, with the board or cubes
    /// centred at `anchor`.
    pub fn new(application: Application, scene: &Scene, anchor: Vector3<f64>, seed: u64) -> Result<Self> {
        scene.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ application.stream_salt());
        let tilted_board = |rng: &mut ChaCha8Rng| {
            let angle = rng.gen_range(0.0..=std::f64::consts::FRAC_PI_2);
            Whiteboard::new(anchor, angle, scene.board_width, scene.board_height)
        };
        let (segments, rotation, board) = match application {
            Application::Writing => {
                let b = tilted_board(&mut rng);
                let mut start = b.sample(&mut rng);
                let mut segs = Vec::new();
                for _ in 0..scene.strokes {
                    let ps = [start, b.sample(&mut rng), b.sample(&mut rng), b.sample(&mut rng)];
                    start = ps[3];
                    segs.push((Segment::Bezier(ps), 1.0));
                }
                (segs, b.tool_rotation(), Some(b))
            }
            Application::Spraying => {
                let b = tilted_board(&mut rng);
                let points: Vec<_> = (0..scene.spray_points).map(|_| b.sample(&mut rng)).collect();
                let segs = points.windows(2).map(|w| (Segment::Line(w[0], w[1]), 1.0)).collect();
                (segs, b.tool_rotation(), Some(b))
            }
            Application::Wiping => {
                let b = tilted_board(&mut rng);
                let legs = scene.wipe_legs;
                let (hw, hh) = (0.5 * b.width, 0.5 * b.height);
                let row = |k: usize| if legs == 1 { 0.0 } else { hh - b.height * k as f64 / (legs - 1) as f64 };
                let mut segs = Vec::new();
                for k in 0..legs {
                    let dir = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let (from, to) = (b.point(-dir * hw, row(k)), b.point(dir * hw, row(k)));
                    segs.push((Segment::Line(from, to), b.width));
                    if k + 1 < legs {
                        segs.push((Segment::Line(to, b.point(dir * hw, row(k + 1))), b.height / (legs - 1) as f64));
                    }
                }
                (segs, b.tool_rotation(), Some(b))
            }
            Application::Filling => {
                let [cup, faucet, finish] = filling_cubes(anchor, scene.cube_size);
                let mut pick = |c: Vector3<f64>| {
                    c + Vector3::from_fn(|_, _| rng.gen_range(-0.5..=0.5) * scene.cube_size)
                };
                let (p0, p1, p2) = (pick(cup), pick(faucet), pick(finish));
                let segs = vec![
                    (Segment::Line(p0, p1), 2.0),
                    (Segment::Dwell(p1), 1.0),
                    (Segment::Line(p1, p2), 2.0),
                ];
                // Tool y up, tool z forward.
                let z = Vector3::x();
                let y = Vector3::z();
                (segs, Rotation3::from_basis_unchecked(&[y.cross(&z), y, z]), None)
            }
        };
        Ok(PathPlan { application, segments, rotation, board, anchor, scale: 1.0 })
    }

    /// Every control point of every segment.
    pub fn control_points(&self) -> Vec<Vector3<f64>> {
        self.segments.iter().flat_map(|(s, _)| s.control_points()).collect()
    }

    /// Shrinks the path about its anchor by `factor`.
    pub fn shrink(&mut self, factor: f64) {
        let anchor = self.anchor;
        for (seg, _) in &mut self.segments {
            seg.map(|p| anchor + (p - anchor) * factor);
        }
        if let Some(b) = &mut self.board {
            b.width *= factor;
            b.height *= factor;
        }
        self.scale *= factor;
    }

    /// Shrinks the path until all control points lie within `radius` of
    /// `center`. Convex combinations of control points stay inside too.
    pub fn fit_within(&mut self, center: &Vector3<f64>, radius: f64) -> Result<()> {
        let fits = |plan: &PathPlan| plan.control_points().iter().all(|p| (p - center).norm() <= radius);
        if (self.anchor - center).norm() >= radius {
            return Err(Error::config(format!(
                "{} path anchor lies outside the reachable radius {radius:.3} m",
                self.application.name()
            )));
        }
        while !fits(self) {
            self.shrink(0.9);
        }
        Ok(())
    }

    /// Samples `frames` goals, one per frame.
    pub fn goals(&self, frames: usize, dt: f64) -> Vec<GoalUpdate> {
        let tolerances = ToleranceSpec::for_application(self.application).ranges();
        let total: f64 = self.segments.iter().map(|(_, w)| w).sum();
        let mut ends = Vec::with_capacity(self.segments.len());
        let mut acc = 0.0;
        for (_, w) in &self.segments {
            acc += w / total;
            ends.push(acc);
        }
        (0..frames)
            .map(|k| {
                let t = if frames > 1 { k as f64 / (frames - 1) as f64 } else { 0.0 };
                let i = ends.iter().position(|&e| t <= e).unwrap_or(ends.len() - 1);
                let start = if i == 0 { 0.0 } else { ends[i - 1] };
                let tau = ((t - start) / (ends[i] - start)).clamp(0.0, 1.0);
                let position = self.segments[i].0.at(min_jerk(tau));
                GoalUpdate { timestamp: k as f64 * dt, target: Pose::new(position, self.rotation), tolerances }
            })
            .collect()
    }
}

/// Centres of the cup, faucet and final-placement cubes around `anchor`.
pub fn filling_cubes(anchor: Vector3<f64>, size: f64) -> [Vector3<f64>; 3] {
    [
        anchor + Vector3::new(-0.25 * size, size, -0.5 * size),
        anchor + Vector3::new(0.0, -0.25 * size, 0.75 * size),
        anchor + Vector3::new(-0.25 * size, -1.25 * size, -0.5 * size),
    ]
}

/// Where the robot's reach is measured from: the second joint's frame at home.
pub fn shoulder(model: &RobotModel) -> Vector3<f64> {
    let frames = forward_kinematics(model, model.home()).expect("home has the right length");
    frames[1.min(model.dof() - 1)].position
}

/// Largest end-effector distance from [`shoulder`] over a fixed set of
/// sampled configurations.
pub fn reach(model: &RobotModel) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let origin = shoulder(model);
    let (lo, hi) = (model.lower_limits(), model.upper_limits());
    let mut best = 0.0f64;
    let mut q = vec![0.0; model.dof()];
    for _ in 0..4000 {
        for i in 0..q.len() {
            q[i] = rng.gen_range(lo[i]..=hi[i]);
        }
        let ee = forward_kinematics(model, &q).expect("sized")[model.dof()].position;
        best = best.max((ee - origin).norm());
    }
    best
}

/// Board or cube anchor for `model` in `scene`.
pub fn anchor_for(model: &RobotModel, scene: &Scene) -> Vector3<f64> {
    let elevation = scene.board_elevation.unwrap_or_else(|| shoulder(model).z);
    Vector3::new(scene.board_distance, 0.0, elevation)
}

/// Path plan for `model`, shrunk to fit its reach.
pub fn plan_for(model: &RobotModel, scene: &Scene, application: Application, seed: u64) -> Result<PathPlan> {
    let mut plan = PathPlan::new(application, scene, anchor_for(model, scene), seed)?;
    plan.fit_within(&shoulder(model), scene.reach_fraction * reach(model))?;
    Ok(plan)
}

/// Writing goals on an unscaled board anchored at the default scene position.
pub fn gen_writing_path(seed: u64, frames: usize, dt: f64) -> Result<Vec<GoalUpdate>> {
    default_stream(Application::Writing, seed, frames, dt)
}

pub fn gen_spraying_path(seed: u64, frames: usize, dt: f64) -> Result<Vec<GoalUpdate>> {
    default_stream(Application::Spraying, seed, frames, dt)
}

pub fn gen_wiping_path(seed: u64, frames: usize, dt: f64) -> Result<Vec<GoalUpdate>> {
    default_stream(Application::Wiping, seed, frames, dt)
}

pub fn gen_filling_path(seed: u64, frames: usize, dt: f64) -> Result<Vec<GoalUpdate>> {
    default_stream(Application::Filling, seed, frames, dt)
}

fn default_stream(application: Application, seed: u64, frames: usize, dt: f64) -> Result<Vec<GoalUpdate>> {
    if frames < 2 {
        return Err(Error::invalid(format!("a benchmark stream needs at least 2 frames, got {frames}")));
    }
    let scene = Scene::default();
    let anchor = Vector3::new(scene.board_distance, 0.0, scene.board_elevation.unwrap_or(0.0));
    Ok(PathPlan::new(application, &scene, anchor, seed)?.goals(frames, dt))
}
