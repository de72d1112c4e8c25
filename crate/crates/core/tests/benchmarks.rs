use std::f64::consts::FRAC_PI_6;

use approx::assert_abs_diff_eq;
use motiongen::bench::*;
use motiongen::bundled;
use motiongen::loss::GoalRange;
use motiongen::objective::{GoalUpdate, Mode, TaskConfig};
use motiongen::robot::forward_kinematics;
use motiongen::solver::SolverOptions;
use motiongen::{Pose, RobotModel};
use nalgebra::Vector3;

const DT: f64 = 1.0 / 30.0;

fn ee(model: &RobotModel, q: &[f64]) -> Pose {
    forward_kinematics(model, q).unwrap()[model.dof()]
}

fn rows(goal: &GoalUpdate) -> Vec<[f64; 2]> {
    goal.tolerances.iter().map(|r| [r.lower, r.upper]).collect()
}

#[test]
fn streams_are_deterministic_per_seed() {
    type Gen = fn(u64, usize, f64) -> motiongen::Result<Vec<GoalUpdate>>;
    let gens: [Gen; 4] = [gen_writing_path, gen_spraying_path, gen_wiping_path, gen_filling_path];
    for g in gens {
        let a = g(7, 300, DT).unwrap();
        assert_eq!(a, g(7, 300, DT).unwrap());
        assert_eq!(a.len(), 300);
        assert_ne!(a, g(8, 300, DT).unwrap());
        assert!(g(7, 1, DT).is_err());
    }
}

#[test]
fn tolerance_rows_per_application() {
    let inf = f64::INFINITY;
    let z = [0.0, 0.0];
    let r = [-FRAC_PI_6, FRAC_PI_6];
    let p = [-0.05, 0.05];
    let free = [-inf, inf];
    let expected = [
        (gen_writing_path(1, 10, DT).unwrap(), vec![z, z, z, r, r, free]),
        (gen_spraying_path(1, 10, DT).unwrap(), vec![p, p, z, z, z, z]),
        (gen_wiping_path(1, 10, DT).unwrap(), vec![z, z, z, z, z, free]),
        (gen_filling_path(1, 10, DT).unwrap(), vec![p, z, p, z, free, z]),
    ];
    for (goals, row) in expected {
        for g in &goals {
            assert_eq!(rows(g), row);
            g.validate().unwrap();
        }
    }
    for app in Application::ALL {
        ToleranceSpec::for_application(app).validate().unwrap();
    }
    assert!(ToleranceSpec([[0.1, 0.2]; 6]).validate().is_err());
}

#[test]
fn board_paths_stay_on_the_board() {
    for model in [bundled::ur5(), bundled::sawyer()] {
        for app in [Application::Writing, Application::Spraying, Application::Wiping] {
            for seed in 0..5 {
                let plan = plan_for(&model, &Scene::default(), app, seed).unwrap();
                let board = plan.board.expect("board applications carry a board");
                for g in plan.goals(400, DT) {
                    assert!(board.distance_to_plane(&g.target.position).abs() <= 1e-9);
                    let d = g.target.position - board.center;
                    assert!(d.dot(&board.u).abs() <= 0.5 * board.width + 1e-9);
                    assert!(d.dot(&board.v).abs() <= 0.5 * board.height + 1e-9);
                    assert!((g.target.rotation * Vector3::z() + board.normal).norm() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn board_facing_angles_cover_the_quarter_turn() {
    let angles: Vec<f64> = (0..50)
        .map(|seed| plan_for(&bundled::ur5(), &Scene::default(), Application::Writing, seed).unwrap().board.unwrap().facing_angle)
        .collect();
    assert!(angles.iter().all(|a| (0.0..=std::f64::consts::FRAC_PI_2).contains(a)));
    assert!(angles.iter().any(|a| *a < 0.4) && angles.iter().any(|a| *a > 1.2));
}

#[test]
fn wiping_legs_are_monotone() {
    for seed in 0..5 {
        let plan = plan_for(&bundled::ur5(), &Scene::default(), Application::Wiping, seed).unwrap();
        let board = plan.board.unwrap();
        let coords: Vec<(f64, f64)> = plan
            .goals(2000, DT)
            .iter()
            .map(|g| {
                let d = g.target.position - board.center;
                (d.dot(&board.u), d.dot(&board.v))
            })
            .collect();
        let mut legs = 0;
        let mut k = 0;
        while k + 1 < coords.len() {
            let mut end = k;
            while end + 1 < coords.len() && (coords[end + 1].1 - coords[k].1).abs() <= 1e-12 {
                end += 1;
            }
            if end > k + 1 {
                let steps: Vec<f64> = (k..end).map(|i| coords[i + 1].0 - coords[i].0).collect();
                let up = steps.iter().all(|s| *s >= -1e-12);
                let down = steps.iter().all(|s| *s <= 1e-12);
                assert!(up || down, "seed {seed}: leg from frame {k} is not monotone");
                legs += 1;
            }
            k = end + 1;
        }
        assert_eq!(legs, Scene::default().wipe_legs);
    }
}

#[test]
fn filling_visits_the_three_cubes() {
    let scene = Scene::default();
    for seed in 0..10 {
        let plan = plan_for(&bundled::ur5(), &scene, Application::Filling, seed).unwrap();
        let size = scene.cube_size * plan.scale;
        let cubes = filling_cubes(plan.anchor, scene.cube_size).map(|c| plan.anchor + (c - plan.anchor) * plan.scale);
        let goals = plan.goals(1000, DT);
        let inside = |p: &Vector3<f64>, c: &Vector3<f64>| (p - c).amax() <= 0.5 * size + 1e-12;
        assert!(inside(&goals[0].target.position, &cubes[0]));
        assert!(inside(&goals[500].target.position, &cubes[1]));
        assert!(inside(&goals[999].target.position, &cubes[2]));
        let up = goals[0].target.rotation * Vector3::y();
        assert_abs_diff_eq!(up, Vector3::z(), epsilon = 1e-12);
        assert!(goals.iter().all(|g| g.target.rotation == goals[0].target.rotation));
    }
}

#[test]
fn paths_fit_within_reach() {
    let scene = Scene::default();
    for model in [bundled::ur5(), bundled::sawyer()] {
        let limit = scene.reach_fraction * reach(&model);
        for app in Application::ALL {
            let plan = plan_for(&model, &scene, app, 3).unwrap();
            for g in plan.goals(500, DT) {
                assert!((g.target.position - shoulder(&model)).norm() <= limit + 1e-9);
            }
        }
    }
}

#[test]
fn goals_start_and_end_at_rest() {
    let goals = gen_spraying_path(2, 600, DT).unwrap();
    let step = |k: usize| (goals[k + 1].target.position - goals[k].target.position).norm();
    let top = (0..599).map(step).fold(0.0, f64::max);
    assert!(step(0) <= 1e-3 * top);
    assert!(step(598) <= 1e-3 * top);
    for (k, g) in goals.iter().enumerate() {
        assert_abs_diff_eq!(g.timestamp, k as f64 * DT, epsilon = 1e-12);
    }
}

fn single_joint_goals(qs: &[f64], tolerances: [GoalRange; 6]) -> (RobotModel, Vec<GoalUpdate>) {
    let model = bundled::single_joint(1.0);
    let goals = qs
        .iter()
        .enumerate()
        .map(|(k, q)| GoalUpdate { timestamp: k as f64, target: ee(&model, &[*q]), tolerances })
        .collect();
    (model, goals)
}

#[test]
fn metrics_by_hand() {
    let qs = [0.0, 0.1, 0.3];
    let (model, goals) = single_joint_goals(&qs, [GoalRange::exact(0.0); 6]);
    let trajectory: Vec<Vec<f64>> = qs.iter().map(|q| vec![*q]).collect();
    let m = compute_metrics(&model, &trajectory, &goals, 1.0).unwrap();
    assert_abs_diff_eq!(m.mean_pos_error, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.mean_rot_error, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.mean_joint_velocity, 0.3 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.mean_joint_acceleration, 0.2 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.mean_joint_jerk, 0.1 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.mean_joint_movement, 0.3, epsilon = 1e-12);
    assert_abs_diff_eq!(m.mean_manipulability, 1.0, epsilon = 1e-12);
    assert_eq!(m.exceed_tolerance_count, 0.0);

    let m = compute_metrics(&model, &trajectory, &goals, 0.5).unwrap();
    assert_abs_diff_eq!(m.mean_joint_velocity, 0.6 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.mean_joint_jerk, 0.8 / 3.0, epsilon = 1e-12);
}

#[test]
fn static_trajectory_has_no_motion() {
    let model = bundled::ur5();
    let q = model.home().to_vec();
    let goals = vec![GoalUpdate::exact(0.0, ee(&model, &q)); 20];
    let m = compute_metrics(&model, &vec![q; 20], &goals, DT).unwrap();
    assert_eq!(
        (m.mean_joint_velocity, m.mean_joint_acceleration, m.mean_joint_jerk, m.mean_joint_movement),
        (0.0, 0.0, 0.0, 0.0)
    );
    assert!(m.mean_pos_error <= 1e-12);
}

#[test]
fn metrics_reject_mismatched_input() {
    let (model, goals) = single_joint_goals(&[0.0, 0.1], [GoalRange::exact(0.0); 6]);
    assert!(compute_metrics(&model, &[vec![0.0]], &goals, DT).is_err());
    assert!(compute_metrics(&model, &[], &[], DT).is_err());
    assert!(compute_metrics(&model, &[vec![0.0], vec![0.0]], &goals, 0.0).is_err());
    assert!(compute_metrics(&model, &[vec![0.0, 1.0], vec![0.0, 1.0]], &goals, DT).is_err());
}

#[test]
fn exceed_counts_and_masks() {
    let band = GoalRange::new(-0.05, 0.05).unwrap();
    let mut tol = [GoalRange::exact(0.0); 6];
    tol[0] = band;
    tol[5] = GoalRange::unbounded();
    let model = bundled::single_joint(1.0);
    let target = |dx: f64, rz: f64| GoalUpdate {
        timestamp: 0.0,
        target: Pose::from_scaled_axis(Vector3::new(1.0 - dx, 0.0, 0.0), Vector3::new(0.0, 0.0, -rz)),
        tolerances: tol,
    };
    let goals = vec![target(0.06, 0.0), target(0.04, 0.0), target(0.0, 1.0), target(0.0499, 0.0), target(0.0, 2.0)];
    let trajectory = vec![vec![0.0]; 5];
    let m = compute_metrics(&model, &trajectory, &goals, DT).unwrap();
    assert_eq!(m.exceed_tolerance_count, 1.0);
    // The toleranced x error and the free rz error are left out of the exact-DoF means.
    assert_abs_diff_eq!(m.mean_pos_error, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.mean_rot_error, 0.0, epsilon = 1e-12);

    let errors = pose_errors(&model, &[0.0], &goals[0]).unwrap();
    assert_abs_diff_eq!(errors[0], 0.06, epsilon = 1e-12);
    assert!(exceeds_tolerance(&errors, &tol));
    assert!(!exceeds_tolerance(&pose_errors(&model, &[0.0], &goals[3]).unwrap(), &tol));
}

fn short_context() -> BenchContext {
    BenchContext {
        tasks: TaskConfig::default(),
        scene: Scene::default(),
        solver: SolverOptions { max_time_budget: f64::INFINITY, ..Default::default() },
    }
}

fn short_config(app: Application, robot: &str, mode: Mode, seed: u64) -> BenchmarkConfig {
    BenchmarkConfig { frames: 150, ..BenchmarkConfig::new(app, robot, mode, seed) }
}

#[test]
fn exceed_count_matches_a_recount() {
    let model = bundled::ur5();
    let ctx = short_context();
    for (app, mode) in [(Application::Spraying, Mode::Trac), (Application::Filling, Mode::Ranged), (Application::Writing, Mode::Relaxed)] {
        let out = run_benchmark_with(&model, &ctx, &short_config(app, "ur5", mode, 1)).unwrap();
        let mut count = 0;
        for (q, g) in out.trajectory.iter().zip(&out.goals) {
            let e = pose_errors(&model, q, g).unwrap();
            let bad = (0..6).any(|k| {
                let t = g.tolerances[k];
                t.lower != t.upper && t.lower.is_finite() && (e[k] < t.lower || e[k] > t.upper)
            });
            count += usize::from(bad);
        }
        assert_eq!(out.metrics.exceed_tolerance_count, count as f64, "{app} {mode}");
        for q in &out.trajectory {
            for (v, j) in q.iter().zip(model.joints()) {
                assert!(j.lower <= *v && *v <= j.upper);
            }
        }
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    let model = bundled::sawyer();
    let ctx = short_context();
    let config = short_config(Application::Wiping, "sawyer", Mode::Ranged, 4);
    let a = run_benchmark_with(&model, &ctx, &config).unwrap();
    let b = run_benchmark_with(&model, &ctx, &config).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.initial_q, b.initial_q);
}

#[test]
fn prepared_runs_share_goals_and_start() {
    let model = bundled::ur5();
    let ctx = short_context();
    let config = short_config(Application::Writing, "ur5", Mode::Ranged, 2);
    let prepared = prepare(&model, &ctx, &config).unwrap();
    assert_eq!(prepared.goals, benchmark_goals(&model, &ctx.scene, &config).unwrap());
    for mode in Mode::ALL {
        let out = run_prepared(&model, &ctx, &BenchmarkConfig { mode, ..config.clone() }, &prepared).unwrap();
        assert_eq!(out.initial_q, prepared.initial_q);
        assert_eq!(out.trajectory.len(), 150);
    }
}

#[test]
fn aggregate_report() {
    let a = Metrics { mean_joint_jerk: 1.0, mean_manipulability: 0.2, ..Default::default() };
    let b = Metrics { mean_joint_jerk: 3.0, mean_manipulability: 0.4, ..Default::default() };
    let r = MetricsReport::aggregate(&[a, b]);
    assert_eq!(r.trials, 2);
    assert_abs_diff_eq!(r.mean.mean_joint_jerk, 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(r.std.mean_manipulability, (0.02f64).sqrt(), epsilon = 1e-15);
    assert_eq!(MetricsReport::single(a).std, Metrics::default());
    assert_eq!(MetricsReport::aggregate(&[]).trials, 0);
}

#[test]
fn timing_percentile() {
    let times: Vec<f64> = (1..=100).map(f64::from).collect();
    let (mean, p95) = timing_summary(&times);
    assert_abs_diff_eq!(mean, 50.5, epsilon = 1e-12);
    assert_eq!(p95, 95.0);
    assert_eq!(timing_summary(&[]), (0.0, 0.0));
}

#[test]
fn suite_produces_one_row_per_run() {
    let manifest = BenchManifest::from_toml_str(
        r#"
        robots = ["ur5"]
        applications = ["spraying"]
        seeds = [0, 1]
        frames = 40
        "#,
    )
    .unwrap();
    assert_eq!(manifest.modes, Mode::ALL.to_vec());
    let records = run_suite(&manifest, std::path::Path::new("."), 2).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| !r.failed() && r.frames == 40));

    let dir = tempfile::tempdir().unwrap();
    let (csv_path, json_path) = write_reports(&records, dir.path()).unwrap();
    let text = std::fs::read_to_string(csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    let columns = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == columns));
    for name in Metrics::FIELDS.iter().chain(&TIMING_COLUMNS) {
        assert!(lines[0].contains(name));
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(summary["runs"], 6);
    assert_eq!(summary["by_robot_mode"].as_array().unwrap().len(), 3);

    let again = run_suite(&manifest, std::path::Path::new("."), 1).unwrap();
    let strip = |rs: &[RunRecord]| -> Vec<(Option<Metrics>, Option<String>)> {
        rs.iter().map(|r| (r.metrics, r.error.clone())).collect()
    };
    assert_eq!(strip(&records), strip(&again));
}

#[test]
fn manifest_errors() {
    assert!(BenchManifest::from_toml_str("robots = []").is_err());
    assert!(BenchManifest::from_toml_str("robots = [\"ur5\"]\nframes = 1").is_err());
    assert!(BenchManifest::from_toml_str("robots = [\"ur5\"]\ncolour = 3").is_err());
    let manifest = BenchManifest::from_toml_str("robots = [\"nope.toml\"]\nseeds = [0]").unwrap();
    assert!(run_suite(&manifest, std::path::Path::new("/nonexistent"), 1).is_err());
    assert!(Application::parse("juggling").is_err());
}
