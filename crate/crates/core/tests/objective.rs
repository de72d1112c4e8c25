use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use motiongen::bundled;
use motiongen::loss::{groove, groove_derivative, GoalRange, LossKind, LossParams};
use motiongen::objective::*;
use motiongen::robot::forward_kinematics;
use motiongen::rotation::{from_scaled_axis, scaled_axis};
use motiongen::{Pose, RobotModel};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn groove_params() -> LossParams {
    LossParams::new(0.1, 1.0, 2.0, 2, 4).unwrap()
}

fn ee(model: &RobotModel, q: &[f64]) -> Pose {
    forward_kinematics(model, q).unwrap()[model.dof()]
}

fn position_task(axis: usize, weight: f64) -> TaskSpec {
    TaskSpec::new(TaskKind::PositionDof, axis, LossKind::Groove, GoalRange::exact(0.0), groove_params(), weight)
}

#[test]
fn single_groove_at_goal_is_minus_weight() {
    let model = bundled::single_joint(1.0);
    let goal = GoalUpdate::exact(0.0, ee(&model, &[0.4]));
    let state = SolverState::at_rest(&[0.4], 1.0 / 30.0);
    let f = evaluate_objective(&[0.4], &model, &goal, &state, &[position_task(0, 7.0)]).unwrap();
    assert_abs_diff_eq!(f, -7.0, epsilon = 1e-12);
}

#[test]
fn weights_combine_linearly() {
    let model = bundled::planar_2r();
    let q = [0.3, -0.2];
    let goal = GoalUpdate::exact(0.0, ee(&model, &q));
    let state = SolverState::at_rest(&q, 1.0 / 30.0);
    let tasks = [position_task(0, 2.0), position_task(1, 3.0)];
    assert_abs_diff_eq!(evaluate_objective(&q, &model, &goal, &state, &tasks).unwrap(), -5.0, epsilon = 1e-12);
}

#[test]
fn argmin_survives_uniform_weight_scaling() {
    let model = bundled::planar_2r();
    let goal = GoalUpdate::exact(0.0, Pose::from_translation(Vector3::new(1.2, 0.7, 0.0)));
    let state = SolverState::at_rest(&[0.0, 0.0], 1.0 / 30.0);
    let tasks = [position_task(0, 1.0), position_task(1, 4.0)];
    let doubled: Vec<TaskSpec> = tasks.iter().map(|t| TaskSpec { weight: 2.0 * t.weight, ..t.clone() }).collect();
    let a = Objective::new(&model, &goal, &state, &tasks).unwrap();
    let b = Objective::new(&model, &goal, &state, &doubled).unwrap();

    let argmin = |obj: &Objective| {
        let steps = 400;
        let mut best = (f64::INFINITY, (0, 0));
        for i in 0..steps {
            for j in 0..steps {
                let q = [-PI + 2.0 * PI * i as f64 / steps as f64, -PI + 2.0 * PI * j as f64 / steps as f64];
                let f = obj.value(&q);
                if f < best.0 {
                    best = (f, (i, j));
                }
            }
        }
        best
    };
    let (fa, ia) = argmin(&a);
    let (fb, ib) = argmin(&b);
    assert_eq!(ia, ib);
    assert_abs_diff_eq!(fb, 2.0 * fa, epsilon = 1e-12);

    // Refine around the coarse minimum at 1e-3 rad.
    let centre = [-PI + 2.0 * PI * ia.0 as f64 / 400.0, -PI + 2.0 * PI * ia.1 as f64 / 400.0];
    let fine = |obj: &Objective| {
        let mut best = (f64::INFINITY, (0, 0));
        for i in 0..=40 {
            for j in 0..=40 {
                let q = [centre[0] - 0.02 + 1e-3 * i as f64, centre[1] - 0.02 + 1e-3 * j as f64];
                let f = obj.value(&q);
                if f < best.0 {
                    best = (f, (i, j));
                }
            }
        }
        best.1
    };
    assert_eq!(fine(&a), fine(&b));
}

#[test]
fn gradient_matches_chain_rule() {
    let model = bundled::single_joint(1.0);
    let g = 0.6;
    let goal = GoalUpdate::exact(0.0, Pose::from_translation(Vector3::new(g, 0.0, 0.0)));
    let params = LossParams::new(0.3, 1.0, 1.0, 2, 4).unwrap();
    let tasks = [TaskSpec::new(TaskKind::PositionDof, 0, LossKind::Groove, GoalRange::exact(0.0), params, 1.5)];
    for q in [-1.0, 0.2, 0.9, 2.0] {
        let state = SolverState::at_rest(&[q], 1.0 / 30.0);
        let grad = objective_gradient(&[q], &model, &goal, &state, &tasks).unwrap();
        let chi = q.cos() - g;
        let expected = 1.5 * groove_derivative(chi, 0.0, &params) * -q.sin();
        assert!((grad[0] - expected).abs() <= 1e-5 * expected.abs().max(1.0), "{} vs {expected}", grad[0]);
        let value = evaluate_objective(&[q], &model, &goal, &state, &tasks).unwrap();
        assert_abs_diff_eq!(value, 1.5 * groove(chi, 0.0, &params), epsilon = 1e-12);
    }
}

#[test]
fn gradient_vanishes_at_interior_minimum() {
    let model = bundled::single_joint(1.0);
    let goal = GoalUpdate::exact(0.0, ee(&model, &[0.7]));
    let state = SolverState::at_rest(&[0.7], 1.0 / 30.0);
    let grad = objective_gradient(&[0.7], &model, &goal, &state, &[position_task(0, 1.0), position_task(1, 1.0)]).unwrap();
    assert!(grad[0].abs() <= 1e-4);
}

#[test]
fn constant_objective_has_zero_gradient() {
    let model = bundled::ur5();
    let q = model.home().to_vec();
    let goal = GoalUpdate::exact(0.0, Pose::identity());
    let state = SolverState::at_rest(&q, 1.0 / 30.0);
    let params = LossParams::new(0.1, 50.0, 1.0, 2, 4).unwrap();
    let tasks: Vec<TaskSpec> = (0..3)
        .map(|i| TaskSpec::new(TaskKind::RotationDof, i, LossKind::Swamp, GoalRange::unbounded(), params, 1.0))
        .collect();
    let grad = objective_gradient(&q, &model, &goal, &state, &tasks).unwrap();
    assert!(grad.iter().all(|g| *g == 0.0));
}

#[test]
fn position_error_in_goal_frame() {
    let model = bundled::single_joint(1.0);
    let at = |target: Pose| -> Vec<f64> {
        let goal = GoalUpdate::exact(0.0, target);
        (0..3).map(|i| position_error(&model, &[0.0], &goal, i).unwrap()).collect()
    };
    let e = at(Pose::from_translation(Vector3::new(1.0, 0.0, 0.0)));
    assert_eq!(e, vec![0.0, 0.0, 0.0]);
    let e = at(Pose::from_translation(Vector3::new(0.98, 0.0, 0.0)));
    assert_abs_diff_eq!(e[0], 0.02, epsilon = 1e-12);
    let e = at(Pose::new(Vector3::zeros(), Rotation3::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2)));
    assert_abs_diff_eq!(e[0], 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(e[1], -1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(e[2], 0.0, epsilon = 1e-12);
    let goal = GoalUpdate::exact(0.0, Pose::identity());
    assert!(position_error(&model, &[0.0], &goal, 3).is_err());
}

#[test]
fn rotation_error_is_scaled_axis() {
    let model = bundled::single_joint(1.0);
    let err = |q: f64, target: Rotation3<f64>| -> Vec<f64> {
        let goal = GoalUpdate::exact(0.0, Pose::new(Vector3::zeros(), target));
        (0..3).map(|i| rotation_error(&model, &[q], &goal, i).unwrap()).collect()
    };
    let e = err(0.3, Rotation3::from_axis_angle(&Vector3::z_axis(), 0.3));
    assert!(e.iter().all(|v| v.abs() <= 1e-12));
    let e = err(0.3, Rotation3::identity());
    assert_abs_diff_eq!(e[2], 0.3, epsilon = 1e-12);
    assert_abs_diff_eq!(e[0].abs() + e[1].abs(), 0.0, epsilon = 1e-12);
    let e = err(0.0, Rotation3::from_axis_angle(&Vector3::x_axis(), -FRAC_PI_2));
    assert_abs_diff_eq!(e[0], FRAC_PI_2, epsilon = 1e-12);
    assert_abs_diff_eq!(e[1].abs() + e[2].abs(), 0.0, epsilon = 1e-12);
}

#[test]
fn smoothness_examples() {
    let dt = 1.0 / 30.0;
    let state = SolverState::at_rest(&[0.5, -0.2], dt);
    for d in smoothness_terms(&state, &[0.5, -0.2]) {
        assert_eq!((d.velocity, d.acceleration, d.jerk), (0.0, 0.0, 0.0));
    }

    let mut state = SolverState::at_rest(&[0.0, 0.0], dt);
    state.advance(&[0.01, 0.0]);
    state.advance(&[0.02, 0.0]);
    let d = smoothness_terms(&state, &[0.03, 0.0]);
    assert_abs_diff_eq!(d[0].velocity, 0.3, epsilon = 1e-12);
    assert_abs_diff_eq!(d[0].acceleration, 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(d[0].jerk, 0.0, epsilon = 1e-6);

    let kappa = 2.0;
    let q = |k: f64| [0.5 * kappa * (k * dt).powi(2)];
    let mut state = SolverState::at_rest(&q(0.0), dt);
    state.advance(&q(1.0));
    state.advance(&q(2.0));
    let d = joint_derivatives(&state, &q(3.0), 0);
    assert_abs_diff_eq!(d.acceleration, kappa, epsilon = 1e-9);
    assert_abs_diff_eq!(d.velocity, kappa * 2.5 * dt, epsilon = 1e-9);
}

#[test]
fn ur5_collision_pairs_and_terms() {
    let model = bundled::ur5();
    let pairs = model.collision_pairs();
    assert!(!pairs.is_empty());
    for &(a, b) in pairs {
        assert!(model.capsule_link(b) >= model.capsule_link(a) + 2);
    }
    let terms = self_collision_terms(&model, &[0.0; 6]).unwrap();
    assert_eq!(terms.len(), pairs.len());
    let goal = GoalUpdate::exact(0.0, ee(&model, &[0.0; 6]));
    let tasks = TaskConfig::default().assemble(&model, &goal, Mode::Ranged).unwrap();
    let collision: Vec<&TaskSpec> = tasks.iter().filter(|t| t.kind == TaskKind::SelfCollisionPair).collect();
    assert_eq!(collision.len(), pairs.len());
    for t in collision {
        assert_eq!(t.range.lower, MIN_LINK_DISTANCE);
        assert_eq!(t.range.upper, f64::INFINITY);
    }
}

#[test]
fn relaxed_matches_ranged_with_zero_tolerances() {
    let model = bundled::sawyer();
    let q = model.home().to_vec();
    let goal = GoalUpdate::exact(0.0, ee(&model, &[0.1, -1.0, 0.2, 2.0, 0.1, 0.5, 3.0]));
    let config = TaskConfig::default();
    let ranged = config.assemble(&model, &goal, Mode::Ranged).unwrap();
    let relaxed = config.assemble(&model, &goal, Mode::Relaxed).unwrap();
    assert_eq!(ranged, relaxed);
    let state = SolverState::at_rest(&q, 1.0 / 30.0);
    assert_eq!(
        evaluate_objective(&q, &model, &goal, &state, &ranged).unwrap().to_bits(),
        evaluate_objective(&q, &model, &goal, &state, &relaxed).unwrap().to_bits()
    );
}

#[test]
fn assembly_follows_tolerances() {
    let model = bundled::ur5();
    let mut goal = GoalUpdate::exact(0.0, ee(&model, model.home()));
    goal.tolerances[0] = GoalRange::new(-0.05, 0.05).unwrap();
    goal.tolerances[5] = GoalRange::unbounded();
    let config = TaskConfig::default();
    let pose = |mode| -> Vec<TaskSpec> {
        config.assemble(&model, &goal, mode).unwrap().into_iter().filter(|t| matches!(t.kind, TaskKind::PositionDof | TaskKind::RotationDof)).collect()
    };

    let ranged = pose(Mode::Ranged);
    assert_eq!(ranged.len(), 5);
    assert_eq!(ranged[0].loss_kind, LossKind::Swamp);
    assert_eq!((ranged[0].range.lower, ranged[0].range.upper), (-0.05, 0.05));
    assert!(ranged[1..].iter().all(|t| t.range.is_degenerate()));

    let relaxed = pose(Mode::Relaxed);
    assert_eq!(relaxed.len(), 6);
    assert!(relaxed.iter().all(|t| t.loss_kind == LossKind::Groove && t.range.is_degenerate()));

    let trac = config.assemble(&model, &goal, Mode::Trac).unwrap();
    assert!(trac.iter().all(|t| matches!(t.kind, TaskKind::PositionDof | TaskKind::RotationDof)));
    assert_eq!(trac.len(), 5);
    assert_eq!(trac[0].error_map, ErrorMap::DeadZone { lower: -0.05, upper: 0.05 });
}

#[test]
fn in_band_errors_sit_on_the_plateau() {
    let model = bundled::ur5();
    let q = model.home().to_vec();
    let mut goal = GoalUpdate::exact(0.0, ee(&model, &q));
    let tol = [0.05, 0.05, 0.0, 0.3, 0.3, 0.0];
    for k in 0..6 {
        if tol[k] > 0.0 {
            goal.tolerances[k] = GoalRange::new(-tol[k], tol[k]).unwrap();
        }
    }
    // Shift the goal by 30% of the band in x and rotate it by 30% in rx.
    let shift = Pose::from_scaled_axis(Vector3::new(0.3 * 0.05, 0.0, 0.0), Vector3::new(0.3 * 0.3, 0.0, 0.0));
    goal.target = goal.target * shift.inverse();
    let tasks = TaskConfig::default().assemble(&model, &goal, Mode::Ranged).unwrap();
    let errors: Vec<f64> = (0..3)
        .map(|i| position_error(&model, &q, &goal, i).unwrap())
        .chain((0..3).map(|i| rotation_error(&model, &q, &goal, i).unwrap()))
        .collect();
    for t in tasks.iter().filter(|t| t.loss_kind == LossKind::Swamp && matches!(t.kind, TaskKind::PositionDof | TaskKind::RotationDof)) {
        let k = if t.kind == TaskKind::PositionDof { t.index } else { t.index + 3 };
        assert!(errors[k].abs() <= 0.3 * tol[k] + 1e-9, "{k}: {}", errors[k]);
        let f = t.loss_kind.eval(errors[k], &t.range, &t.params, t.width).unwrap();
        assert!((f + 1.0).abs() <= 0.05 * (t.params.a1 + 1.0), "{k}: {f}");
    }
}

#[test]
fn objective_is_bitwise_deterministic() {
    let model = bundled::sawyer();
    let q = model.home().to_vec();
    let mut state = SolverState::at_rest(&q, 1.0 / 30.0);
    state.advance(&q.iter().map(|v| v + 0.01).collect::<Vec<_>>());
    let goal = GoalUpdate::exact(0.0, ee(&model, &[0.0, -1.0, 0.0, 2.0, 0.0, 0.5, 3.0]));
    let tasks = TaskConfig::default().assemble(&model, &goal, Mode::Ranged).unwrap();
    let a = evaluate_objective(&q, &model, &goal, &state, &tasks).unwrap();
    let b = evaluate_objective(&q, &model, &goal, &state, &tasks).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let ga = objective_gradient(&q, &model, &goal, &state, &tasks).unwrap();
    let gb = objective_gradient(&q, &model, &goal, &state, &tasks).unwrap();
    assert_eq!(ga, gb);
}

#[test]
fn objective_rejects_bad_input() {
    let model = bundled::ur5();
    let q = model.home().to_vec();
    let goal = GoalUpdate::exact(0.0, Pose::identity());
    let state = SolverState::at_rest(&q, 1.0 / 30.0);
    assert!(evaluate_objective(&q, &model, &goal, &state, &[]).is_err());
    assert!(evaluate_objective(&q[..5], &model, &goal, &state, &[position_task(0, 1.0)]).is_err());
    assert!(evaluate_objective(&q, &model, &goal, &state, &[position_task(0, 0.0)]).is_err());
    let bad_groove = TaskSpec::new(
        TaskKind::PositionDof,
        0,
        LossKind::Groove,
        GoalRange::new(-1.0, 1.0).unwrap(),
        groove_params(),
        1.0,
    );
    assert!(evaluate_objective(&q, &model, &goal, &state, &[bad_groove]).is_err());
}

fn arb_q(model: &RobotModel) -> Vec<std::ops::Range<f64>> {
    model.joints().iter().map(|j| j.lower.max(-PI)..j.upper.min(PI)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn errors_are_frame_covariant(
        q in arb_q(&bundled::ur5()),
        goal_q in arb_q(&bundled::ur5()),
        t in prop::array::uniform3(-1.0..1.0f64),
        r in prop::array::uniform3(-2.0..2.0f64),
    ) {
        let model = bundled::ur5();
        let world = Pose::from_scaled_axis(Vector3::from(t), Vector3::from(r));
        let moved = model.with_base_transform(&world);
        let goal = GoalUpdate::exact(0.0, ee(&model, &goal_q));
        let moved_goal = GoalUpdate::exact(0.0, world * goal.target);
        for i in 0..3 {
            let a = position_error(&model, &q, &goal, i).unwrap();
            let b = position_error(&moved, &q, &moved_goal, i).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
            let a = rotation_error(&model, &q, &goal, i).unwrap();
            let b = rotation_error(&moved, &q, &moved_goal, i).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn scaled_axis_round_trip(v in prop::array::uniform3(-1.8..1.8f64)) {
        let v = Vector3::from(v);
        prop_assume!(v.norm() < PI - 1e-6);
        let back = scaled_axis(&from_scaled_axis(&v));
        prop_assert!((back - v).norm() <= 1e-9, "{back:?} vs {v:?}");
    }

    #[test]
    fn forward_and_central_gradients_agree_on_configuration_terms(q in arb_q(&bundled::ur5()), goal_q in arb_q(&bundled::ur5()), step in prop::collection::vec(-0.01..0.01f64, 6)) {
        let model = bundled::ur5();
        let prev: Vec<f64> = q.iter().zip(&step).map(|(a, d)| a + d).collect();
        let state = SolverState::at_rest(&prev, 1.0 / 30.0);
        let goal = GoalUpdate::exact(0.0, ee(&model, &goal_q));
        let tasks: Vec<TaskSpec> = TaskConfig::default()
            .assemble(&model, &goal, Mode::Ranged)
            .unwrap()
            .into_iter()
            .filter(|t| !matches!(t.kind, TaskKind::JointVelocity | TaskKind::JointAcceleration | TaskKind::JointJerk))
            .collect();
        let obj = Objective::new(&model, &goal, &state, &tasks).unwrap();
        let central = obj.gradient(&q, GradientScheme::Central);
        let forward = obj.gradient(&q, GradientScheme::Forward);
        let norm = central.iter().map(|g| g * g).sum::<f64>().sqrt();
        let diff = central.iter().zip(&forward).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-4 * norm.max(1.0), "diff {diff}, norm {norm}");
    }
}
