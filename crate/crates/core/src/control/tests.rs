use nalgebra::Vector3;

use super::*;
use crate::kinematics::forward_kinematics;
use crate::model::{ObjectSpec, SceneConfig};
use crate::scene;

fn world() -> World {
    let mut cfg = SceneConfig::default();
    cfg.flags.skin = false;
    cfg.flags.eyes = false;
    scene::build_world(&cfg).unwrap()
}

fn dof(w: &World, name: &str) -> usize {
    w.model().dof_index(name).unwrap()
}

#[test]
fn velocity_integrates_per_step() {
    let mut w = world();
    let d = dof(&w, "r_elbow");
    let status = move_velocity(&mut w, &["r_elbow"], &[0.5]).unwrap();
    assert_eq!(status.state, MotionState::Running);
    for n in 1..=240 {
        w.step();
        assert!((w.q()[d] - 0.5 * n as f64 / 240.0).abs() < 1e-12);
    }
    assert!((w.q_dot()[d] - 0.5).abs() < 1e-9);
    assert!(w.q().iter().enumerate().all(|(k, &v)| k == d || v == 0.0));
}

#[test]
fn velocity_holds_at_limit() {
    let mut w = world();
    let d = dof(&w, "r_elbow");
    let hi = w.model().actuated_joint(d).limit_hi;
    move_velocity(&mut w, &["r_elbow"], &[1.0]).unwrap();
    for _ in 0..(240.0 * (hi + 1.0)) as usize {
        w.step();
    }
    assert_eq!(w.q()[d], hi);
    assert_eq!(w.q_dot()[d], 0.0);
}

#[test]
fn rejected_commands_leave_world_untouched() {
    let mut w = world();
    move_velocity(&mut w, &["l_elbow"], &[0.2]).unwrap();
    let before = w.active_command().cloned();
    let d = dof(&w, "r_elbow");
    let vmax = w.model().actuated_joint(d).max_velocity;
    let hi = w.model().actuated_joint(d).limit_hi;

    let s = move_velocity(&mut w, &["r_elbow"], &[vmax * 2.0]).unwrap();
    assert!(s.is_rejected());
    let s = move_position(&mut w, &["r_elbow"], &[hi + 0.1], MotionOptions::default()).unwrap();
    assert!(s.is_rejected());
    let far = Pose::from_translation(Vector3::new(5.0, 0.0, 0.0));
    let s = move_cartesian(&mut w, &far, MotionOptions::default()).unwrap();
    assert!(s.is_rejected());
    assert_eq!(w.active_command().cloned(), before);

    assert!(move_velocity(&mut w, &["no_such_joint"], &[0.1]).is_err());
    assert!(move_position(&mut w, &["r_elbow"], &[0.1, 0.2], MotionOptions::default()).is_err());
    assert!(follow_waypoints(&mut w, &[], 0.01, MotionOptions::default()).is_err());
}

#[test]
fn position_move_reaches_target_at_max_velocity() {
    let mut w = world();
    let d = dof(&w, "r_elbow");
    let vmax = w.model().actuated_joint(d).max_velocity;
    let s = move_position(&mut w, &["r_elbow"], &[1.0], MotionOptions::waiting()).unwrap();
    assert_eq!(s.state, MotionState::Done);
    assert!((w.q()[d] - 1.0).abs() < POSITION_TOLERANCE);
    let expected_steps = (1.0 / (vmax * w.step_size())).ceil() as u64;
    assert!(w.step_count().abs_diff(expected_steps) <= 1, "{} vs {expected_steps}", w.step_count());
    assert!(motion_done(&w));
}

#[test]
fn stop_on_collision_halts_motion() {
    let mut w = world();
    let hand = w.model().link_id("r_hand").unwrap();
    // A wall in front of the hanging right hand.
    let p = w.link_pose(hand).position;
    w.add_object(ObjectSpec::cuboid("wall", Vector3::new(0.02, 0.3, 0.3), p + Vector3::new(0.12, 0.0, 0.0)))
        .unwrap();
    let options = MotionOptions {
        stop_on_collision: true,
        ..MotionOptions::default()
    };
    move_position(&mut w, &["r_shoulder_pitch"], &[-1.5], options).unwrap();
    let s = wait_motion_done(&mut w, 10.0).unwrap();
    assert_eq!(s.state, MotionState::StoppedOnCollision);
    let q = w.q().to_vec();
    w.step();
    assert_eq!(w.q(), &q[..]);
    assert!(w.q()[dof(&w, "r_shoulder_pitch")] > -1.5);
}

#[test]
fn cartesian_move_reaches_reachable_pose() {
    let mut w = world();
    let mut q = w.q().to_vec();
    q[dof(&w, "r_shoulder_pitch")] = -0.4;
    q[dof(&w, "r_elbow")] = 0.9;
    let link = w.model().links[w.end_effector()].name.clone();
    let target = forward_kinematics(w.model(), &q, &link).unwrap();
    let s = move_cartesian(&mut w, &target, MotionOptions::waiting()).unwrap();
    assert_eq!(s.state, MotionState::Done);
    let reached = w.link_pose(w.end_effector());
    assert!((reached.position - target.position).norm() < 1e-3);
}

#[test]
fn waypoints_visited_in_order() {
    let mut w = world();
    let link = w.model().links[w.end_effector()].name.clone();
    let mut poses = Vec::new();
    for (sp, el) in [(-0.2, 0.5), (-0.4, 0.9), (-0.6, 1.2)] {
        let mut q = w.q().to_vec();
        q[dof(&w, "r_shoulder_pitch")] = sp;
        q[dof(&w, "r_elbow")] = el;
        poses.push(forward_kinematics(w.model(), &q, &link).unwrap());
    }
    let s = follow_waypoints(&mut w, &poses, 0.01, MotionOptions::default()).unwrap();
    assert!(!s.is_rejected(), "{}", s.detail);
    let mut visited = vec![false; poses.len()];
    while !motion_done(&w) {
        w.step();
        assert!(w.sim_time() < 20.0);
        let p = w.link_pose(w.end_effector()).position;
        for (k, wp) in poses.iter().enumerate() {
            if (p - wp.position).norm() < 0.01 {
                assert!(visited[..k].iter().all(|&v| v), "waypoint {k} reached out of order");
                visited[k] = true;
            }
        }
    }
    assert!(visited.iter().all(|&v| v));
    assert!((w.link_pose(w.end_effector()).position - poses[2].position).norm() < 1e-3);
}

#[test]
fn wait_times_out() {
    let mut w = world();
    move_position(&mut w, &["r_elbow"], &[1.5], MotionOptions::default()).unwrap();
    assert!(matches!(wait_motion_done(&mut w, 0.05), Err(Error::Timeout(_))));
}

#[test]
fn stop_holds_posture() {
    let mut w = world();
    move_velocity(&mut w, &["r_elbow"], &[0.5]).unwrap();
    for _ in 0..10 {
        w.step();
    }
    stop(&mut w);
    let q = w.q().to_vec();
    for _ in 0..10 {
        w.step();
    }
    assert_eq!(w.q(), &q[..]);
    assert!(w.q_dot().iter().all(|&v| v == 0.0));
}
