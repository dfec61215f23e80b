use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatworld::agent::{Action, GripperAgent};
use splatworld::augment::{
    augment_dataset, record_demo, replay_error_report, rotate_objects_about_final, roto_translate, simulate, verify,
    Demonstration, GridConfig, TransformSpec, DEFAULT_TAU,
};
use splatworld::geometry::{rotate_about_point, RigidTransform, UnitQuat, Vec3};
use splatworld::mesh::ConvexHull;
use splatworld::synthetic::{downward, push_actions, tabletop_world};

fn single(id: &str, p: Vec3) -> BTreeMap<String, RigidTransform> {
    [(id.to_string(), RigidTransform::from_translation(p))].into()
}

fn toy_demo(object: Vec3, last: Vec3) -> Demonstration {
    Demonstration {
        task: "toy".into(),
        actions: vec![Action::new(Vec3::new(0.2, 0.0, 0.1), downward(), true), Action::new(last, downward(), true)],
        initial_poses: single("red", object),
        goal_poses: single("red", object),
        observations: Vec::new(),
    }
}

#[test]
fn identity_spec_changes_nothing() {
    let w = tabletop_world();
    let d = toy_demo(Vec3::new(0.3, 0.0, 0.02), Vec3::new(0.5, 0.0, 0.2));
    let (w2, d2) = roto_translate(&w, &d, &TransformSpec::translation(Vec3::ZERO));
    assert_eq!(d2.actions, d.actions);
    assert_eq!(d2.initial_poses, d.initial_poses);
    assert_eq!(w2.table, w.table);
    let (w3, d3) = roto_translate(&w, &d, &TransformSpec::replay());
    assert_eq!(d3, d);
    assert_eq!(w3.background_splats, w.background_splats);
}

#[test]
fn pure_translation_shifts_everything() {
    let w = tabletop_world();
    let d = toy_demo(Vec3::new(0.3, 0.0, 0.02), Vec3::new(0.5, 0.0, 0.2));
    let shift = Vec3::new(0.15, 0.0, 0.0);
    let (w2, d2) = roto_translate(&w, &d, &TransformSpec::translation(shift));
    assert_eq!(d2.initial_poses["red"].translation, Vec3::new(0.3, 0.0, 0.02) + shift);
    for (a, b) in d.actions.iter().zip(&d2.actions) {
        assert_eq!(b.et, a.et + shift);
        assert_eq!(b.er, a.er);
    }
    assert_eq!(w2.object("red").unwrap().pose().translation, Vec3::new(0.3, 0.0, 0.02) + shift);
    // untracked objects move with the environment too
    let g0 = w.object("green").unwrap().pose().translation;
    assert!((w2.object("green").unwrap().pose().translation - (g0 + shift)).norm() < 1e-15);
    assert_eq!(w2.table, w.table);
}

#[test]
fn quarter_turn_about_point() {
    let w = tabletop_world();
    let d = toy_demo(Vec3::new(0.40, 0.0, 0.05), Vec3::new(0.5, 0.0, 0.2));
    let spec = TransformSpec::rotation_z(90.0, Vec3::new(0.30, 0.0, 0.0));
    let (_, d2) = roto_translate(&w, &d, &spec);
    let p = d2.initial_poses["red"].translation;
    assert!((p - Vec3::new(0.30, 0.10, 0.05)).norm() < 1e-12);
    let oracle = rotate_about_point(UnitQuat::rotation_z(PI / 2.0), Vec3::new(0.30, 0.0, 0.0));
    for (a, b) in d.actions.iter().zip(&d2.actions) {
        assert!((oracle.apply_point(a.et) - b.et).norm() < 1e-12);
    }
}

#[test]
fn object_rotation_about_last_position() {
    let w = tabletop_world();
    let d = toy_demo(Vec3::new(0.6, 0.0, 0.05), Vec3::new(0.5, 0.0, 0.2));
    let (w0, d0) = rotate_objects_about_final(&w, &d, 0.0).unwrap();
    assert_eq!(d0.initial_poses, d.initial_poses);
    assert_eq!(d0.actions, d.actions);
    let (_, d360) = rotate_objects_about_final(&w, &d, 360.0).unwrap();
    assert!((d360.initial_poses["red"].translation - Vec3::new(0.6, 0.0, 0.05)).norm() < 1e-9);
    let (w90, d90) = rotate_objects_about_final(&w, &d, 90.0).unwrap();
    assert!((d90.initial_poses["red"].translation - Vec3::new(0.5, 0.1, 0.05)).norm() < 1e-12);
    // environment untouched
    assert_eq!(w90.background_splats, w.background_splats);
    assert_eq!(w90.table, w0.table);
    let empty = Demonstration { actions: vec![], ..d };
    assert!(rotate_objects_about_final(&w, &empty, 90.0).is_err());
}

#[test]
fn verify_matches_pointwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let angle = rng.gen_range(-180.0..180.0);
        let p = Vec3::new(rng.gen_range(0.0..0.6), rng.gen_range(-0.3..0.3), 0.0);
        let spec = TransformSpec { translation: Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), 0.0), ..TransformSpec::rotation_z(angle, p) };
        let mut rec = BTreeMap::new();
        let mut sim = BTreeMap::new();
        for k in 0..3 {
            let id = format!("o{k}");
            let l = Vec3::new(rng.gen_range(0.0..0.6), rng.gen_range(-0.3..0.3), 0.02);
            let s = Vec3::new(rng.gen_range(0.0..0.6), rng.gen_range(-0.3..0.3), 0.02);
            rec.insert(id.clone(), RigidTransform::from_translation(l));
            sim.insert(id, RigidTransform::from_translation(s));
        }
        let v = verify(&rec, &sim, &spec, DEFAULT_TAU).unwrap();
        let about = rotate_about_point(UnitQuat::rotation_z(angle.to_radians()), p);
        for (id, l) in &rec {
            let expect = about.apply_point(l.translation) + spec.translation;
            let e = sim[id].translation.distance(expect);
            assert!((v.errors[id] - e).abs() < 1e-12);
        }
    }
}

#[test]
fn transform_round_trip() {
    let w = tabletop_world();
    let d = toy_demo(Vec3::new(0.35, 0.05, 0.02), Vec3::new(0.5, 0.1, 0.2));
    let spec = TransformSpec { translation: Vec3::new(0.15, -0.15, 0.0), ..TransformSpec::rotation_z(130.0, Vec3::new(0.3, 0.0, 0.0)) };
    let (_, d2) = roto_translate(&w, &d, &spec);
    let back = d2.transformed(&spec.transform().inverse());
    for (a, b) in d.actions.iter().zip(&back.actions) {
        assert!((a.et - b.et).norm() < 1e-9);
        assert!(a.er.angle_to(b.er) < 1e-9);
    }
    for (k, p) in &d.initial_poses {
        assert!((back.initial_poses[k].translation - p.translation).norm() < 1e-9);
    }
}

#[test]
fn replay_is_self_consistent() {
    let w = tabletop_world();
    let agent = GripperAgent::default();
    let demo = record_demo(&w, &agent, "push red", push_actions()).unwrap();
    let report = replay_error_report(&demo, &w, &agent).unwrap();
    assert!(report.errors.values().all(|e| *e == 0.0));
    let sim = simulate(&w, &agent, &demo).unwrap();
    assert!(verify(&demo.goal_poses, &sim, &TransformSpec::replay(), DEFAULT_TAU).unwrap().accepted);

    let mut perturbed = demo.clone();
    for g in perturbed.goal_poses.values_mut() {
        g.translation.x += 0.01;
    }
    let r = replay_error_report(&perturbed, &w, &agent).unwrap();
    assert!((r.mean_error - 0.01).abs() < 1e-12);
}

#[test]
fn falling_off_the_edge_is_rejected() {
    // a narrow table: rotating the objects half a turn about the final
    // gripper position carries them past the edge
    let mut w = tabletop_world();
    w.workspace = ConvexHull::cuboid(Vec3::new(0.3, 0.0, 0.5), Vec3::new(0.12, 0.2, 0.5));
    let agent = GripperAgent::default();
    let mut actions = push_actions();
    actions.push(Action::new(Vec3::new(0.45, 0.0, 0.15), downward(), true));
    let demo = record_demo(&w, &agent, "push red", actions).unwrap();
    let cfg = GridConfig { xy_offsets: vec![0.0], env_rot_step: 360.0, traj_rot_step: 180.0, ..Default::default() };
    let (results, stats) = augment_dataset(&w, &agent, &[demo], &cfg, &[], None).unwrap();
    assert_eq!(stats.generated, 2);
    assert!(results[0].accepted, "replay {:?}", results[0].errors);
    assert!(!results[1].accepted);
    assert!(results[1].max_error > 0.1);
}
