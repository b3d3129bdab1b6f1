use std::collections::BTreeSet;
use std::sync::OnceLock;

use cusp_atlas::cusp::{find_cusps, CuspPoint};
use cusp_atlas::dk::{pose_distance, solve_dk};
use cusp_atlas::geometry::{constraint_residual, signed_singularity};
use cusp_atlas::motion::*;
use cusp_atlas::{AspectLabel, Geometry, JointVector, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Fixture {
    g: Geometry,
    cusps: Vec<CuspPoint>,
    loop_t: JointTrajectory,
    center: CuspPoint,
    table: LoopClassification,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let g = Geometry::canonical();
        let cusps = find_cusps(&g, 17.0).unwrap();
        let (loop_t, center) = cusp_loop(&g, 17.0, [19.0, 17.0], &cusps, 4).unwrap();
        let table = classify_loop(&g, &loop_t).unwrap();
        Fixture { g, cusps, loop_t, center, table }
    })
}

fn q0() -> JointVector {
    JointVector::new(17.0, 19.0, 17.0).unwrap()
}

#[test]
fn reference_loop_encircles_one_cusp_and_crosses_four_times() {
    let f = fixture();
    assert_eq!(f.table.crossings.len(), 4, "{:?}", f.table.crossings);
    let enc = enclosed_cusps(&f.loop_t, &f.cusps).unwrap();
    assert_eq!(enc.len(), 1);
    assert_eq!(enc[0].0, f.center);
    assert_eq!(enc[0].1, 1);
}

#[test]
fn twelve_motions_split_eight_two_two() {
    let f = fixture();
    let set = solve_dk(&f.g, &q0()).unwrap();
    assert_eq!(f.table.runs.len(), 12);
    assert_eq!(f.table.count(Outcome::SingularStop), 8);
    assert_eq!(f.table.count(Outcome::LoopSameMode), 2);
    assert_eq!(f.table.count(Outcome::ModeChange), 2);

    let same: Vec<&LoopRun> = f.table.runs.iter().filter(|r| r.outcome == Outcome::LoopSameMode).collect();
    assert_eq!(same[0].start_index, same[1].start_index);
    assert_ne!(same[0].direction, same[1].direction);
    assert_eq!(set.solutions[same[0].start_index].aspect, AspectLabel::Aspect2);

    let change: Vec<&LoopRun> = f.table.runs.iter().filter(|r| r.outcome == Outcome::ModeChange).collect();
    let (a, b) = (change[0], change[1]);
    assert_eq!(a.end_mode_index, Some(b.start_index));
    assert_eq!(b.end_mode_index, Some(a.start_index));
    assert_ne!(a.direction, b.direction);
    assert_eq!(set.solutions[a.start_index].aspect, AspectLabel::Aspect1);
    assert_eq!(set.solutions[b.start_index].aspect, AspectLabel::Aspect1);

    // every stop lies at one of the four crossings, two per direction and crossing pair
    let len = f.loop_t.length();
    for r in f.table.runs.iter().filter(|r| r.outcome == Outcome::SingularStop) {
        let s = r.stop_s.unwrap();
        let s_fwd = if r.direction == Direction::Forward { s } else { len - s };
        let gap = f.table.crossings.iter().map(|c| (c - s_fwd).abs()).fold(f64::INFINITY, f64::min);
        assert!(gap < 1e-6, "stop at {s_fwd} vs crossings {:?}", f.table.crossings);
    }
}

#[test]
fn traces_stay_on_the_manifold_and_in_their_aspect() {
    let f = fixture();
    let set = solve_dk(&f.g, &q0()).unwrap();
    for (i, sol) in set.solutions.iter().enumerate() {
        for path in [f.loop_t.clone(), f.loop_t.reversed()] {
            let r = trace(&f.g, &path, sol.pose).unwrap();
            assert_eq!(r.start_mode_index, Some(i));
            let sign = if sol.aspect == AspectLabel::Aspect1 { 1.0 } else { -1.0 };
            for s in &r.samples {
                let q = JointVector::new(17.0, s.rho2, s.rho3).unwrap();
                let res = constraint_residual(&f.g, &s.pose(17.0), &q);
                assert!(res.iter().all(|x| x.abs() < 1e-9), "{res:?}");
                assert!(s.singularity * sign > -1e-9, "aspect flip at {s:?}");
                if let Some(gap) = s.oracle_gap {
                    assert!(gap < ORACLE_TOL, "oracle gap {gap} at {s:?}");
                }
            }
            if let Some(stop) = r.stop_pose {
                let sv = signed_singularity(&f.g, &stop).unwrap();
                assert!(sv.abs() < 1e-5, "stop |S| = {sv}");
                assert!(fold_determinant(&f.g, &stop).abs() < FOLD_TOL);
            }
        }
    }
}

#[test]
fn mode_change_reverses_back_to_its_start() {
    let f = fixture();
    let set = solve_dk(&f.g, &q0()).unwrap();
    for run in f.table.runs.iter().filter(|r| r.outcome == Outcome::ModeChange) {
        let path = if run.direction == Direction::Forward { f.loop_t.clone() } else { f.loop_t.reversed() };
        let there = trace(&f.g, &path, set.solutions[run.start_index].pose).unwrap();
        let back = trace(&f.g, &path.reversed(), there.end_pose).unwrap();
        assert_eq!(back.outcome, Outcome::ModeChange);
        assert!(pose_distance(&back.end_pose, &set.solutions[run.start_index].pose) < 1e-6);
        // a mode change winds around a cusp
        assert!(!enclosed_cusps(&path, &f.cusps).unwrap().is_empty());
    }
}

#[test]
fn small_regular_loop_keeps_every_mode() {
    let g = Geometry::canonical();
    let t = JointTrajectory::new(17.0, vec![[19.0, 17.0], [19.6, 17.1], [19.3, 17.6]], true).unwrap();
    let table = classify_loop(&g, &t).unwrap();
    assert!(table.crossings.is_empty());
    assert_eq!(table.count(Outcome::LoopSameMode), 12);
    assert!(enclosed_cusps(&t, &find_cusps(&g, 17.0).unwrap()).unwrap().is_empty());
}

#[test]
fn open_path_ends_open() {
    let g = Geometry::canonical();
    let set = solve_dk(&g, &q0()).unwrap();
    let t = JointTrajectory::new(17.0, vec![[19.0, 17.0], [19.5, 17.5]], false).unwrap();
    let r = trace(&g, &t, set.solutions[0].pose).unwrap();
    assert_eq!(r.outcome, Outcome::OpenEnd);
    let last = r.samples.last().unwrap();
    assert!((last.rho2 - 19.5).abs() < 1e-12 && (last.rho3 - 17.5).abs() < 1e-12);
    assert!(enclosed_cusps(&t, &[]).is_err());
}

#[test]
fn fold_determinant_agrees_with_singularity_sign() {
    let g = Geometry::canonical();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 200 {
        let p = Pose::new(17.0, rng.random_range(-3.14..3.14), rng.random_range(-3.14..3.14));
        let s = signed_singularity(&g, &p).unwrap();
        if s.abs() < 1e-6 {
            continue;
        }
        assert_eq!(fold_determinant(&g, &p) > 0.0, g.sigma() * s > 0.0);
        checked += 1;
    }
}

#[test]
fn stop_positions_pair_up_by_crossing() {
    let f = fixture();
    let stops: BTreeSet<(Direction, i64)> = f
        .table
        .runs
        .iter()
        .filter_map(|r| r.stop_s.map(|s| (r.direction, (s * 1e4).round() as i64)))
        .collect();
    // four motions per direction stop at two distinct points each
    assert_eq!(stops.iter().filter(|s| s.0 == Direction::Forward).count(), 2);
    assert_eq!(stops.iter().filter(|s| s.0 == Direction::Reverse).count(), 2);
}
