use std::f64::consts::PI;

use cusp_atlas::dk::{pose_distance, solve_dk};
use cusp_atlas::export::{format_f64, to_json_bytes};
use cusp_atlas::geometry::{inverse_kinematics, jacobian_pair, signed_singularity};
use cusp_atlas::winding::winding_number;
use cusp_atlas::{AspectLabel, Geometry, JointVector, Pose};
use proptest::prelude::*;

fn g() -> Geometry {
    Geometry::canonical()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solution_counts_are_even_and_at_most_six(r in proptest::array::uniform3(5.0f64..35.0)) {
        let s = solve_dk(&g(), &JointVector::new(r[0], r[1], r[2]).unwrap()).unwrap();
        prop_assume!(!s.near_discriminant);
        prop_assert!(s.len() % 2 == 0 && s.len() <= 6, "{} solutions", s.len());
    }

    #[test]
    fn every_pose_is_among_the_modes_of_its_joint(rho1 in 6.0f64..30.0, theta1 in -PI..PI, alpha in -PI..PI) {
        let p = Pose::new(rho1, theta1, alpha);
        let q = inverse_kinematics(&g(), &p).unwrap();
        prop_assume!(q.rho2() > 1e-3 && q.rho3() > 1e-3);
        let s = solve_dk(&g(), &q).unwrap();
        let (_, d) = s.nearest(&p).expect("at least the pose itself");
        prop_assert!(d < 1e-6, "nearest mode {d:e} away");
    }

    #[test]
    fn aspect_follows_the_velocity_determinant(rho1 in 6.0f64..30.0, theta1 in -PI..PI, alpha in -PI..PI) {
        let g = g();
        let p = Pose::new(rho1, theta1, alpha);
        let q = inverse_kinematics(&g, &p).unwrap();
        let s = signed_singularity(&g, &p).unwrap();
        prop_assume!(s.abs() > 1e-9);
        let det = jacobian_pair(&g, &p, &q).det_a();
        prop_assert_eq!((g.sigma() * det).signum(), s.signum());
        let aspect = AspectLabel::from_value(s, 1e-9);
        prop_assert_eq!(aspect == AspectLabel::Aspect1, s > 0.0);
    }

    #[test]
    fn modes_are_distinct_and_sorted_within_aspects(r in proptest::array::uniform3(8.0f64..30.0)) {
        let s = solve_dk(&g(), &JointVector::new(r[0], r[1], r[2]).unwrap()).unwrap();
        for (i, a) in s.solutions.iter().enumerate() {
            for b in &s.solutions[i + 1..] {
                prop_assert!(pose_distance(&a.pose, &b.pose) > 1e-9);
                if a.aspect == b.aspect {
                    prop_assert!(a.pose.theta1 <= b.pose.theta1);
                }
            }
        }
    }

    #[test]
    fn circles_wind_once_around_their_centre(cx in -10.0f64..10.0, cy in -10.0f64..10.0, r in 0.5f64..5.0, n in 3usize..40, ccw in any::<bool>()) {
        let mut pts: Vec<[f64; 2]> = (0..n).map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [cx + r * t.cos(), cy + r * t.sin()]
        }).collect();
        if !ccw {
            pts.reverse();
        }
        let w = winding_number(&pts, [cx, cy]).unwrap();
        prop_assert_eq!(w, if ccw { 1 } else { -1 });
        prop_assert_eq!(winding_number(&pts, [cx + 3.0 * r, cy]).unwrap(), 0);
    }

    #[test]
    fn float_formatting_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        let back: f64 = serde_json::from_slice(&to_json_bytes(&x).unwrap()).unwrap();
        prop_assert_eq!(back, x);
    }
}
