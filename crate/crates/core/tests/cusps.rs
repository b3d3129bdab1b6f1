use cusp_atlas::atlas::{joint_slice_curves, workspace_singular_contour};
use cusp_atlas::cusp::{cusp_axis, find_cusps, find_cusps_with, CuspOptions, CUSP_RESIDUAL_TOL};
use cusp_atlas::dk::solve_dk;
use cusp_atlas::geometry::signed_singularity;
use cusp_atlas::scalar::angle_diff;
use cusp_atlas::winding::distance_to_closed_polyline;
use cusp_atlas::{AspectLabel, Geometry, JointVector};

fn near_solutions(g: &Geometry, q: [f64; 3], theta: f64, radius: f64) -> Vec<(f64, AspectLabel)> {
    let s = solve_dk(g, &JointVector::new(q[0], q[1], q[2]).unwrap()).unwrap();
    s.solutions
        .iter()
        .filter(|x| angle_diff(x.pose.theta1, theta).abs() < radius)
        .map(|x| (x.pose.theta1, x.aspect))
        .collect()
}

#[test]
fn cusp_counts_are_even_across_slices() {
    let g = Geometry::canonical();
    for rho1 in [12.0, 14.0, 17.0, 20.0, 24.0] {
        let cusps = find_cusps(&g, rho1).unwrap();
        assert_eq!(cusps.len() % 2, 0, "rho1 = {rho1}: {} cusps", cusps.len());
        assert!(cusps.iter().all(|c| c.residuals.iter().all(|r| *r < CUSP_RESIDUAL_TOL)));
    }
}

#[test]
fn three_solutions_collapse_into_each_cusp() {
    let g = Geometry::canonical();
    for c in find_cusps(&g, 17.0).unwrap() {
        let a = cusp_axis(&g, &c);
        let mut spreads = vec![];
        for eps in [1e-2, 1e-3, 1e-4] {
            let inside = [c.rho1, c.rho2 + eps * a[0], c.rho3 + eps * a[1]];
            let near = near_solutions(&g, inside, c.theta1, 0.1);
            assert_eq!(near.len(), 3, "cusp {c:?} eps {eps}: {near:?}");
            let lo = near.iter().map(|n| n.0).fold(f64::INFINITY, f64::min);
            let hi = near.iter().map(|n| n.0).fold(f64::NEG_INFINITY, f64::max);
            spreads.push(hi - lo);
            let outside = [c.rho1, c.rho2 - eps * a[0], c.rho3 - eps * a[1]];
            assert_eq!(near_solutions(&g, outside, c.theta1, 0.1).len(), 1);
        }
        // square-root collapse: a tenfold smaller offset shrinks the spread by about sqrt(10)
        assert!(spreads[1] < spreads[0] / 2.5 && spreads[2] < spreads[1] / 2.5, "{spreads:?}");
    }
}

#[test]
fn coalescing_solutions_split_two_to_one_by_aspect() {
    let g = Geometry::canonical();
    for c in find_cusps(&g, 17.0).unwrap() {
        let a = cusp_axis(&g, &c);
        let mut near = near_solutions(&g, [c.rho1, c.rho2 + 1e-3 * a[0], c.rho3 + 1e-3 * a[1]], c.theta1, 0.1);
        near.sort_by(|x, y| x.0.total_cmp(&y.0));
        // outer pair shares an aspect, the middle branch lies in the other one
        assert_eq!(near[0].1, near[2].1);
        assert_ne!(near[0].1, near[1].1);
    }
}

#[test]
fn cusps_lie_on_the_singular_curve() {
    let g = Geometry::canonical();
    let curves = joint_slice_curves(&g, &workspace_singular_contour(&g, 17.0, 512));
    for c in find_cusps(&g, 17.0).unwrap() {
        assert!(signed_singularity(&g, &c.pose()).unwrap().abs() < 1e-9);
        let d = curves
            .polylines
            .iter()
            .map(|pl| distance_to_closed_polyline(&pl.points, c.joint()))
            .fold(f64::INFINITY, f64::min);
        // the polyline is a chordal approximation; the cusp tip is its worst case
        assert!(d < 0.05, "cusp {c:?} is {d} from the polyline");
    }
}

#[test]
fn report_is_deterministic_and_counts_loops() {
    let g = Geometry::canonical();
    let a = find_cusps_with(&g, 17.0, &CuspOptions::default()).unwrap();
    let b = find_cusps_with(&g, 17.0, &CuspOptions::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.traced_loops >= 1);
    assert!(a.diagnostics.iter().all(|d| d.code != "NONCONVERGENT"));
}
