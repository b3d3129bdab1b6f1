//! Winding numbers of closed planar polylines.

use crate::error::{Error, Result};

pub const BOUNDARY_TOL: f64 = 1e-6;

/// Distance from `p` to the closed polyline through `pts`.
pub fn distance_to_closed_polyline(pts: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| segment_distance(pts[i], pts[(i + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

pub fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) };
    (a[0] + t * dx - p[0]).hypot(a[1] + t * dy - p[1])
}

/// Sum of signed subtended angles over `2 pi`, rounded. The polyline is
/// closed implicitly (last vertex joins the first).
pub fn winding_number(polyline: &[[f64; 2]], point: [f64; 2]) -> Result<i32> {
    winding_number_with_tol(polyline, point, BOUNDARY_TOL)
}

pub fn winding_number_with_tol(polyline: &[[f64; 2]], point: [f64; 2], boundary_tol: f64) -> Result<i32> {
    if polyline.len() < 2 {
        return Ok(0);
    }
    if distance_to_closed_polyline(polyline, point) <= boundary_tol {
        return Err(Error::OnBoundary { x: point[0], y: point[1] });
    }
    let n = polyline.len();
    let mut total = 0.0f64;
    for i in 0..n {
        let a = polyline[i];
        let b = polyline[(i + 1) % n];
        let (ax, ay) = (a[0] - point[0], a[1] - point[1]);
        let (bx, by) = (b[0] - point[0], b[1] - point[1]);
        total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn square_centre_and_exterior() {
        assert_eq!(winding_number(&SQUARE, [0.5, 0.5]).unwrap(), 1);
        assert_eq!(winding_number(&SQUARE, [1.5, 0.5]).unwrap(), 0);
        let mut cw = SQUARE;
        cw.reverse();
        assert_eq!(winding_number(&cw, [0.5, 0.5]).unwrap(), -1);
    }

    #[test]
    fn figure_eight_cancels() {
        // bowtie crossing at the origin: the lobes have opposite senses
        let eight = [[-2.0, 1.0], [2.0, -1.0], [2.0, 1.0], [-2.0, -1.0]];
        assert_eq!(winding_number(&eight, [1.5, 0.0]).unwrap(), 1);
        assert_eq!(winding_number(&eight, [-1.5, 0.0]).unwrap(), -1);
        // a point circled once in each sense
        let mut there_and_back: Vec<[f64; 2]> = SQUARE.to_vec();
        there_and_back.extend(SQUARE.iter().rev());
        assert_eq!(winding_number(&there_and_back, [0.5, 0.5]).unwrap(), 0);
    }

    #[test]
    fn boundary_is_rejected() {
        assert!(matches!(winding_number(&SQUARE, [0.5, 0.0]), Err(Error::OnBoundary { .. })));
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(winding_number(&[], [0.0, 0.0]).unwrap(), 0);
        assert_eq!(winding_number(&[[1.0, 1.0]], [0.0, 0.0]).unwrap(), 0);
    }
}
