//! Singular curves of a fixed-`rho1` slice, on the workspace torus
//! `(alpha, theta1)` and in the joint plane `(rho2, rho3)`, plus the map of
//! direct-kinematics solution counts.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dk::{solve_dk, SolutionSet};
use crate::geometry::{inverse_kinematics, signed_singularity};
use crate::{Error, Geometry, JointVector, Pose};

/// Bound on `|S|` (normalized) at refined contour vertices.
pub const CONTOUR_TOL: f64 = 1e-8;
pub const DEFAULT_CONTOUR_GRID: usize = 512;

/// Axis-aligned rectangle in the `(rho2, rho3)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub rho2: [f64; 2],
    pub rho3: [f64; 2],
}

impl Window {
    pub fn square(lo: f64, hi: f64) -> Self {
        Window { rho2: [lo, hi], rho3: [lo, hi] }
    }

    pub fn is_valid(&self) -> bool {
        self.rho2[0] > 0.0 && self.rho3[0] > 0.0 && self.rho2[1] > self.rho2[0] && self.rho3[1] > self.rho3[0]
    }

    /// Node `(i, j)` of an `n x n` lattice spanning the window, corners included.
    pub fn node(&self, n: usize, i: usize, j: usize) -> [f64; 2] {
        let f = |r: [f64; 2], k: usize| r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64;
        [f(self.rho2, i), f(self.rho3, j)]
    }

    pub fn spacing(&self, n: usize) -> [f64; 2] {
        [(self.rho2[1] - self.rho2[0]) / (n - 1) as f64, (self.rho3[1] - self.rho3[0]) / (n - 1) as f64]
    }
}

/// A polyline on the workspace torus; vertices are `(alpha, theta1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPolyline {
    pub vertices: Vec<[f64; 2]>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceContour {
    pub rho1: f64,
    pub grid_n: usize,
    pub polylines: Vec<TorusPolyline>,
    pub contour_tol: f64,
    /// Connected components of the torus minus the contour, from the sign grid.
    pub components: usize,
}

impl WorkspaceContour {
    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(|p| p.vertices.len()).sum()
    }
}

/// Image of a workspace polyline in the joint plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPolyline {
    /// `(rho2, rho3)` per vertex.
    pub points: Vec<[f64; 2]>,
    /// `(alpha, theta1)` of the pre-image vertex.
    pub preimage: Vec<[f64; 2]>,
    /// Index of the source workspace polyline.
    pub source: usize,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSliceCurve {
    pub rho1: f64,
    pub polylines: Vec<JointPolyline>,
    pub warnings: Vec<String>,
}

/// Normalized singularity value at `(alpha, theta1)`, nudged off degenerate legs.
fn slice_value(g: &Geometry, rho1: f64, alpha: f64, theta1: f64) -> f64 {
    let mut a = alpha;
    for _ in 0..4 {
        if let Ok(v) = signed_singularity(g, &Pose::new(rho1, theta1, a)) {
            return if v == 0.0 { f64::MIN_POSITIVE } else { v };
        }
        a += 1e-9;
    }
    f64::MIN_POSITIVE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeId {
    /// Between `(i, j)` and `(i + 1, j)` (alpha direction).
    Alpha(usize, usize),
    /// Between `(i, j)` and `(i, j + 1)` (theta direction).
    Theta(usize, usize),
}

/// Zero contour of `S` on the `(alpha, theta1)` torus by marching squares with
/// wrap-around indexing; each vertex refined by bisection along its grid edge.
pub fn workspace_singular_contour(g: &Geometry, rho1: f64, grid_n: usize) -> WorkspaceContour {
    assert!(rho1 > 0.0, "rho1 must be positive");
    let n = grid_n.max(4);
    let h = 2.0 * PI / n as f64;
    let coord = |k: usize| -PI + h * k as f64;
    let values: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            slice_value(g, rho1, coord(i), coord(j))
        })
        .collect();
    let val = |i: usize, j: usize| values[(j % n) * n + (i % n)];
    let positive = |i: usize, j: usize| val(i, j) > 0.0;

    let mut adjacency: HashMap<EdgeId, Vec<EdgeId>> = HashMap::new();
    let mut link = |a: EdgeId, b: EdgeId| {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    };
    for j in 0..n {
        for i in 0..n {
            let (ip, jp) = ((i + 1) % n, (j + 1) % n);
            let c = [positive(i, j), positive(ip, j), positive(ip, jp), positive(i, jp)];
            let bottom = EdgeId::Alpha(i, j);
            let right = EdgeId::Theta(ip, j);
            let top = EdgeId::Alpha(i, jp);
            let left = EdgeId::Theta(i, j);
            let mut crossings = Vec::with_capacity(4);
            if c[0] != c[1] {
                crossings.push(bottom);
            }
            if c[1] != c[2] {
                crossings.push(right);
            }
            if c[2] != c[3] {
                crossings.push(top);
            }
            if c[3] != c[0] {
                crossings.push(left);
            }
            match crossings.len() {
                0 => {}
                2 => link(crossings[0], crossings[1]),
                4 => {
                    // saddle: decide with the value at the cell centre
                    let centre = slice_value(g, rho1, coord(i) + 0.5 * h, coord(j) + 0.5 * h) > 0.0;
                    if centre == c[0] {
                        // corner 0 region joins the centre: cut off corners 1 and 3
                        link(bottom, right);
                        link(top, left);
                    } else {
                        link(left, bottom);
                        link(right, top);
                    }
                }
                _ => unreachable!("odd number of sign changes around a cell"),
            }
        }
    }

    let refine = |e: EdgeId| -> [f64; 2] {
        let (a0, t0, a1, t1) = match e {
            EdgeId::Alpha(i, j) => (coord(i), coord(j), coord(i) + h, coord(j)),
            EdgeId::Theta(i, j) => (coord(i), coord(j), coord(i), coord(j) + h),
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let f = |s: f64| slice_value(g, rho1, a0 + s * (a1 - a0), t0 + s * (t1 - t0));
        let flo = f(lo);
        let mut mid = 0.5;
        for _ in 0..80 {
            mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm.abs() < 1e-2 * CONTOUR_TOL || hi - lo < 1e-15 {
                break;
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = crate::scalar::wrap_angle(a0 + mid * (a1 - a0));
        let t = crate::scalar::wrap_angle(t0 + mid * (t1 - t0));
        [a, t]
    };

    // walk the cycles in a deterministic order
    let mut keys: Vec<EdgeId> = adjacency.keys().copied().collect();
    keys.sort_by_key(|e| match *e {
        EdgeId::Alpha(i, j) => (j, i, 0),
        EdgeId::Theta(i, j) => (j, i, 1),
    });
    let mut visited: HashMap<EdgeId, bool> = HashMap::new();
    let mut polylines = Vec::new();
    for start in keys {
        if visited.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut prev = start;
        let mut cur = adjacency[&start][0];
        let mut closed = false;
        loop {
            if cur == start {
                closed = true;
                break;
            }
            if visited.contains_key(&cur) {
                break;
            }
            visited.insert(cur, true);
            chain.push(cur);
            let nbrs = &adjacency[&cur];
            let next = if nbrs[0] == prev && nbrs.len() > 1 { nbrs[1] } else { nbrs[0] };
            prev = cur;
            cur = next;
        }
        let vertices: Vec<[f64; 2]> = chain.par_iter().map(|e| refine(*e)).collect();
        polylines.push(TorusPolyline { vertices, closed });
    }

    let components = count_sign_components(&values, n);
    WorkspaceContour { rho1, grid_n: n, polylines, contour_tol: CONTOUR_TOL, components }
}

/// Connected components of equal sign on an `n x n` periodic grid.
pub fn count_sign_components(values: &[f64], n: usize) -> usize {
    let mut label = vec![usize::MAX; n * n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n * n {
        if label[start] != usize::MAX {
            continue;
        }
        let sign = values[start] > 0.0;
        label[start] = count;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx % n, idx / n);
            let nbrs = [
                ((i + 1) % n, j),
                ((i + n - 1) % n, j),
                (i, (j + 1) % n),
                (i, (j + n - 1) % n),
            ];
            for (a, b) in nbrs {
                let k = b * n + a;
                if label[k] == usize::MAX && (values[k] > 0.0) == sign {
                    label[k] = count;
                    stack.push(k);
                }
            }
        }
        count += 1;
    }
    count
}

/// Maps every contour vertex to `(rho2, rho3)`. Vertices with a degenerate
/// leg are dropped and split their polyline.
pub fn joint_slice_curves(g: &Geometry, wc: &WorkspaceContour) -> JointSliceCurve {
    let mut polylines = Vec::new();
    let mut warnings = Vec::new();
    for (pid, pl) in wc.polylines.iter().enumerate() {
        let mut pieces: Vec<JointPolyline> = Vec::new();
        let mut current = JointPolyline { points: vec![], preimage: vec![], source: pid, closed: false };
        let mut broken = false;
        for v in &pl.vertices {
            match inverse_kinematics(g, &Pose::new(wc.rho1, v[1], v[0])) {
                Ok(q) => {
                    current.points.push([q.rho2(), q.rho3()]);
                    current.preimage.push(*v);
                }
                Err(e) => {
                    warnings.push(format!("polyline {pid}: vertex ({:.6}, {:.6}) dropped: {e}", v[0], v[1]));
                    broken = true;
                    if !current.points.is_empty() {
                        pieces.push(std::mem::replace(
                            &mut current,
                            JointPolyline { points: vec![], preimage: vec![], source: pid, closed: false },
                        ));
                    }
                }
            }
        }
        if !current.points.is_empty() {
            pieces.push(current);
        }
        if !broken && pieces.len() == 1 {
            pieces[0].closed = pl.closed;
        }
        polylines.extend(pieces);
    }
    JointSliceCurve { rho1: wc.rho1, polylines, warnings }
}

/// Per-node solution counts over a window of the joint plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountMap {
    pub rho1: f64,
    pub window: Window,
    pub n: usize,
    /// Row-major over `rho3` then `rho2`: index `j * n + i`.
    pub counts: Vec<u8>,
    /// Nodes where two polynomial roots nearly coincide.
    pub unreliable: Vec<bool>,
}

impl CountMap {
    pub fn at(&self, i: usize, j: usize) -> u8 {
        self.counts[j * self.n + i]
    }
}

pub fn solution_count_map(g: &Geometry, rho1: f64, window: Window, grid_n: usize) -> crate::Result<CountMap> {
    if !window.is_valid() || grid_n < 2 || rho1 <= 0.0 {
        return Err(Error::InvalidRequest("window must be positive and non-empty".into()));
    }
    let sets: Vec<Option<SolutionSet>> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|idx| {
            let [r2, r3] = window.node(grid_n, idx % grid_n, idx / grid_n);
            let q = JointVector::new(rho1, r2, r3).ok()?;
            solve_dk(g, &q).ok()
        })
        .collect();
    let counts = sets.iter().map(|s| s.as_ref().map_or(0, |s| s.len() as u8)).collect();
    let unreliable = sets.iter().map(|s| s.as_ref().is_none_or(|s| s.near_discriminant)).collect();
    Ok(CountMap { rho1, window, n: grid_n, counts, unreliable })
}
