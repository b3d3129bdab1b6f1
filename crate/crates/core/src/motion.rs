//! Continuation of one assembly mode along a piecewise-linear joint path at
//! fixed `rho1`, loop classification and cusp enclosure.
//!
//! Each straight segment is followed by pseudo-arclength continuation in
//! `(theta1, alpha, s)`. The `s` component of the tangent is the determinant
//! of the `(theta1, alpha)` block, so a branch that turns back in `s` has met
//! a fold: the mode is lost there and the motion stops.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cusp::{cusps_with_winding, CuspPoint};
use crate::dk::{normalized_slice_det, slice_jacobian, solve_dk, SolutionSet};
use crate::geometry::{constraint_residual, signed_singularity};
use crate::{Error, Geometry, JointVector, Pose, Result};

pub const FOLD_TOL: f64 = 1e-7;
/// Largest constraint residual accepted for a start pose.
pub const START_TOL: f64 = 1e-9;
pub const ORACLE_TOL: f64 = 1e-6;
/// Two waypoints closer than this are the same point.
pub const WAYPOINT_TOL: f64 = 1e-9;

/// Piecewise-linear path in the `(rho2, rho3)` plane at fixed `rho1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub rho1: f64,
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub closed: bool,
}

impl JointTrajectory {
    pub fn new(rho1: f64, waypoints: Vec<[f64; 2]>, closed: bool) -> Result<Self> {
        let t = JointTrajectory { rho1, waypoints, closed };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho1 > 0.0) || !self.rho1.is_finite() {
            return Err(Error::InvalidTrajectory("rho1 must be positive".into()));
        }
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidTrajectory("at least two waypoints are required".into()));
        }
        if self.waypoints.iter().flatten().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidTrajectory("leg lengths must be positive".into()));
        }
        if self.length() == 0.0 {
            return Err(Error::InvalidTrajectory("trajectory has zero length".into()));
        }
        Ok(())
    }

    /// Waypoints with an explicit closing duplicate removed.
    fn vertices(&self) -> &[[f64; 2]] {
        let w = &self.waypoints;
        if self.closed && w.len() > 2 && dist(w[0], w[w.len() - 1]) < WAYPOINT_TOL {
            &w[..w.len() - 1]
        } else {
            w
        }
    }

    /// Straight pieces in traversal order, zero-length ones skipped.
    pub fn segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        let v = self.vertices();
        let mut out: Vec<_> = v.windows(2).map(|w| (w[0], w[1])).collect();
        if self.closed {
            out.push((v[v.len() - 1], v[0]));
        }
        out.retain(|(a, b)| dist(*a, *b) > 0.0);
        out
    }

    pub fn length(&self) -> f64 {
        self.segments().iter().map(|(a, b)| dist(*a, *b)).sum()
    }

    /// Point at arc length `s` (clamped to the path).
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let mut left = s.max(0.0);
        let segs = self.segments();
        for (a, b) in &segs {
            let l = dist(*a, *b);
            if left <= l {
                let u = left / l;
                return [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])];
            }
            left -= l;
        }
        segs.last().map_or(self.waypoints[0], |s| s.1)
    }

    pub fn start(&self) -> [f64; 2] {
        self.waypoints[0]
    }

    /// Same loop, same start, opposite direction.
    pub fn reversed(&self) -> Self {
        let v = self.vertices();
        let mut w = vec![v[0]];
        if self.closed {
            w.extend(v[1..].iter().rev());
        } else {
            w = v.iter().rev().copied().collect();
        }
        JointTrajectory { rho1: self.rho1, waypoints: w, closed: self.closed }
    }

    /// The joint-plane loop used for winding numbers.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        self.vertices().to_vec()
    }

    /// Joint vector of a waypoint-plane point at this trajectory's `rho1`.
    pub fn joint(&self, p: [f64; 2]) -> Result<JointVector> {
        JointVector::new(self.rho1, p[0], p[1])
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    SingularStop,
    LoopSameMode,
    ModeChange,
    OpenEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    /// Arc length along the joint path.
    pub s: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub theta1: f64,
    pub alpha: f64,
    /// Signed normalized singularity value.
    pub singularity: f64,
    /// Distance to the nearest direct-kinematics root; `None` where the
    /// solver flags the joint vector as near-discriminant or was not asked.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle_gap: Option<f64>,
}

impl TraceSample {
    pub fn pose(&self, rho1: f64) -> Pose {
        Pose::new(rho1, self.theta1, self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub rho1: f64,
    pub samples: Vec<TraceSample>,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop_pose: Option<Pose>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop_s: Option<f64>,
    /// Index of the start pose in the solution set at the first waypoint.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start_mode_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub end_mode_index: Option<usize>,
    pub end_pose: Pose,
}

impl TraceResult {
    /// Every `every`-th sample plus the last one.
    pub fn downsampled(&self, every: usize) -> TraceResult {
        let every = every.max(1);
        let n = self.samples.len();
        let samples = self.samples.iter().enumerate().filter(|(i, _)| i % every == 0 || i + 1 == n).map(|(_, s)| *s).collect();
        TraceResult { samples, ..self.clone() }
    }

    /// Largest oracle gap over the samples that carry one.
    pub fn max_oracle_gap(&self) -> f64 {
        self.samples.iter().filter_map(|s| s.oracle_gap).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub fold_tol: f64,
    pub step_init: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub newton_iters: usize,
    pub newton_tol: f64,
    /// Arc-length bracket below which a fold is considered localized.
    pub fold_bracket: f64,
    /// Cross-check every accepted sample against `solve_dk`.
    pub oracle: bool,
    pub max_steps: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            fold_tol: FOLD_TOL,
            step_init: 1e-2,
            step_min: 1e-8,
            step_max: 0.1,
            newton_iters: 12,
            newton_tol: 1e-11,
            fold_bracket: 1e-8,
            oracle: true,
            max_steps: 500_000,
        }
    }
}

/// One straight piece `q(s) = a + s u`, `0 <= s <= len`.
struct Segment {
    rho1: f64,
    a: [f64; 2],
    u: [f64; 2],
    len: f64,
}

impl Segment {
    fn q(&self, s: f64) -> [f64; 2] {
        [self.a[0] + s * self.u[0], self.a[1] + s * self.u[1]]
    }

    fn pose(&self, y: &Vector3<f64>) -> Pose {
        Pose { rho1: self.rho1, theta1: y[0], alpha: y[1] }
    }

    fn residual(&self, g: &Geometry, y: &Vector3<f64>) -> [f64; 2] {
        let [r2, r3] = self.q(y[2]);
        let b = self.pose(y).legs(g);
        [b[1][0] * b[1][0] + b[1][1] * b[1][1] - r2 * r2, b[2][0] * b[2][0] + b[2][1] * b[2][1] - r3 * r3]
    }

    /// 2x3 Jacobian of the residual in `(theta1, alpha, s)`.
    fn jacobian(&self, g: &Geometry, y: &Vector3<f64>) -> [[f64; 3]; 2] {
        let j = slice_jacobian(g, &self.pose(y));
        let [r2, r3] = self.q(y[2]);
        [[j[0][0], j[0][1], -2.0 * r2 * self.u[0]], [j[1][0], j[1][1], -2.0 * r3 * self.u[1]]]
    }

    /// Unit null vector of the Jacobian; its `s` part is the `(theta1, alpha)` determinant.
    fn tangent(&self, g: &Geometry, y: &Vector3<f64>) -> Vector3<f64> {
        let j = self.jacobian(g, y);
        let r0 = Vector3::new(j[0][0], j[0][1], j[0][2]);
        let r1 = Vector3::new(j[1][0], j[1][1], j[1][2]);
        r0.cross(&r1).normalize()
    }

    fn scale(&self) -> f64 {
        let q0 = self.q(0.0);
        let q1 = self.q(self.len);
        1.0 + q0[0].max(q1[0]).powi(2) + q0[1].max(q1[1]).powi(2)
    }
}

/// Pseudo-arclength corrector: Newton on `H(y) = 0`, `t . (y - yp) = 0`.
fn correct(g: &Geometry, seg: &Segment, yp: Vector3<f64>, t: &Vector3<f64>, opts: &TraceOptions) -> Option<(Vector3<f64>, usize)> {
    let mut y = yp;
    let scale = seg.scale();
    for it in 1..=opts.newton_iters {
        let h = seg.residual(g, &y);
        let j = seg.jacobian(g, &y);
        let m = Matrix3::new(j[0][0], j[0][1], j[0][2], j[1][0], j[1][1], j[1][2], t[0], t[1], t[2]);
        let rhs = Vector3::new(-h[0], -h[1], -t.dot(&(y - yp)));
        let d = m.lu().solve(&rhs)?;
        if !d.iter().all(|x| x.is_finite()) {
            return None;
        }
        y += d;
        if d.amax() <= opts.newton_tol {
            let h = seg.residual(g, &y);
            return (h[0].abs().max(h[1].abs()) < 1e-12 * scale).then_some((y, it));
        }
    }
    None
}

/// Newton in `(theta1, alpha)` with `s` held fixed.
fn correct_at(g: &Geometry, seg: &Segment, mut y: Vector3<f64>, opts: &TraceOptions) -> Option<Vector3<f64>> {
    let scale = seg.scale();
    for _ in 0..opts.newton_iters {
        let h = seg.residual(g, &y);
        let j = seg.jacobian(g, &y);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dt = (h[0] * j[1][1] - h[1] * j[0][1]) / det;
        let da = (j[0][0] * h[1] - j[1][0] * h[0]) / det;
        y[0] -= dt;
        y[1] -= da;
        if dt.abs().max(da.abs()) <= opts.newton_tol {
            let h = seg.residual(g, &y);
            return (h[0].abs().max(h[1].abs()) < 1e-12 * scale).then_some(y);
        }
    }
    None
}

fn oriented(t: Vector3<f64>, reference: &Vector3<f64>) -> Vector3<f64> {
    if t.dot(reference) < 0.0 {
        -t
    } else {
        t
    }
}

enum SegmentEnd {
    Reached(Vector3<f64>),
    Fold { y: Vector3<f64> },
}

struct Tracer<'a> {
    g: &'a Geometry,
    opts: &'a TraceOptions,
    samples: Vec<TraceSample>,
    steps: usize,
}

impl Tracer<'_> {
    fn record(&mut self, seg: &Segment, offset: f64, y: &Vector3<f64>) {
        let [r2, r3] = seg.q(y[2]);
        let pose = Pose::new(seg.rho1, y[0], y[1]);
        let singularity = signed_singularity(self.g, &pose).unwrap_or(0.0);
        let oracle_gap = if self.opts.oracle {
            JointVector::new(seg.rho1, r2, r3)
                .ok()
                .and_then(|q| solve_dk(self.g, &q).ok())
                .filter(|set| !set.near_discriminant)
                .map(|set| set.nearest(&pose).map_or(f64::INFINITY, |(_, d)| d))
        } else {
            None
        };
        self.samples.push(TraceSample { s: offset + y[2], rho2: r2, rho3: r3, theta1: pose.theta1, alpha: pose.alpha, singularity, oracle_gap });
    }

    fn run_segment(&mut self, seg: &Segment, offset: f64, start: Vector3<f64>) -> Result<SegmentEnd> {
        let opts = self.opts;
        let g = self.g;
        let mut y = start;
        let mut t = seg.tangent(g, &y);
        if t[2] < 0.0 {
            t = -t;
        }
        let mut h = opts.step_init;
        while y[2] < seg.len {
            self.steps += 1;
            if self.steps > opts.max_steps || h < opts.step_min {
                return Err(Error::CorrectorDiverged { s: offset + y[2] });
            }
            // land exactly on the segment end when the next step would pass it
            if t[2] > 0.0 && y[2] + h * t[2] >= seg.len {
                let tau = (seg.len - y[2]) / t[2];
                let mut yp = y + tau * t;
                yp[2] = seg.len;
                if let Some(yl) = correct_at(g, seg, yp, opts) {
                    let tl = oriented(seg.tangent(g, &yl), &t);
                    if tl[2] > 0.0 && tl.dot(&t) > 0.9 && (yl - yp).norm() < 0.3 * tau.max(opts.step_min) + 1e-9 {
                        self.record(seg, offset, &yl);
                        return Ok(SegmentEnd::Reached(yl));
                    }
                }
                h *= 0.5;
                continue;
            }
            let yp = y + h * t;
            let Some((yn, iters)) = correct(g, seg, yp, &t, opts) else {
                h *= 0.5;
                continue;
            };
            let tn = oriented(seg.tangent(g, &yn), &t);
            if tn.dot(&t) < 0.9 || (yn - yp).norm() > 0.3 * h {
                h *= 0.5;
                continue;
            }
            if tn[2] <= 0.0 {
                return Ok(SegmentEnd::Fold { y: self.localize_fold(seg, offset, &y, &t, h)? });
            }
            y = yn;
            t = tn;
            self.record(seg, offset, &y);
            if iters <= 3 {
                h = (h * 1.5).min(opts.step_max);
            }
        }
        Ok(SegmentEnd::Reached(y))
    }

    /// Bisects the arc step `[0, h]` from `y` on the sign of the `s` tangent.
    fn localize_fold(&mut self, seg: &Segment, offset: f64, y: &Vector3<f64>, t: &Vector3<f64>, h: f64) -> Result<Vector3<f64>> {
        let (mut lo, mut hi) = (0.0, h);
        let mut best = *y;
        while hi - lo > self.opts.fold_bracket {
            let mid = 0.5 * (lo + hi);
            let Some((ym, _)) = correct(self.g, seg, y + mid * t, t, self.opts) else {
                return Err(Error::CorrectorDiverged { s: offset + y[2] });
            };
            if oriented(seg.tangent(self.g, &ym), t)[2] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            best = ym;
        }
        let mid = 0.5 * (lo + hi);
        if let Some((ym, _)) = correct(self.g, seg, y + mid * t, t, self.opts) {
            best = ym;
        }
        if normalized_slice_det(self.g, &seg.pose(&best)).abs() >= self.opts.fold_tol {
            return Err(Error::CorrectorDiverged { s: offset + best[2] });
        }
        Ok(best)
    }
}

pub fn trace(g: &Geometry, traj: &JointTrajectory, start: Pose) -> Result<TraceResult> {
    trace_with(g, traj, start, &TraceOptions::default())
}

pub fn trace_with(g: &Geometry, traj: &JointTrajectory, start: Pose, opts: &TraceOptions) -> Result<TraceResult> {
    traj.validate()?;
    let q0 = traj.joint(traj.start())?;
    let start = Pose::new(traj.rho1, start.theta1, start.alpha);
    let residual = constraint_residual(g, &start, &q0).iter().fold(0.0f64, |m, f| m.max(f.abs()));
    if !(residual < START_TOL) {
        return Err(Error::StartInconsistent { residual });
    }
    let start_set = solve_dk(g, &q0)?;
    let start_mode_index = start_set.nearest(&start).filter(|(_, d)| *d < ORACLE_TOL).map(|(i, _)| i);

    let mut tracer = Tracer { g, opts, samples: vec![], steps: 0 };
    let mut offset = 0.0;
    let mut y = Vector3::new(start.theta1, start.alpha, 0.0);
    for (k, (a, b)) in traj.segments().into_iter().enumerate() {
        let len = dist(a, b);
        let seg = Segment { rho1: traj.rho1, a, u: [(b[0] - a[0]) / len, (b[1] - a[1]) / len], len };
        y[2] = 0.0;
        if k == 0 {
            tracer.record(&seg, offset, &y);
        }
        match tracer.run_segment(&seg, offset, y)? {
            SegmentEnd::Reached(end) => y = end,
            SegmentEnd::Fold { y: fold } => {
                tracer.record(&seg, offset, &fold);
                let stop_pose = Pose::new(traj.rho1, fold[0], fold[1]);
                return Ok(TraceResult {
                    rho1: traj.rho1,
                    samples: tracer.samples,
                    outcome: Outcome::SingularStop,
                    stop_pose: Some(stop_pose),
                    stop_s: Some(offset + fold[2]),
                    start_mode_index,
                    end_mode_index: None,
                    end_pose: stop_pose,
                });
            }
        }
        offset += len;
    }
    let end_pose = Pose::new(traj.rho1, y[0], y[1]);
    let (outcome, end_mode_index) = if traj.closed {
        let end = end_mode(&start_set, &end_pose);
        let outcome = if end.is_some() && end == start_mode_index { Outcome::LoopSameMode } else { Outcome::ModeChange };
        (outcome, end)
    } else {
        (Outcome::OpenEnd, None)
    };
    Ok(TraceResult { rho1: traj.rho1, samples: tracer.samples, outcome, stop_pose: None, stop_s: None, start_mode_index, end_mode_index, end_pose })
}

fn end_mode(set: &SolutionSet, p: &Pose) -> Option<usize> {
    set.nearest(p).filter(|(_, d)| *d < ORACLE_TOL).map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRun {
    pub start_index: usize,
    pub direction: Direction,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub end_mode_index: Option<usize>,
    /// Arc length of the stop, measured in the direction of travel.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop_pose: Option<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopClassification {
    pub runs: Vec<LoopRun>,
    /// Arc lengths (forward direction) where the path meets the singular curve.
    pub crossings: Vec<f64>,
}

impl LoopClassification {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.runs.iter().filter(|r| r.outcome == outcome).count()
    }
}

/// Traces every assembly mode at the first waypoint in both directions.
pub fn classify_loop(g: &Geometry, traj: &JointTrajectory) -> Result<LoopClassification> {
    traj.validate()?;
    if !traj.closed {
        return Err(Error::InvalidTrajectory("loop classification needs a closed trajectory".into()));
    }
    let set = solve_dk(g, &traj.joint(traj.start())?)?;
    let reversed = traj.reversed();
    let jobs: Vec<(usize, Direction)> =
        (0..set.len()).flat_map(|i| [(i, Direction::Forward), (i, Direction::Reverse)]).collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, dir)| {
            let path = if dir == Direction::Forward { traj } else { &reversed };
            let r = trace(g, path, set.solutions[i].pose)?;
            Ok(LoopRun { start_index: i, direction: dir, outcome: r.outcome, end_mode_index: r.end_mode_index, stop_s: r.stop_s, stop_pose: r.stop_pose })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossings = singular_crossings(g, traj, 0.01)?;
    Ok(LoopClassification { runs, crossings })
}

fn solution_count(g: &Geometry, traj: &JointTrajectory, s: f64) -> usize {
    traj.joint(traj.point_at(s)).ok().and_then(|q| solve_dk(g, &q).ok()).map_or(0, |set| set.len())
}

/// Arc lengths where the number of assembly modes changes along the path,
/// from samples `spacing` apart refined by bisection.
pub fn singular_crossings(g: &Geometry, traj: &JointTrajectory, spacing: f64) -> Result<Vec<f64>> {
    traj.validate()?;
    let len = traj.length();
    let n = ((len / spacing).ceil() as usize).max(2);
    let counts: Vec<usize> = (0..=n).into_par_iter().map(|k| solution_count(g, traj, len * k as f64 / n as f64)).collect();
    let brackets: Vec<(f64, f64)> = (0..n)
        .filter(|&k| counts[k] != counts[k + 1])
        .map(|k| (len * k as f64 / n as f64, len * (k + 1) as f64 / n as f64))
        .collect();
    Ok(brackets
        .into_par_iter()
        .map(|(mut lo, mut hi)| {
            let c_lo = solution_count(g, traj, lo);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if solution_count(g, traj, mid) == c_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect())
}

/// Cusps the closed joint path winds around, with their winding numbers.
pub fn enclosed_cusps(traj: &JointTrajectory, cusps: &[CuspPoint]) -> Result<Vec<(CuspPoint, i32)>> {
    traj.validate()?;
    let w = &traj.waypoints;
    if !traj.closed && dist(w[0], w[w.len() - 1]) > WAYPOINT_TOL {
        return Err(Error::InvalidTrajectory("enclosure needs a closed path".into()));
    }
    cusps_with_winding(cusps, &traj.polygon())
}

/// Normalized `(theta1, alpha)` determinant at a pose; vanishes on folds.
pub fn fold_determinant(g: &Geometry, p: &Pose) -> f64 {
    normalized_slice_det(g, p)
}

/// Triangle through `first` whose other two vertices are `first` rotated
/// about `center` by +-120 degrees and pulled towards it by `scale`.
/// Traversal is counter-clockwise about `center`.
pub fn triangle_around(center: [f64; 2], first: [f64; 2], scale: f64) -> Vec<[f64; 2]> {
    let v = [first[0] - center[0], first[1] - center[1]];
    let rot = |a: f64| {
        let (s, c) = a.sin_cos();
        [center[0] + scale * (c * v[0] - s * v[1]), center[1] + scale * (s * v[0] + c * v[1])]
    };
    let third = 2.0 * std::f64::consts::FRAC_PI_3;
    vec![first, rot(third), rot(-third)]
}

/// Loop around the cusp nearest to `q0`: the smallest triangle from
/// [`triangle_around`] (scales 0.3, 0.4, ..., 1.0) that meets the singular
/// curve exactly `crossings` times and winds around that cusp alone.
pub fn cusp_loop(g: &Geometry, rho1: f64, q0: [f64; 2], cusps: &[CuspPoint], crossings: usize) -> Result<(JointTrajectory, CuspPoint)> {
    let c = cusps
        .iter()
        .min_by(|a, b| dist(a.joint(), q0).total_cmp(&dist(b.joint(), q0)))
        .ok_or_else(|| Error::InvalidRequest("no cusp to encircle".into()))?;
    for k in 3..=10 {
        let t = JointTrajectory::new(rho1, triangle_around(c.joint(), q0, k as f64 / 10.0), true)?;
        let enc = enclosed_cusps(&t, cusps)?;
        if enc.len() == 1 && singular_crossings(g, &t, 0.01)?.len() == crossings {
            return Ok((t, *c));
        }
    }
    Err(Error::InvalidRequest(format!("no triangle around the cusp meets the singular curve {crossings} times")))
}
