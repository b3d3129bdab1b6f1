//! Cusp points of a fixed-`rho1` slice: joint vectors where the
//! characteristic polynomial has a triple root.
//!
//! With `X = rho2^2`, `Y = rho3^2` the numerators of the eliminated system
//! are affine in `(X, Y)` and the denominator `D` does not depend on them, so
//! `G(theta; X, Y)` and all its partials are cheap to evaluate exactly. The
//! double-root locus `{G = 0, G' = 0}` is a smooth closed curve in
//! `(theta, rho2, rho3)` over each singular contour; its projection to the
//! joint plane has zero velocity exactly where `G''` vanishes, so cusps are
//! the sign changes of `G''` along a continuation of that curve.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::{joint_slice_curves, workspace_singular_contour, JointPolyline};
use crate::dk::alpha_system_parts;
use crate::geometry::{constraint_residual, signed_singularity};
use crate::poly::{Poly, TrigPoly};
use crate::scalar::{angle_diff, wrap_angle};
use crate::winding::winding_number_with_tol;
use crate::{Error, Geometry, JointVector, Pose, Result};

pub const CUSP_MERGE_TOL: f64 = 1e-4;
pub const CUSP_BOUNDARY_TOL: f64 = 1e-6;
pub const MULT_GAP_TOL: f64 = 1e-6;
/// Bound on each normalized triple-root residual.
pub const CUSP_RESIDUAL_TOL: f64 = 1e-8;

/// A joint vector where three direct-kinematics solutions coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspPoint {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub theta1: f64,
    /// Orientation of the coalesced pose.
    pub alpha: f64,
    /// The triple root as `tan(theta1 / 2)`.
    pub t_triple: f64,
    /// `|P|, |P'|, |P''|` of the normalized characteristic polynomial at the triple root.
    pub residuals: [f64; 3],
}

impl CuspPoint {
    pub fn joint(&self) -> [f64; 2] {
        [self.rho2, self.rho3]
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.rho1, self.theta1, self.alpha)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CuspOptions {
    /// Torus grid used to seed the continuation.
    pub contour_grid: usize,
    pub merge_tol: f64,
    pub mult_gap_tol: f64,
    pub step_init: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub max_steps: usize,
}

impl Default for CuspOptions {
    fn default() -> Self {
        CuspOptions {
            contour_grid: 256,
            merge_tol: CUSP_MERGE_TOL,
            mult_gap_tol: MULT_GAP_TOL,
            step_init: 1e-2,
            step_min: 1e-6,
            step_max: 0.05,
            max_steps: 200_000,
        }
    }
}

/// A candidate that was found but not accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspDiagnostic {
    /// `NONCONVERGENT`, `DEGENERATE`, `SPURIOUS`, `SEED_FAILURE` or `TRACE_STALLED`.
    pub code: String,
    pub message: String,
    /// `(theta1, rho2, rho3)` where the problem was seen, when known.
    pub at: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspReport {
    pub rho1: f64,
    /// Sorted by `rho2`, then `rho3`.
    pub cusps: Vec<CuspPoint>,
    pub diagnostics: Vec<CuspDiagnostic>,
    /// Number of closed double-root loops traced to completion.
    pub traced_loops: usize,
}

/// `G` and its partials as functions of `(theta, X, Y)` on one slice.
#[derive(Debug, Clone)]
pub(crate) struct SliceFamily {
    rho1: f64,
    m: [[TrigPoly<f64>; 2]; 2],
    n1_0: TrigPoly<f64>,
    n2_0: TrigPoly<f64>,
    d: TrigPoly<f64>,
    d2: TrigPoly<f64>,
}

/// Values at one point of `(theta, rho2, rho3)`; index `k` is the `k`-th theta derivative.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Jet {
    pub g: [f64; 4],
    /// `dG/drho2`, `dG/drho3` and their theta derivatives.
    pub g_r2: [f64; 3],
    pub g_r3: [f64; 3],
    /// Largest coefficient of `G(.; X, Y)`, the normalization of every residual.
    pub scale: f64,
}

impl SliceFamily {
    pub(crate) fn new(g: &Geometry, rho1: f64) -> Self {
        let (m, r) = alpha_system_parts(g, rho1, 0.0, 0.0);
        let n1_0 = r[0].mul(&m[1][1]).sub(&r[1].mul(&m[0][1]));
        let n2_0 = m[0][0].mul(&r[1]).sub(&m[1][0].mul(&r[0]));
        let d = m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0]));
        let d2 = d.mul(&d);
        SliceFamily { rho1, m, n1_0, n2_0, d, d2 }
    }

    fn numerators(&self, rho2: f64, rho3: f64) -> (TrigPoly<f64>, TrigPoly<f64>) {
        let (x, y) = (rho2 * rho2, rho3 * rho3);
        let m = &self.m;
        let n1 = self.n1_0.add(&m[1][1].scale(x)).sub(&m[0][1].scale(y));
        let n2 = self.n2_0.sub(&m[1][0].scale(x)).add(&m[0][0].scale(y));
        (n1, n2)
    }

    pub(crate) fn g_poly(&self, rho2: f64, rho3: f64) -> TrigPoly<f64> {
        let (n1, n2) = self.numerators(rho2, rho3);
        let mut g = n1.mul(&n1).add(&n2.mul(&n2)).sub(&self.d2);
        g.cos.truncate(4);
        g.sin.truncate(4);
        g
    }

    pub(crate) fn jet(&self, x: [f64; 3]) -> Jet {
        let [theta, rho2, rho3] = x;
        let (n1, n2) = self.numerators(rho2, rho3);
        let m = &self.m;
        let g = n1.mul(&n1).add(&n2.mul(&n2)).sub(&self.d2);
        // dG/dX and dG/dY, then the chain rule through X = rho2^2
        let gx = n1.mul(&m[1][1]).sub(&n2.mul(&m[1][0])).scale(4.0 * rho2);
        let gy = n2.mul(&m[0][0]).sub(&n1.mul(&m[0][1])).scale(4.0 * rho3);
        let derivs = |p: &TrigPoly<f64>, k: usize| {
            let mut out = Vec::with_capacity(k);
            let mut cur = p.clone();
            for _ in 0..k {
                out.push(cur.eval(theta));
                cur = cur.derivative();
            }
            out
        };
        let gv = derivs(&g, 4);
        let xv = derivs(&gx, 3);
        let yv = derivs(&gy, 3);
        Jet {
            g: [gv[0], gv[1], gv[2], gv[3]],
            g_r2: [xv[0], xv[1], xv[2]],
            g_r3: [yv[0], yv[1], yv[2]],
            scale: g.max_abs_coeff().max(f64::MIN_POSITIVE),
        }
    }

    /// `|D(theta)|` relative to its largest coefficient; zero marks a spurious double root.
    fn relative_denominator(&self, theta: f64) -> f64 {
        self.d.eval(theta).abs() / self.d.max_abs_coeff().max(f64::MIN_POSITIVE)
    }

    /// Pose recovered from the linear elimination at a root `theta`.
    fn pose_at(&self, x: [f64; 3]) -> Pose {
        let (n1, n2) = self.numerators(x[1], x[2]);
        let d = self.d.eval(x[0]);
        let alpha = (n2.eval(x[0]) / d).atan2(n1.eval(x[0]) / d);
        Pose::new(self.rho1, x[0], alpha)
    }
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        v
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Rows of the Jacobian of `(G, G')`, normalized by the jet scale.
fn locus_rows(j: &Jet) -> ([f64; 3], [f64; 3]) {
    let s = j.scale;
    ([j.g[1] / s, j.g_r2[0] / s, j.g_r3[0] / s], [j.g[2] / s, j.g_r2[1] / s, j.g_r3[1] / s])
}

fn tangent(j: &Jet) -> [f64; 3] {
    let (a, b) = locus_rows(j);
    normalize3(cross3(normalize3(a), normalize3(b)))
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mat = Matrix3::from_fn(|r, c| m[r][c]);
    let sol = mat.lu().solve(&Vector3::new(rhs[0], rhs[1], rhs[2]))?;
    sol.iter().all(|v| v.is_finite()).then(|| [sol[0], sol[1], sol[2]])
}

/// Minimum-norm Newton onto the double-root locus (for seeds off the curve).
fn project_to_locus(fam: &SliceFamily, mut x: [f64; 3]) -> Option<[f64; 3]> {
    for _ in 0..30 {
        let j = fam.jet(x);
        let f = [j.g[0] / j.scale, j.g[1] / j.scale];
        let (a, b) = locus_rows(&j);
        // J J^T 2x2
        let (aa, ab, bb) = (dot3(a, a), dot3(a, b), dot3(b, b));
        let det = aa * bb - ab * ab;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let l0 = (bb * f[0] - ab * f[1]) / det;
        let l1 = (aa * f[1] - ab * f[0]) / det;
        let dx = [l0 * a[0] + l1 * b[0], l0 * a[1] + l1 * b[1], l0 * a[2] + l1 * b[2]];
        x = [x[0] - dx[0], x[1] - dx[1], x[2] - dx[2]];
        if dot3(dx, dx).sqrt() < 1e-13 * (1.0 + x[1].abs() + x[2].abs()) {
            return Some(x);
        }
    }
    let j = fam.jet(x);
    (j.g[0].abs().max(j.g[1].abs()) / j.scale < 1e-11).then_some(x)
}

/// Pseudo-arclength corrector: Newton on `(G, G', t . (y - pred))`.
fn correct(fam: &SliceFamily, pred: [f64; 3], t: [f64; 3]) -> Option<([f64; 3], usize)> {
    let mut y = pred;
    for it in 0..8 {
        let j = fam.jet(y);
        let (a, b) = locus_rows(&j);
        let dy = [y[0] - pred[0], y[1] - pred[1], y[2] - pred[2]];
        let f = [j.g[0] / j.scale, j.g[1] / j.scale, dot3(t, dy)];
        let step = solve3([a, b, t], f)?;
        y = [y[0] - step[0], y[1] - step[1], y[2] - step[2]];
        if dot3(step, step).sqrt() < 1e-12 * (1.0 + y[1].abs() + y[2].abs()) {
            return Some((y, it + 1));
        }
    }
    let j = fam.jet(y);
    (j.g[0].abs().max(j.g[1].abs()) / j.scale < 1e-12).then_some((y, 8))
}

#[derive(Debug, Clone, Copy)]
struct LocusSample {
    x: [f64; 3],
    t: [f64; 3],
    /// Normalized `G''`.
    curvature: f64,
}

#[derive(Debug, Clone, Default)]
struct LocusTrace {
    samples: Vec<LocusSample>,
    closed: bool,
    stalled: bool,
}

fn locus_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dt = angle_diff(a[0], b[0]);
    (dt * dt + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Distance between the physical points: `G` only sees `rho^2`, so the
/// trace may run through negative leg lengths after a leg degenerates.
fn physical_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    locus_distance([a[0], a[1].abs(), a[2].abs()], [b[0], b[1].abs(), b[2].abs()])
}

fn sample(fam: &SliceFamily, x: [f64; 3], t: [f64; 3]) -> LocusSample {
    let j = fam.jet(x);
    LocusSample { x, t, curvature: j.g[2] / j.scale }
}

/// Marches from `x0` along `dir * tangent` until the loop closes or the step
/// floor is hit.
fn march(fam: &SliceFamily, x0: [f64; 3], dir: f64, opts: &CuspOptions) -> LocusTrace {
    let t0 = tangent(&fam.jet(x0));
    let t0 = [dir * t0[0], dir * t0[1], dir * t0[2]];
    let mut out = LocusTrace { samples: vec![sample(fam, x0, t0)], ..Default::default() };
    let (mut x, mut t) = (x0, t0);
    let mut h = opts.step_init;
    let mut arc = 0.0;
    for _ in 0..opts.max_steps {
        let pred = [x[0] + h * t[0], x[1] + h * t[1], x[2] + h * t[2]];
        let accepted = correct(fam, pred, t).and_then(|(y, iters)| {
            let mut tn = tangent(&fam.jet(y));
            if dot3(tn, t) < 0.0 {
                tn = [-tn[0], -tn[1], -tn[2]];
            }
            let dist = locus_distance(x, y);
            (dot3(tn, t) > 0.95 && dist < 2.0 * h).then_some((y, tn, iters, dist))
        });
        match accepted {
            Some((y, tn, iters, dist)) => {
                arc += dist;
                x = y;
                t = tn;
                if arc > 10.0 * opts.step_max && physical_distance(x, x0) < 1.5 * h.max(opts.step_init) {
                    out.closed = true;
                    return out;
                }
                out.samples.push(sample(fam, x, t));
                if iters <= 3 {
                    h = (h * 1.5).min(opts.step_max);
                }
            }
            None => {
                h *= 0.5;
                if h < opts.step_min {
                    out.stalled = true;
                    return out;
                }
            }
        }
    }
    out.stalled = true;
    out
}

/// Newton on `(G, G', G'')` in `(theta, rho2, rho3)`.
fn refine_triple(fam: &SliceFamily, mut x: [f64; 3]) -> Option<[f64; 3]> {
    let mut best = None;
    for _ in 0..40 {
        let j = fam.jet(x);
        let s = j.scale;
        let f = [j.g[0] / s, j.g[1] / s, j.g[2] / s];
        let rows = [
            [j.g[1] / s, j.g_r2[0] / s, j.g_r3[0] / s],
            [j.g[2] / s, j.g_r2[1] / s, j.g_r3[1] / s],
            [j.g[3] / s, j.g_r2[2] / s, j.g_r3[2] / s],
        ];
        let step = solve3(rows, f)?;
        let len = dot3(step, step).sqrt();
        if len > 1.0 {
            return None;
        }
        x = [x[0] - step[0], x[1] - step[1], x[2] - step[2]];
        if len < 1e-14 * (1.0 + x[1].abs() + x[2].abs()) {
            return Some(x);
        }
        if len < 1e-11 {
            best = Some(x);
        }
    }
    best
}

/// Bisects a sign change of `G''` between two consecutive trace samples.
fn bracket_sign_change(fam: &SliceFamily, a: &LocusSample, b: &LocusSample) -> [f64; 3] {
    let h_total = locus_distance(a.x, b.x);
    let (mut lo, mut hi) = (0.0, h_total);
    let mut best = if a.curvature.abs() < b.curvature.abs() { a.x } else { b.x };
    for _ in 0..60 {
        if hi - lo < 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let pred = [a.x[0] + mid * a.t[0], a.x[1] + mid * a.t[1], a.x[2] + mid * a.t[2]];
        let Some((y, _)) = correct(fam, pred, a.t) else { break };
        let c = fam.jet(y);
        let curv = c.g[2] / c.scale;
        best = y;
        if curv.signum() == a.curvature.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// `|P|, |P'|, |P''|` of the max-coefficient-normalized half-angle polynomial
/// at `theta`, evaluated in `t` or, past `|t| = 1`, in the reversed variable `1 / t`.
pub(crate) fn half_angle_residuals(g: &TrigPoly<f64>, theta: f64) -> [f64; 3] {
    let mut g = g.clone();
    g.cos.resize(4, 0.0);
    g.sin.resize(4, 0.0);
    let p = g.to_half_angle().normalized();
    let t = (0.5 * theta).tan();
    let (poly, at) = if t.abs() <= 1.0 {
        (p, t)
    } else {
        let mut rev = p.coeffs.clone();
        rev.reverse();
        (Poly::new(rev), 1.0 / t)
    };
    let d1 = poly.derivative();
    let d2 = d1.derivative();
    [poly.eval(at).abs(), d1.eval(at).abs(), d2.eval(at).abs()]
}

enum Candidate {
    Accepted(CuspPoint),
    Rejected(CuspDiagnostic),
}

fn certify(fam: &SliceFamily, g: &Geometry, start: [f64; 3], opts: &CuspOptions) -> Candidate {
    let reject = |code: &str, message: String, at: [f64; 3]| {
        Candidate::Rejected(CuspDiagnostic { code: code.into(), message, at: Some(at) })
    };
    // sign changes of G'' next to a zero of D come from the spurious node
    // where two distinct poses share theta1, not from a fold
    if fam.relative_denominator(start[0]) < 1e-3 {
        return reject("SPURIOUS", "elimination denominator vanishes near the candidate".into(), start);
    }
    let Some(x) = refine_triple(fam, start) else {
        return reject("NONCONVERGENT", "triple-root Newton did not converge".into(), start);
    };
    let x = [wrap_angle(x[0]), x[1].abs(), x[2].abs()];
    if x[1] == 0.0 || x[2] == 0.0 {
        return reject("NONCONVERGENT", "triple root at a zero leg length".into(), x);
    }
    if fam.relative_denominator(x[0]) < 1e-6 {
        return reject("SPURIOUS", "elimination denominator vanishes: not a singular pose".into(), x);
    }
    let gp = fam.g_poly(x[1], x[2]);
    let j = fam.jet(x);
    if (j.g[3] / j.scale).abs() <= opts.mult_gap_tol {
        return reject("DEGENERATE", format!("root multiplicity above three (|G'''| = {:e})", j.g[3] / j.scale), x);
    }
    let residuals = half_angle_residuals(&gp, x[0]);
    if residuals.iter().any(|r| !(*r < CUSP_RESIDUAL_TOL)) {
        return reject("NONCONVERGENT", format!("triple-root residuals {residuals:?} above tolerance"), x);
    }
    let pose = fam.pose_at(x);
    let q = match JointVector::new(fam.rho1, x[1], x[2]) {
        Ok(q) => q,
        Err(e) => return reject("NONCONVERGENT", e.to_string(), x),
    };
    let f = constraint_residual(g, &pose, &q);
    let scale = 1.0 + x[1] * x[1] + x[2] * x[2];
    if f.iter().any(|v| v.abs() > 1e-8 * scale) {
        return reject("SPURIOUS", "recovered pose does not assemble".into(), x);
    }
    match signed_singularity(g, &pose) {
        Ok(s) if s.abs() < 1e-6 => {}
        _ => return reject("SPURIOUS", "recovered pose is not singular".into(), x),
    }
    Candidate::Accepted(CuspPoint {
        rho1: fam.rho1,
        rho2: x[1],
        rho3: x[2],
        theta1: x[0],
        alpha: pose.alpha,
        t_triple: (0.5 * x[0]).tan(),
        residuals,
    })
}

fn sign_change_starts(fam: &SliceFamily, samples: &[LocusSample], closed: bool) -> Vec<[f64; 3]> {
    let n = samples.len();
    let pairs = if closed { n } else { n.saturating_sub(1) };
    (0..pairs)
        .filter_map(|i| {
            let (a, b) = (&samples[i], &samples[(i + 1) % n]);
            (a.curvature * b.curvature < 0.0).then(|| bracket_sign_change(fam, a, b))
        })
        .collect()
}

/// Seed: the polyline vertex where the elimination is best conditioned.
fn seed_of(fam: &SliceFamily, pl: &JointPolyline) -> Option<[f64; 3]> {
    let best = pl
        .points
        .iter()
        .zip(&pl.preimage)
        .map(|(p, pre)| ([pre[1], p[0], p[1]], fam.relative_denominator(pre[1])))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    project_to_locus(fam, best.0)
}

/// Last resort when tracing stalls: `G''` sign changes between polyline vertices.
fn vertex_scan_starts(fam: &SliceFamily, pl: &JointPolyline) -> Vec<[f64; 3]> {
    let xs: Vec<[f64; 3]> = pl.points.iter().zip(&pl.preimage).map(|(p, pre)| [pre[1], p[0], p[1]]).collect();
    let curv: Vec<f64> = xs.iter().map(|x| {
        let j = fam.jet(*x);
        j.g[2] / j.scale
    }).collect();
    let n = xs.len();
    let pairs = if pl.closed { n } else { n.saturating_sub(1) };
    (0..pairs)
        .filter(|&i| curv[i] * curv[(i + 1) % n] < 0.0)
        .map(|i| {
            let (a, b) = (xs[i], xs[(i + 1) % n]);
            let w = curv[i].abs() / (curv[i].abs() + curv[(i + 1) % n].abs());
            [a[0] + w * angle_diff(b[0], a[0]), a[1] + w * (b[1] - a[1]), a[2] + w * (b[2] - a[2])]
        })
        .collect()
}

struct SeedOutcome {
    starts: Vec<[f64; 3]>,
    diagnostics: Vec<CuspDiagnostic>,
    closed: bool,
}

fn trace_polyline(fam: &SliceFamily, pl: &JointPolyline, opts: &CuspOptions) -> SeedOutcome {
    let mut diagnostics = Vec::new();
    let Some(seed) = seed_of(fam, pl) else {
        diagnostics.push(CuspDiagnostic {
            code: "SEED_FAILURE".into(),
            message: format!("no usable seed on singular polyline from contour {}", pl.source),
            at: None,
        });
        return SeedOutcome { starts: vertex_scan_starts(fam, pl), diagnostics, closed: false };
    };
    let fwd = march(fam, seed, 1.0, opts);
    if fwd.closed {
        return SeedOutcome { starts: sign_change_starts(fam, &fwd.samples, true), diagnostics, closed: true };
    }
    let bwd = march(fam, seed, -1.0, opts);
    if bwd.closed {
        return SeedOutcome { starts: sign_change_starts(fam, &bwd.samples, true), diagnostics, closed: true };
    }
    // stitch the two open halves into one ordered walk through the seed
    let mut walk: Vec<LocusSample> = bwd.samples.iter().skip(1).rev().copied().collect();
    for s in walk.iter_mut() {
        s.t = [-s.t[0], -s.t[1], -s.t[2]];
    }
    walk.extend(fwd.samples.iter().copied());
    let mut starts = sign_change_starts(fam, &walk, false);
    if fwd.stalled || bwd.stalled {
        diagnostics.push(CuspDiagnostic {
            code: "TRACE_STALLED".into(),
            message: format!("continuation hit the step floor on contour {}; scanning polyline vertices", pl.source),
            at: Some(seed),
        });
        starts.extend(vertex_scan_starts(fam, pl));
    }
    SeedOutcome { starts, diagnostics, closed: false }
}

/// Finds the cusps of the slice with default options.
pub fn find_cusps(g: &Geometry, rho1: f64) -> Result<Vec<CuspPoint>> {
    Ok(find_cusps_with(g, rho1, &CuspOptions::default())?.cusps)
}

pub fn find_cusps_with(g: &Geometry, rho1: f64, opts: &CuspOptions) -> Result<CuspReport> {
    if !(rho1 > 0.0) {
        return Err(Error::InvalidRequest("rho1 must be positive".into()));
    }
    let fam = SliceFamily::new(g, rho1);
    let wc = workspace_singular_contour(g, rho1, opts.contour_grid);
    let curves = joint_slice_curves(g, &wc);
    let mut report = CuspReport { rho1, cusps: vec![], diagnostics: vec![], traced_loops: 0 };
    if curves.polylines.is_empty() {
        report.diagnostics.push(CuspDiagnostic {
            code: Error::SeedFailure.code().into(),
            message: Error::SeedFailure.to_string(),
            at: None,
        });
        return Ok(report);
    }
    let outcomes: Vec<SeedOutcome> = curves.polylines.par_iter().map(|pl| trace_polyline(&fam, pl, opts)).collect();
    let mut candidates = Vec::new();
    for o in outcomes {
        report.traced_loops += o.closed as usize;
        report.diagnostics.extend(o.diagnostics);
        candidates.extend(o.starts);
    }
    let certified: Vec<Candidate> = candidates.par_iter().map(|x| certify(&fam, g, *x, opts)).collect();
    let mut accepted = Vec::new();
    for c in certified {
        match c {
            Candidate::Accepted(p) => accepted.push(p),
            Candidate::Rejected(d) => report.diagnostics.push(d),
        }
    }
    report.cusps = merge(accepted, opts.merge_tol);
    Ok(report)
}

fn merge(mut cusps: Vec<CuspPoint>, tol: f64) -> Vec<CuspPoint> {
    let worst = |c: &CuspPoint| c.residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    cusps.sort_by(|a, b| worst(a).total_cmp(&worst(b)));
    let mut kept: Vec<CuspPoint> = Vec::new();
    for c in cusps {
        if !kept.iter().any(|k| (k.rho2 - c.rho2).hypot(k.rho3 - c.rho3) < tol) {
            kept.push(c);
        }
    }
    kept.sort_by(|a, b| a.rho2.total_cmp(&b.rho2).then(a.rho3.total_cmp(&b.rho3)));
    kept
}

/// Unit vector in `(rho2, rho3)` along the common tangent of the two fold
/// branches at `c`, pointing into the wedge where three solutions exist.
///
/// Along `a` with `grad G . a = 0` the local cubic is
/// `G''' s^3 / 6 + eps (grad G' . a) s`, which has three real roots iff the
/// two coefficients have opposite signs.
pub fn cusp_axis(g: &Geometry, c: &CuspPoint) -> [f64; 2] {
    let fam = SliceFamily::new(g, c.rho1);
    let j = fam.jet([c.theta1, c.rho2, c.rho3]);
    let a = [j.g_r3[0], -j.g_r2[0]];
    let n = a[0].hypot(a[1]);
    let a = [a[0] / n, a[1] / n];
    let lin = j.g_r2[1] * a[0] + j.g_r3[1] * a[1];
    if lin * j.g[3] > 0.0 {
        [-a[0], -a[1]]
    } else {
        a
    }
}

/// Cusps around which `polygon` (closed implicitly) has nonzero winding number.
pub fn cusps_in_region(cusps: &[CuspPoint], polygon: &[[f64; 2]]) -> Result<Vec<CuspPoint>> {
    Ok(cusps_with_winding(cusps, polygon)?.into_iter().map(|(c, _)| c).collect())
}

/// Like [`cusps_in_region`] but keeps the winding numbers.
pub fn cusps_with_winding(cusps: &[CuspPoint], polygon: &[[f64; 2]]) -> Result<Vec<(CuspPoint, i32)>> {
    let mut out = Vec::new();
    for c in cusps {
        let w = winding_number_with_tol(polygon, c.joint(), CUSP_BOUNDARY_TOL)?;
        if w != 0 {
            out.push((*c, w));
        }
    }
    Ok(out)
}
