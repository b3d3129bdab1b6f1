//! Direct kinematics through a univariate characteristic polynomial.
//!
//! For a fixed `theta1` both platform constraints `f2`, `f3` are affine in
//! `(cos alpha, sin alpha)`. Solving that 2x2 system by Cramer's rule and
//! imposing `cos^2 + sin^2 = 1` gives a trigonometric polynomial
//! `G(theta1) = N1^2 + N2^2 - D^2` of degree 3; the half-angle substitution
//! `t = tan(theta1 / 2)` turns it into the sextic `P(t) = (1 + t^2)^3 G`.
//! When `D` vanishes identically the roles of the two angles are swapped.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, AspectLabel, DEFAULT_TOL_SING};
use crate::poly::{Poly, TrigPoly};
use crate::scalar::{angle_diff, wrap_angle};
use crate::{Geometry, JointVector, Pose};

/// Two solutions closer than this in `(theta1, alpha)` are the same mode.
pub const DEDUP_TOL: f64 = 1e-6;
/// Roots closer than this (in the polynomial variable) flag a near-discriminant joint vector.
pub const ROOT_CLUSTER_TOL: f64 = 1e-5;
/// A complex root counts as real when `|im| < REAL_IMAG_TOL * (1 + |re|)`.
pub const REAL_IMAG_TOL: f64 = 1e-8;
/// Acceptance bound on the polished constraint residual.
pub const ACCEPT_RESIDUAL: f64 = 1e-7;

/// Angle removed by the linear elimination step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Eliminated {
    /// Polynomial in `tan(theta1 / 2)` (the regular route).
    Alpha,
    /// Fallback: polynomial in `tan(alpha / 2)`.
    Theta1,
}

/// Elimination pieces for one free angle: `G = N1^2 + N2^2 - D^2` with
/// `(cos, sin)` of the eliminated angle equal to `(N1, N2) / D`.
#[derive(Debug, Clone)]
pub struct Elimination {
    pub g: TrigPoly<f64>,
    pub d: TrigPoly<f64>,
    pub n1: TrigPoly<f64>,
    pub n2: TrigPoly<f64>,
}

/// Characteristic polynomial of the direct kinematics at one joint vector.
#[derive(Debug, Clone)]
pub struct CharPoly {
    /// Ascending coefficients in the half-angle tangent.
    pub coeffs: [f64; 7],
    pub joint: JointVector,
    /// Leading coefficients vanished: the half-angle point at infinity (angle pi) must be checked.
    pub degree_drop: bool,
    pub variable: Eliminated,
    pub elimination: Elimination,
}

impl CharPoly {
    pub fn poly(&self) -> Poly<f64> {
        Poly::new(self.coeffs.to_vec())
    }
}

fn eliminate(m: [[TrigPoly<f64>; 2]; 2], r: [TrigPoly<f64>; 2]) -> Elimination {
    let d = m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0]));
    let n1 = r[0].mul(&m[1][1]).sub(&r[1].mul(&m[0][1]));
    let n2 = m[0][0].mul(&r[1]).sub(&m[1][0].mul(&r[0]));
    let mut g = n1.mul(&n1).add(&n2.mul(&n2)).sub(&d.mul(&d));
    // the fourth harmonic cancels analytically
    g.trim(1e-13);
    Elimination { g, d, n1, n2 }
}

/// Linear system `M (cos alpha, sin alpha) = r` with `theta1` free; raw leg
/// lengths so the joint-independent parts can be isolated.
pub(crate) fn alpha_system_parts(g: &Geometry, rho1: f64, rho2: f64, rho3: f64) -> ([[TrigPoly<f64>; 2]; 2], [TrigPoly<f64>; 2]) {
    let [d1, _, d3] = g.sides();
    let (cb, sb) = g.cos_sin_beta();
    let a2x = g.a2x();
    let [a3x, a3y] = g.a3();
    let tp = TrigPoly::first_order;
    // u = B1 - A2, v = B1 - A3 as first-order trig polynomials in theta1
    let ux = tp(-a2x, rho1, 0.0);
    let uy = tp(0.0, 0.0, rho1);
    let vx = tp(-a3x, rho1, 0.0);
    let vy = tp(-a3y, 0.0, rho1);
    let m = [
        [ux.scale(2.0 * d1), uy.scale(2.0 * d1)],
        [vx.scale(cb).add(&vy.scale(sb)).scale(2.0 * d3), vy.scale(cb).sub(&vx.scale(sb)).scale(2.0 * d3)],
    ];
    // |u|^2 = rho1^2 + a2x^2 - 2 rho1 a2x cos, |v|^2 likewise
    let u2 = tp(rho1 * rho1 + a2x * a2x, -2.0 * rho1 * a2x, 0.0);
    let v2 = tp(rho1 * rho1 + a3x * a3x + a3y * a3y, -2.0 * rho1 * a3x, -2.0 * rho1 * a3y);
    let r = [
        TrigPoly::constant(rho2 * rho2 - d1 * d1).sub(&u2),
        TrigPoly::constant(rho3 * rho3 - d3 * d3).sub(&v2),
    ];
    (m, r)
}

fn alpha_system(g: &Geometry, q: &JointVector) -> Elimination {
    let (m, r) = alpha_system_parts(g, q.rho1(), q.rho2(), q.rho3());
    eliminate(m, r)
}

/// Linear system in `(cos theta1, sin theta1)` with `alpha` free.
fn theta_system(g: &Geometry, q: &JointVector) -> Elimination {
    let [rho1, rho2, rho3] = q.rho;
    let [d1, _, d3] = g.sides();
    let (cb, sb) = g.cos_sin_beta();
    let a2x = g.a2x();
    let [a3x, a3y] = g.a3();
    let tp = TrigPoly::first_order;
    // w2 = B2 - B1 - A2, w3 = B3 - B1 - A3 in alpha
    let w2x = tp(-a2x, d1, 0.0);
    let w2y = tp(0.0, 0.0, d1);
    let w3x = tp(-a3x, d3 * cb, -d3 * sb);
    let w3y = tp(-a3y, d3 * sb, d3 * cb);
    let m = [[w2x.scale(2.0 * rho1), w2y.scale(2.0 * rho1)], [w3x.scale(2.0 * rho1), w3y.scale(2.0 * rho1)]];
    let w2sq = w2x.mul(&w2x).add(&w2y.mul(&w2y));
    let w3sq = w3x.mul(&w3x).add(&w3y.mul(&w3y));
    let r = [
        TrigPoly::constant(rho2 * rho2 - rho1 * rho1).sub(&w2sq),
        TrigPoly::constant(rho3 * rho3 - rho1 * rho1).sub(&w3sq),
    ];
    eliminate(m, r)
}

fn to_charpoly(e: Elimination, q: &JointVector, variable: Eliminated) -> CharPoly {
    let mut g = e.g.clone();
    g.cos.resize(4, 0.0);
    g.sin.resize(4, 0.0);
    let p = g.to_half_angle();
    let mut coeffs = [0.0; 7];
    coeffs.copy_from_slice(&p.coeffs[..7]);
    let scale = p.max_abs_coeff();
    let degree_drop = scale == 0.0 || coeffs[6].abs() <= 1e-12 * scale;
    CharPoly { coeffs, joint: *q, degree_drop, variable, elimination: e }
}

fn is_identically_zero(t: &TrigPoly<f64>, reference: f64) -> bool {
    t.max_abs_coeff() <= 1e-12 * reference.max(f64::MIN_POSITIVE)
}

/// Characteristic polynomial in `tan(theta1 / 2)`.
pub fn build_charpoly(g: &Geometry, q: &JointVector) -> Result<CharPoly> {
    let e = alpha_system(g, q);
    let reference = e.n1.max_abs_coeff().max(e.n2.max_abs_coeff()).sqrt() * q.rho.iter().fold(1.0f64, |m, r| m.max(*r));
    if is_identically_zero(&e.d, reference) {
        return Err(Error::EliminationSingular);
    }
    Ok(to_charpoly(e, q, Eliminated::Alpha))
}

/// Fallback polynomial in `tan(alpha / 2)`, used when [`build_charpoly`]
/// reports an identically singular elimination.
pub fn build_charpoly_in_alpha(g: &Geometry, q: &JointVector) -> Result<CharPoly> {
    let e = theta_system(g, q);
    let reference = e.n1.max_abs_coeff().max(e.n2.max_abs_coeff()).sqrt() * q.rho.iter().fold(1.0f64, |m, r| m.max(*r));
    if is_identically_zero(&e.d, reference) {
        return Err(Error::EliminationSingular);
    }
    Ok(to_charpoly(e, q, Eliminated::Theta1))
}

/// Jacobian of `(f2, f3)` with respect to `(theta1, alpha)` at fixed joints.
pub fn slice_jacobian(g: &Geometry, p: &Pose) -> [[f64; 2]; 2] {
    let b = p.platform(g);
    let legs = p.legs(g);
    let (st, ct) = p.theta1.sin_cos();
    let db1 = [-p.rho1 * st, p.rho1 * ct];
    let mut j = [[0.0; 2]; 2];
    for (row, i) in [1usize, 2].into_iter().enumerate() {
        let r = [b[i][0] - b[0][0], b[i][1] - b[0][1]];
        let w = legs[i];
        j[row][0] = 2.0 * (w[0] * db1[0] + w[1] * db1[1]);
        j[row][1] = 2.0 * (w[0] * -r[1] + w[1] * r[0]);
    }
    j
}

/// Determinant of [`slice_jacobian`] divided by the product of its row norms.
pub fn normalized_slice_det(g: &Geometry, p: &Pose) -> f64 {
    let j = slice_jacobian(g, p);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let n0 = j[0][0].hypot(j[0][1]);
    let n1 = j[1][0].hypot(j[1][1]);
    if n0 == 0.0 || n1 == 0.0 {
        0.0
    } else {
        det / (n0 * n1)
    }
}

fn slice_residual(g: &Geometry, p: &Pose, q: &JointVector) -> [f64; 2] {
    let f = geometry::constraint_residual(g, p, q);
    [f[1], f[2]]
}

/// Newton on `(f2, f3)` in `(theta1, alpha)`; returns the polished pose and its residual.
pub fn polish(g: &Geometry, start: Pose, q: &JointVector, max_iter: usize) -> (Pose, f64) {
    let mut p = Pose::new(q.rho1(), start.theta1, start.alpha);
    let mut f = slice_residual(g, &p, q);
    let mut res = f[0].abs().max(f[1].abs());
    for _ in 0..max_iter {
        if res < 1e-13 * (1.0 + q.rho2() * q.rho2() + q.rho3() * q.rho3()) {
            break;
        }
        let j = slice_jacobian(g, &p);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let mut dt = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let mut da = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        let step = dt.hypot(da);
        if step > 0.2 {
            dt *= 0.2 / step;
            da *= 0.2 / step;
        }
        let cand = Pose::new(q.rho1(), p.theta1 - dt, p.alpha - da);
        let fc = slice_residual(g, &cand, q);
        let rc = fc[0].abs().max(fc[1].abs());
        if rc >= res && step < 1e-15 {
            break;
        }
        if rc > 4.0 * res && res < 1e-6 {
            break;
        }
        p = cand;
        f = fc;
        res = rc;
    }
    (p, res)
}

/// Independent check on `solve_dk`: scans an `n`-by-`n` grid over the
/// `(theta1, alpha)` torus for cells where both leg-2 and leg-3 constraints
/// change sign, then polishes each with Newton. No polynomial is involved.
pub fn brute_force_dk(g: &Geometry, q: &JointVector, n: usize) -> Vec<Pose> {
    let h = 2.0 * PI / n as f64;
    let at = |i: usize, j: usize| -> [f64; 2] {
        let p = Pose::new(q.rho1(), -PI + (i % n) as f64 * h, -PI + (j % n) as f64 * h);
        slice_residual(g, &p, q)
    };
    let grid: Vec<[f64; 2]> = (0..n * n).map(|k| at(k % n, k / n)).collect();
    let f = |i: usize, j: usize| grid[(j % n) * n + (i % n)];
    let scale = 1.0 + q.rho2() * q.rho2() + q.rho3() * q.rho3();
    let mut out: Vec<Pose> = vec![];
    for j in 0..n {
        for i in 0..n {
            let c = [f(i, j), f(i + 1, j), f(i, j + 1), f(i + 1, j + 1)];
            let straddles = |k: usize| c.iter().any(|v| v[k] <= 0.0) && c.iter().any(|v| v[k] >= 0.0);
            if !(straddles(0) && straddles(1)) {
                continue;
            }
            let start = Pose::new(q.rho1(), -PI + (i as f64 + 0.5) * h, -PI + (j as f64 + 0.5) * h);
            let (p, res) = polish(g, start, q, 60);
            if res > 1e-10 * scale || pose_distance(&p, &start) > 3.0 * h {
                continue;
            }
            let p = Pose::new(p.rho1, wrap_angle(p.theta1), wrap_angle(p.alpha));
            if out.iter().all(|o| pose_distance(o, &p) > DEDUP_TOL) {
                out.push(p);
            }
        }
    }
    out.sort_by(|a, b| a.theta1.total_cmp(&b.theta1));
    out
}

/// One assembly mode with its aspect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub pose: Pose,
    pub aspect: AspectLabel,
    /// `S / scale` at the pose; positive in aspect 1.
    pub singularity: f64,
    pub residual: f64,
}

/// All assembly modes at one joint vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub joint: JointVector,
    /// Aspect-1 solutions first, then aspect 2, then singular; each group by ascending `theta1`.
    pub solutions: Vec<Solution>,
    pub residual: f64,
    pub near_discriminant: bool,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn count_in(&self, aspect: AspectLabel) -> usize {
        self.solutions.iter().filter(|s| s.aspect == aspect).count()
    }

    /// Index of the solution nearest to `p` in the `(theta1, alpha)` torus metric.
    pub fn nearest(&self, p: &Pose) -> Option<(usize, f64)> {
        self.solutions
            .iter()
            .enumerate()
            .map(|(i, s)| (i, pose_distance(&s.pose, p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Wrap-aware Euclidean distance in `(theta1, alpha)`.
pub fn pose_distance(a: &Pose, b: &Pose) -> f64 {
    angle_diff(a.theta1, b.theta1).hypot(angle_diff(a.alpha, b.alpha))
}

/// Solver knobs; defaults match the documented tolerances.
#[derive(Debug, Clone, Copy)]
pub struct DkOptions {
    pub tol_sing: f64,
    pub dedup_tol: f64,
    pub root_cluster_tol: f64,
}

impl Default for DkOptions {
    fn default() -> Self {
        DkOptions { tol_sing: DEFAULT_TOL_SING, dedup_tol: DEDUP_TOL, root_cluster_tol: ROOT_CLUSTER_TOL }
    }
}

pub fn solve_dk(g: &Geometry, q: &JointVector) -> Result<SolutionSet> {
    solve_dk_with(g, q, &DkOptions::default())
}

pub fn solve_dk_with(g: &Geometry, q: &JointVector, opts: &DkOptions) -> Result<SolutionSet> {
    let cp = match build_charpoly(g, q) {
        Ok(cp) => cp,
        Err(Error::EliminationSingular) => build_charpoly_in_alpha(g, q)?,
        Err(e) => return Err(e),
    };
    let poly = cp.poly();
    let roots = poly.complex_roots();
    let mut near_discriminant = false;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            let (a, b) = (roots[i], roots[j]);
            if (a.0 - b.0).hypot(a.1 - b.1) < opts.root_cluster_tol * (1.0 + a.0.hypot(a.1)) {
                near_discriminant = true;
            }
        }
    }
    let mut angles: Vec<f64> = roots
        .iter()
        .filter(|(re, im)| im.abs() < REAL_IMAG_TOL * (1.0 + re.abs()))
        .map(|(re, _)| 2.0 * re.atan())
        .collect();
    if cp.degree_drop {
        angles.push(std::f64::consts::PI);
    }

    let e = &cp.elimination;
    let gd = e.g.derivative();
    let mut candidates: Vec<Pose> = Vec::new();
    for &a0 in &angles {
        // a couple of Newton steps on G in the free angle
        let mut a = a0;
        for _ in 0..3 {
            let (v, dv) = (e.g.eval(a), gd.eval(a));
            if dv == 0.0 || !dv.is_finite() {
                break;
            }
            let step = v / dv;
            if step.abs() > 1e-3 {
                break;
            }
            a -= step;
        }
        let d = e.d.eval(a);
        let dscale = e.d.max_abs_coeff();
        let mut others = Vec::new();
        if d.abs() > 1e-9 * dscale {
            others.push(e.n2.eval(a).atan2(e.n1.eval(a)) + if d < 0.0 { std::f64::consts::PI } else { 0.0 });
        }
        if d.abs() < 1e-3 * dscale {
            others.extend(circle_candidates(g, q, a, cp.variable));
        }
        for o in others {
            let pose = match cp.variable {
                Eliminated::Alpha => Pose::new(q.rho1(), a, o),
                Eliminated::Theta1 => Pose::new(q.rho1(), o, a),
            };
            candidates.push(pose);
        }
    }

    let scale = 1.0 + q.rho.iter().map(|r| r * r).fold(0.0, f64::max);
    let mut solutions: Vec<Solution> = Vec::new();
    for c in candidates {
        let (p, res) = polish(g, c, q, 30);
        if !(res < ACCEPT_RESIDUAL * (scale / 1000.0).max(1.0)) {
            continue;
        }
        if solutions.iter().any(|s| pose_distance(&s.pose, &p) < opts.dedup_tol) {
            continue;
        }
        let Ok(sv) = geometry::signed_singularity(g, &p) else { continue };
        solutions.push(Solution {
            pose: p,
            aspect: AspectLabel::from_value(sv, opts.tol_sing),
            singularity: sv,
            residual: res,
        });
    }
    solutions.sort_by(|a, b| {
        let rank = |s: &Solution| match s.aspect {
            AspectLabel::Aspect1 => 0,
            AspectLabel::Aspect2 => 1,
            AspectLabel::Singular => 2,
        };
        rank(a).cmp(&rank(b)).then(a.pose.theta1.total_cmp(&b.pose.theta1)).then(a.pose.alpha.total_cmp(&b.pose.alpha))
    });
    let residual = solutions.iter().fold(0.0f64, |m, s| m.max(s.residual));
    Ok(SolutionSet { joint: *q, solutions, residual, near_discriminant })
}

/// Candidates for the eliminated angle from the first platform constraint
/// alone: a circle/circle intersection, two values at most.
fn circle_candidates(g: &Geometry, q: &JointVector, free: f64, variable: Eliminated) -> Vec<f64> {
    let [rho1, rho2, _] = q.rho;
    let [d1, _, _] = g.sides();
    let (centre, radius_mov) = match variable {
        // B2 = B1 + d1 e(alpha); B1 fixed, alpha unknown
        Eliminated::Alpha => ([rho1 * free.cos() - g.a2x(), rho1 * free.sin()], d1),
        // B2 = rho1 e(theta) + d1 e(alpha); alpha fixed, theta unknown
        Eliminated::Theta1 => ([d1 * free.cos() - g.a2x(), d1 * free.sin()], rho1),
    };
    let l = centre[0].hypot(centre[1]);
    if l == 0.0 {
        return vec![];
    }
    let k = (rho2 * rho2 - l * l - radius_mov * radius_mov) / (2.0 * radius_mov * l);
    if k.abs() > 1.0 + 1e-9 {
        return vec![];
    }
    let phi = centre[1].atan2(centre[0]);
    let a = k.clamp(-1.0, 1.0).acos();
    vec![wrap_angle(phi + a), wrap_angle(phi - a)]
}

/// Solutions of one aspect, ordered by ascending `theta1`.
pub fn solutions_in_aspect(s: &SolutionSet, aspect: AspectLabel) -> Vec<Pose> {
    let mut out: Vec<Pose> = s.solutions.iter().filter(|x| x.aspect == aspect).map(|x| x.pose).collect();
    out.sort_by(|a, b| a.theta1.total_cmp(&b.theta1));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{constraint_residual, inverse_kinematics};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn canon() -> Geometry {
        let g = Geometry::canonical();
        g.with_sigma(geometry::calibrate_sigma(&g)).unwrap()
    }

    fn jv(a: f64, b: f64, c: f64) -> JointVector {
        JointVector::new(a, b, c).unwrap()
    }

    #[test]
    fn grid_scan_finds_the_same_six() {
        let g = Geometry::canonical();
        let q = JointVector::new(17.0, 19.0, 17.0).unwrap();
        let set = solve_dk(&g, &q).unwrap();
        let brute = brute_force_dk(&g, &q, 256);
        assert_eq!(brute.len(), 6);
        for p in &brute {
            let (_, d) = set.nearest(p).unwrap();
            assert!(d < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn six_modes_at_reference_joint() {
        let g = canon();
        let s = solve_dk(&g, &jv(17.0, 19.0, 17.0)).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.count_in(AspectLabel::Aspect1), 3);
        assert_eq!(s.count_in(AspectLabel::Aspect2), 3);
        assert!(s.residual < 1e-9, "residual {}", s.residual);
        for sol in &s.solutions {
            let f = constraint_residual(&g, &sol.pose, &s.joint);
            assert!(f.iter().all(|v| v.abs() < 1e-9));
            let back = inverse_kinematics(&g, &sol.pose).unwrap();
            for k in 0..3 {
                assert!((back.rho[k] - s.joint.rho[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sextic_has_six_real_roots() {
        let cp = build_charpoly(&canon(), &jv(17.0, 19.0, 17.0)).unwrap();
        assert_eq!(cp.variable, Eliminated::Alpha);
        assert!(!cp.degree_drop);
        assert_eq!(cp.poly().real_roots(REAL_IMAG_TOL).len(), 6);
    }

    #[test]
    fn unreachable_joint_has_no_modes() {
        let g = canon();
        assert!(g.reach_bound(17.0) < 100.0 + 1.0);
        let cp = build_charpoly(&g, &jv(17.0, 100.0, 17.0)).unwrap();
        assert!(cp.poly().real_roots(REAL_IMAG_TOL).is_empty());
        assert!(solve_dk(&g, &jv(17.0, 100.0, 17.0)).unwrap().is_empty());
    }

    #[test]
    fn charpoly_vanishes_on_assembled_pose() {
        let g = canon();
        let p = Pose::new(17.0, 0.8, -2.1);
        let q = inverse_kinematics(&g, &p).unwrap();
        let cp = build_charpoly(&g, &q).unwrap();
        let t = (p.theta1 / 2.0).tan();
        let val = cp.poly().normalized().eval(t);
        assert!(val.abs() < 1e-10, "{val}");
    }

    #[test]
    fn random_pose_is_recovered() {
        let g = canon();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut n = 0;
        while n < 200 {
            let p = Pose::new(rng.random_range(5.0..30.0), rng.random_range(-PI..PI), rng.random_range(-PI..PI));
            if geometry::signed_singularity(&g, &p).unwrap().abs() < 1e-3 {
                continue;
            }
            let q = inverse_kinematics(&g, &p).unwrap();
            let s = solve_dk(&g, &q).unwrap();
            let (_, d) = s.nearest(&p).unwrap();
            assert!(d < 1e-8, "pose {p:?} missed by {d}");
            assert!(s.len() % 2 == 0 && s.len() <= 6);
            n += 1;
        }
    }

    #[test]
    fn theta_pi_root_found() {
        let g = canon();
        // pose exactly at theta1 = pi makes the leading coefficient vanish
        let p = Pose::new(12.0, PI, 0.4);
        let q = inverse_kinematics(&g, &p).unwrap();
        let s = solve_dk(&g, &q).unwrap();
        let (_, d) = s.nearest(&p).unwrap();
        assert!(d < 1e-8);
    }

    #[test]
    fn alpha_route_agrees_with_theta_route() {
        let g = canon();
        let q = jv(17.0, 19.0, 17.0);
        let cp = build_charpoly_in_alpha(&g, &q).unwrap();
        let e = &cp.elimination;
        let reference = solve_dk(&g, &q).unwrap();
        // every reference alpha is a root of the alpha-route eliminant
        let scale = e.g.max_abs_coeff();
        for sol in &reference.solutions {
            assert!(e.g.eval(sol.pose.alpha).abs() < 1e-9 * scale);
        }
        assert_eq!(cp.poly().real_roots(REAL_IMAG_TOL).len(), 6);
    }

    #[test]
    fn aspect_filter_sorted() {
        let g = canon();
        let s = solve_dk(&g, &jv(17.0, 19.0, 17.0)).unwrap();
        let a1 = solutions_in_aspect(&s, AspectLabel::Aspect1);
        assert_eq!(a1.len(), 3);
        assert!(a1.windows(2).all(|w| w[0].theta1 < w[1].theta1));
        let empty = SolutionSet { joint: s.joint, solutions: vec![], residual: 0.0, near_discriminant: false };
        assert!(solutions_in_aspect(&empty, AspectLabel::Aspect1).is_empty());
    }

    #[test]
    fn slice_det_sign_tracks_aspect() {
        let g = canon();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let p = Pose::new(17.0, rng.random_range(-PI..PI), rng.random_range(-PI..PI));
            let s = geometry::signed_singularity(&g, &p).unwrap();
            if s.abs() < 1e-6 {
                continue;
            }
            assert_eq!(normalized_slice_det(&g, &p) > 0.0, g.sigma() * s > 0.0);
        }
    }
}
