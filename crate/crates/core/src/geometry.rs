//! Manipulator model: base anchors, platform triangle, poses, inverse
//! kinematics, the loop-closure constraints and the singularity function.
//!
//! The base frame is centred on `A1`, with `A2` on the positive x-axis. A pose
//! is given in cylindrical form `(rho1, theta1, alpha)`: `B1` sits at distance
//! `rho1` from `A1` in direction `theta1`, and `alpha` is the direction of the
//! platform side `B1 -> B2`. `B3` lies to the left of that side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Real};

/// Default threshold on the normalized singularity value below which a pose is
/// labelled singular.
pub const DEFAULT_TOL_SING: f64 = 1e-9;

pub type Point2<T> = [T; 2];

/// Base anchor layout and platform side lengths of one manipulator.
///
/// Side `d1 = |B1B2|`, `d2 = |B2B3|`, `d3 = |B3B1|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry<T> {
    a2x: T,
    a3x: T,
    a3y: T,
    d1: T,
    d2: T,
    d3: T,
    beta: T,
    cos_beta: T,
    sin_beta: T,
    sigma: T,
}

impl<T: Real> Geometry<T> {
    pub fn new(a2x: T, a3: Point2<T>, d: [T; 3]) -> Result<Self> {
        let [d1, d2, d3] = d;
        if !(a2x > T::zero()) {
            return Err(Error::InvalidGeometry("A2 must lie on the positive x-axis".into()));
        }
        if !a3.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGeometry("A3 must be finite".into()));
        }
        if !d.iter().all(|v| v.is_finite() && *v > T::zero()) {
            return Err(Error::InvalidGeometry("platform sides must be positive".into()));
        }
        if !(d1 < d2 + d3 && d2 < d1 + d3 && d3 < d1 + d2) {
            return Err(Error::InvalidGeometry(
                "platform sides violate the strict triangle inequality".into(),
            ));
        }
        let two = T::lit(2.0);
        let cos_beta = (d1 * d1 + d3 * d3 - d2 * d2) / (two * d1 * d3);
        let beta = cos_beta.acos();
        Ok(Geometry {
            a2x,
            a3x: a3[0],
            a3y: a3[1],
            d1,
            d2,
            d3,
            beta,
            cos_beta,
            sin_beta: beta.sin(),
            sigma: T::one(),
        })
    }

    /// Returns a copy carrying the sign that maps `S` onto `det(A)`.
    pub fn with_sigma(mut self, sigma: T) -> Result<Self> {
        if sigma == T::one() || sigma == -T::one() {
            self.sigma = sigma;
            Ok(self)
        } else {
            Err(Error::InvalidGeometry("sigma must be +1 or -1".into()))
        }
    }

    pub fn a2x(&self) -> T {
        self.a2x
    }

    pub fn a3(&self) -> Point2<T> {
        [self.a3x, self.a3y]
    }

    pub fn anchors(&self) -> [Point2<T>; 3] {
        [[T::zero(), T::zero()], [self.a2x, T::zero()], [self.a3x, self.a3y]]
    }

    pub fn sides(&self) -> [T; 3] {
        [self.d1, self.d2, self.d3]
    }

    /// Interior angle of the platform at `B1`.
    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn cos_sin_beta(&self) -> (T, T) {
        (self.cos_beta, self.sin_beta)
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// Same geometry with `sigma` chosen so that `sigma * S` has the sign of `det(A)`.
    pub fn calibrated(self) -> Self {
        let sigma = calibrate_sigma(&self);
        self.with_sigma(sigma).expect("calibrated sign is +-1")
    }

    /// Scale used to make the singularity value dimensionless.
    pub fn singularity_scale(&self) -> T {
        self.a2x + self.a3x.hypot(self.a3y)
    }

    /// Upper bound on any reachable `rho2` or `rho3` for a given `rho1`.
    pub fn reach_bound(&self, rho1: T) -> T {
        let r2 = rho1 + self.d1 + self.a2x;
        let r3 = rho1 + self.d3 + self.a3x.hypot(self.a3y);
        r2.max(r3)
    }
}

impl Geometry<f64> {
    /// The reference manipulator with its `S`/`det(A)` sign calibrated.
    pub fn canonical() -> Self {
        Geometry::new(15.91, [0.0, 10.0], [17.04, 16.54, 20.84]).expect("canonical geometry is valid").calibrated()
    }
}

/// Platform configuration `(rho1, theta1, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub rho1: T,
    pub theta1: T,
    pub alpha: T,
}

impl<T: Real> Pose<T> {
    /// Builds a pose with both angles reduced to (-pi, pi].
    pub fn new(rho1: T, theta1: T, alpha: T) -> Self {
        Pose { rho1, theta1: wrap_angle(theta1), alpha: wrap_angle(alpha) }
    }

    /// Platform vertices `B1, B2, B3`.
    pub fn platform(&self, g: &Geometry<T>) -> [Point2<T>; 3] {
        let (st, ct) = self.theta1.sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let b1 = [self.rho1 * ct, self.rho1 * st];
        let b2 = [b1[0] + g.d1 * ca, b1[1] + g.d1 * sa];
        // direction of alpha + beta
        let c3 = ca * g.cos_beta - sa * g.sin_beta;
        let s3 = sa * g.cos_beta + ca * g.sin_beta;
        let b3 = [b1[0] + g.d3 * c3, b1[1] + g.d3 * s3];
        [b1, b2, b3]
    }

    /// Leg vectors `B_i - A_i`.
    pub fn legs(&self, g: &Geometry<T>) -> [Point2<T>; 3] {
        let b = self.platform(g);
        let a = g.anchors();
        [0, 1, 2].map(|i| [b[i][0] - a[i][0], b[i][1] - a[i][1]])
    }
}

/// Actuated leg lengths `(rho1, rho2, rho3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector<T> {
    pub rho: [T; 3],
}

impl<T: Real> JointVector<T> {
    pub fn new(rho1: T, rho2: T, rho3: T) -> Result<Self> {
        let rho = [rho1, rho2, rho3];
        if rho.iter().all(|r| r.is_finite() && *r > T::zero()) {
            Ok(JointVector { rho })
        } else {
            Err(Error::InvalidJoint)
        }
    }

    pub fn rho1(&self) -> T {
        self.rho[0]
    }
    pub fn rho2(&self) -> T {
        self.rho[1]
    }
    pub fn rho3(&self) -> T {
        self.rho[2]
    }
}

/// Which side of the singularity locus a pose lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AspectLabel {
    #[serde(rename = "ASPECT_1")]
    Aspect1,
    #[serde(rename = "ASPECT_2")]
    Aspect2,
    #[serde(rename = "SINGULAR")]
    Singular,
}

impl AspectLabel {
    /// 1, 2, or 0 for singular.
    pub fn number(self) -> u8 {
        match self {
            AspectLabel::Aspect1 => 1,
            AspectLabel::Aspect2 => 2,
            AspectLabel::Singular => 0,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(AspectLabel::Aspect1),
            2 => Some(AspectLabel::Aspect2),
            0 => Some(AspectLabel::Singular),
            _ => None,
        }
    }

    pub fn from_value<T: Real>(signed_s: T, tol: T) -> Self {
        if signed_s > tol {
            AspectLabel::Aspect1
        } else if signed_s < -tol {
            AspectLabel::Aspect2
        } else {
            AspectLabel::Singular
        }
    }
}

/// Velocity-model matrices: `A t + B qdot = 0` with `t = (cx', cy', omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianPair<T> {
    /// Rows are the gradients of `f_i` with respect to `(x, y, alpha)` of `B1`.
    pub a_mat: [[T; 3]; 3],
    /// `diag(-2 rho_i)`.
    pub b_mat: [[T; 3]; 3],
}

impl<T: Real> JacobianPair<T> {
    pub fn det_a(&self) -> T {
        det3(&self.a_mat)
    }

    /// Platform twist `(cx', cy', omega)` produced by joint rates `qdot`.
    pub fn twist(&self, qdot: [T; 3]) -> Option<[T; 3]> {
        let rhs = [0, 1, 2].map(|i| -(0..3).fold(T::zero(), |acc, j| acc + self.b_mat[i][j] * qdot[j]));
        solve3(&self.a_mat, rhs)
    }
}

/// Line through `point` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegLine<T> {
    pub point: Point2<T>,
    pub direction: Point2<T>,
}

impl<T: Real> LegLine<T> {
    /// Normalized planar line coordinates `(u_x, u_y, p x u)`.
    pub fn plucker(&self) -> [T; 3] {
        let [ux, uy] = self.direction;
        let [px, py] = self.point;
        [ux, uy, px * uy - py * ux]
    }

    /// Intersection with another line, `None` when parallel.
    pub fn intersect(&self, other: &LegLine<T>) -> Option<Point2<T>> {
        let [ux, uy] = self.direction;
        let [vx, vy] = other.direction;
        let den = ux * vy - uy * vx;
        if den.abs() < T::epsilon() {
            return None;
        }
        let wx = other.point[0] - self.point[0];
        let wy = other.point[1] - self.point[1];
        let s = (wx * vy - wy * vx) / den;
        Some([self.point[0] + s * ux, self.point[1] + s * uy])
    }
}

/// Determinant of the three normalized line-coordinate rows; zero exactly
/// when the lines are concurrent or all parallel.
pub fn concurrency_determinant<T: Real>(lines: &[LegLine<T>; 3]) -> T {
    det3(&lines.map(|l| l.plucker()))
}

pub fn inverse_kinematics<T: Real>(g: &Geometry<T>, p: &Pose<T>) -> Result<JointVector<T>> {
    let legs = p.legs(g);
    let rho2 = legs[1][0].hypot(legs[1][1]);
    let rho3 = legs[2][0].hypot(legs[2][1]);
    let zero = degenerate_length(g, p);
    if rho2 <= zero {
        return Err(Error::DegenerateLeg { leg: 2 });
    }
    if rho3 <= zero {
        return Err(Error::DegenerateLeg { leg: 3 });
    }
    JointVector::new(p.rho1, rho2, rho3)
}

/// `f_i = |B_i - A_i|^2 - rho_i^2`.
pub fn constraint_residual<T: Real>(g: &Geometry<T>, p: &Pose<T>, q: &JointVector<T>) -> [T; 3] {
    let legs = p.legs(g);
    [0, 1, 2].map(|i| legs[i][0] * legs[i][0] + legs[i][1] * legs[i][1] - q.rho[i] * q.rho[i])
}

/// Leg directions `theta1, theta2, theta3`.
pub fn leg_angles<T: Real>(g: &Geometry<T>, p: &Pose<T>) -> Result<[T; 3]> {
    let legs = p.legs(g);
    let zero = degenerate_length(g, p);
    for (i, leg) in legs.iter().enumerate().skip(1) {
        if leg[0].hypot(leg[1]) <= zero {
            return Err(Error::DegenerateLeg { leg: i + 1 });
        }
    }
    Ok([p.theta1, legs[1][1].atan2(legs[1][0]), legs[2][1].atan2(legs[2][0])])
}

/// Raw singularity value
/// `S = A2x sin t2 sin(t3 - t1) + (A3x sin t3 - A3y cos t3) sin(t1 - t2)`.
pub fn singularity_value<T: Real>(g: &Geometry<T>, p: &Pose<T>) -> Result<T> {
    let [t1, t2, t3] = leg_angles(g, p)?;
    Ok(g.a2x * t2.sin() * (t3 - t1).sin() + (g.a3x * t3.sin() - g.a3y * t3.cos()) * (t1 - t2).sin())
}

/// `S / scale`: dimensionless and positive in the first aspect. Its sign
/// times `sigma` is the sign of `det(A)`.
pub fn signed_singularity<T: Real>(g: &Geometry<T>, p: &Pose<T>) -> Result<T> {
    Ok(singularity_value(g, p)? / g.singularity_scale())
}

pub fn aspect_of<T: Real>(g: &Geometry<T>, p: &Pose<T>, tol_sing: T) -> Result<AspectLabel> {
    Ok(AspectLabel::from_value(signed_singularity(g, p)?, tol_sing))
}

pub fn jacobian_pair<T: Real>(g: &Geometry<T>, p: &Pose<T>, q: &JointVector<T>) -> JacobianPair<T> {
    let two = T::lit(2.0);
    let b = p.platform(g);
    let legs = p.legs(g);
    let mut a_mat = [[T::zero(); 3]; 3];
    for i in 0..3 {
        // d(B_i)/d(alpha) = perp(B_i - B1)
        let r = [b[i][0] - b[0][0], b[i][1] - b[0][1]];
        let dalpha = legs[i][0] * (-r[1]) + legs[i][1] * r[0];
        a_mat[i] = [two * legs[i][0], two * legs[i][1], two * dalpha];
    }
    let mut b_mat = [[T::zero(); 3]; 3];
    for i in 0..3 {
        b_mat[i][i] = -two * q.rho[i];
    }
    JacobianPair { a_mat, b_mat }
}

pub fn leg_lines<T: Real>(g: &Geometry<T>, p: &Pose<T>) -> Result<[LegLine<T>; 3]> {
    let angles = leg_angles(g, p)?;
    let anchors = g.anchors();
    Ok([0, 1, 2].map(|i| LegLine { point: anchors[i], direction: [angles[i].cos(), angles[i].sin()] }))
}

/// Finds the sign linking `S` and `det(A)` by majority over a deterministic
/// sweep of non-singular poses.
pub fn calibrate_sigma<T: Real>(g: &Geometry<T>) -> T {
    let mut agree = 0usize;
    let mut disagree = 0usize;
    let n = 24;
    let two_pi = T::PI() + T::PI();
    for k in 1..=3 {
        let rho1 = g.a2x * T::lit(k as f64 * 0.6);
        for i in 0..n {
            for j in 0..n {
                let th = two_pi * T::lit(i as f64 / n as f64);
                let al = two_pi * T::lit((j as f64 + 0.37) / n as f64);
                let p = Pose::new(rho1, th, al);
                let Ok(q) = inverse_kinematics(g, &p) else { continue };
                let Ok(s) = singularity_value(g, &p) else { continue };
                let d = jacobian_pair(g, &p, &q).det_a();
                if s.abs() < T::lit(1e-6) * g.singularity_scale() {
                    continue;
                }
                if (s > T::zero()) == (d > T::zero()) {
                    agree += 1;
                } else {
                    disagree += 1;
                }
            }
        }
    }
    if agree >= disagree {
        T::one()
    } else {
        -T::one()
    }
}

/// Leg length treated as zero: a few ulps of the overall layout size.
fn degenerate_length<T: Real>(g: &Geometry<T>, p: &Pose<T>) -> T {
    T::lit(16.0) * T::epsilon() * (p.rho1.abs() + g.d1 + g.d3 + g.singularity_scale())
}

pub(crate) fn det3<T: Real>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn solve3<T: Real>(m: &[[T; 3]; 3], rhs: [T; 3]) -> Option<[T; 3]> {
    let d = det3(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let mut out = [T::zero(); 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut mc = *m;
        for r in 0..3 {
            mc[r][c] = rhs[r];
        }
        *slot = det3(&mc) / d;
    }
    Some(out)
}
