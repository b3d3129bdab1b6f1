//! Univariate polynomials and trigonometric polynomials.

use nalgebra::DMatrix;

use crate::scalar::Real;

/// Dense polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    pub coeffs: Vec<T>,
}

impl<T: Real> Poly<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Poly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * T::lit(k as f64))
            .collect();
        Poly { coeffs }
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    /// Copy scaled so the largest coefficient has unit magnitude.
    pub fn normalized(&self) -> Self {
        let m = self.max_abs_coeff();
        if m == T::zero() {
            return self.clone();
        }
        Poly { coeffs: self.coeffs.iter().map(|&c| c / m).collect() }
    }

    /// Drops leading coefficients whose magnitude is below `rel_tol` times the
    /// largest one. Returns the number of coefficients removed.
    pub fn trim(&mut self, rel_tol: T) -> usize {
        let m = self.max_abs_coeff();
        let mut removed = 0;
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() <= rel_tol * m) {
            self.coeffs.pop();
            removed += 1;
        }
        removed
    }

    pub fn mul(&self, other: &Poly<T>) -> Poly<T> {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly { coeffs: vec![] };
        }
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j] + a * b;
            }
        }
        Poly { coeffs: out }
    }

    pub fn add(&self, other: &Poly<T>) -> Poly<T> {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(T::zero()) + other.coeffs.get(k).copied().unwrap_or(T::zero())
            })
            .collect();
        Poly { coeffs }
    }

    pub fn scale(&self, s: T) -> Poly<T> {
        Poly { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }
}

/// A complex root as `(re, im)`.
pub type ComplexRoot = (f64, f64);

impl Poly<f64> {
    /// All complex roots, from the eigenvalues of the companion matrix of the
    /// normalized polynomial.
    pub fn complex_roots(&self) -> Vec<ComplexRoot> {
        let mut p = self.normalized();
        p.trim(0.0);
        let n = p.degree();
        if n == 0 {
            return vec![];
        }
        let lead = p.coeffs[n];
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -p.coeffs[i] / lead;
        }
        m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
    }

    /// Roots whose imaginary part is below `imag_tol * (1 + |re|)`, as reals.
    pub fn real_roots(&self, imag_tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .complex_roots()
            .into_iter()
            .filter(|(re, im)| im.abs() < imag_tol * (1.0 + re.abs()))
            .map(|(re, _)| re)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

/// Trigonometric polynomial `a0 + sum_k (a_k cos k x + b_k sin k x)`.
///
/// `cos[0]` holds `a0`; `sin[0]` is unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly<T> {
    pub cos: Vec<T>,
    pub sin: Vec<T>,
}

impl<T: Real> TrigPoly<T> {
    pub fn constant(c: T) -> Self {
        TrigPoly { cos: vec![c], sin: vec![T::zero()] }
    }

    /// `c + a cos x + b sin x`.
    pub fn first_order(c: T, a: T, b: T) -> Self {
        TrigPoly { cos: vec![c, a], sin: vec![T::zero(), b] }
    }

    pub fn degree(&self) -> usize {
        self.cos.len().saturating_sub(1)
    }

    pub fn eval(&self, x: T) -> T {
        let mut acc = self.cos[0];
        for k in 1..self.cos.len() {
            let (s, c) = (T::lit(k as f64) * x).sin_cos();
            acc = acc + self.cos[k] * c + self.sin[k] * s;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let n = self.cos.len();
        let mut cos = vec![T::zero(); n];
        let mut sin = vec![T::zero(); n];
        for k in 1..n {
            let kk = T::lit(k as f64);
            cos[k] = kk * self.sin[k];
            sin[k] = -kk * self.cos[k];
        }
        TrigPoly { cos, sin }
    }

    pub fn max_abs_coeff(&self) -> T {
        self.cos.iter().chain(self.sin.iter()).fold(T::zero(), |m, c| m.max(c.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.cos.len().max(other.cos.len());
        let get = |v: &Vec<T>, k: usize| v.get(k).copied().unwrap_or(T::zero());
        TrigPoly {
            cos: (0..n).map(|k| get(&self.cos, k) + get(&other.cos, k)).collect(),
            sin: (0..n).map(|k| get(&self.sin, k) + get(&other.sin, k)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, s: T) -> Self {
        TrigPoly { cos: self.cos.iter().map(|&c| c * s).collect(), sin: self.sin.iter().map(|&c| c * s).collect() }
    }

    /// Product via the product-to-sum identities.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.degree() + other.degree() + 1;
        let mut cos = vec![T::zero(); n];
        let mut sin = vec![T::zero(); n];
        let half = T::lit(0.5);
        for j in 0..self.cos.len() {
            for k in 0..other.cos.len() {
                let (aj, bj) = (self.cos[j], self.sin[j]);
                let (ak, bk) = (other.cos[k], other.sin[k]);
                let sum = j + k;
                let (diff, sign) = if j >= k { (j - k, T::one()) } else { (k - j, -T::one()) };
                // cos j cos k = (cos(j+k) + cos(j-k)) / 2
                cos[sum] = cos[sum] + half * aj * ak;
                cos[diff] = cos[diff] + half * aj * ak;
                // sin j sin k = (cos(j-k) - cos(j+k)) / 2
                cos[diff] = cos[diff] + half * bj * bk;
                cos[sum] = cos[sum] - half * bj * bk;
                // sin j cos k = (sin(j+k) + sin(j-k)) / 2
                sin[sum] = sin[sum] + half * bj * ak;
                sin[diff] = sin[diff] + half * sign * bj * ak;
                // cos j sin k = (sin(j+k) - sin(j-k)) / 2
                sin[sum] = sin[sum] + half * aj * bk;
                sin[diff] = sin[diff] - half * sign * aj * bk;
            }
        }
        sin[0] = T::zero();
        TrigPoly { cos, sin }
    }

    /// Removes top harmonics whose coefficients are below `rel_tol` times the
    /// largest coefficient.
    pub fn trim(&mut self, rel_tol: T) {
        let m = self.max_abs_coeff();
        while self.cos.len() > 1 {
            let k = self.cos.len() - 1;
            if self.cos[k].abs() <= rel_tol * m && self.sin[k].abs() <= rel_tol * m {
                self.cos.pop();
                self.sin.pop();
            } else {
                break;
            }
        }
    }

    /// `(1 + t^2)^n G(2 atan t)` for `n = degree`: a polynomial of degree
    /// `2n` in the half-angle tangent.
    pub fn to_half_angle(&self) -> Poly<T> {
        let n = self.degree();
        let one_plus_t2 = Poly::new(vec![T::one(), T::zero(), T::one()]);
        // (1 + i t)^(2k) split into real and imaginary parts
        let mut re = Poly::new(vec![T::one()]);
        let mut im = Poly::new(vec![T::zero()]);
        let mut out = Poly::new(vec![T::zero()]);
        let mut pow_cache = vec![Poly::new(vec![T::one()])];
        for _ in 0..n {
            let last = pow_cache.last().unwrap().mul(&one_plus_t2);
            pow_cache.push(last);
        }
        for k in 0..=n {
            let term = re.scale(self.cos[k]).add(&im.scale(self.sin[k]));
            out = out.add(&term.mul(&pow_cache[n - k]));
            // multiply (re + i im) by (1 + i t)^2 = (1 - t^2) + i (2t)
            let a = Poly::new(vec![T::one(), T::zero(), -T::one()]);
            let b = Poly::new(vec![T::zero(), T::lit(2.0)]);
            let new_re = re.mul(&a).add(&im.mul(&b).scale(-T::one()));
            let new_im = re.mul(&b).add(&im.mul(&a));
            re = new_re;
            im = new_im;
        }
        out.coeffs.resize(2 * n + 1, T::zero());
        out
    }
}
