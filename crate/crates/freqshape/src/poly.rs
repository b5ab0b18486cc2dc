//! Real polynomials in ascending coefficient order.
//!
//! `coeffs[k]` multiplies `s^k`. The representation is kept canonical by
//! trimming exactly-zero leading coefficients; the zero polynomial is the
//! empty coefficient vector with degree 0 by convention.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::float;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming exact zeros
    /// above the leading nonzero term.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `s^k` (zero beyond the stored degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(float::abs(*c)))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c)
    }

    /// Horner evaluation of `sum |c_k| |s|^k`, an upper bound on the magnitude
    /// the evaluation could have reached; used to scale near-pole thresholds.
    pub fn eval_abs(&self, s_mag: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * s_mag + float::abs(*c))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Self::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Euclidean division: returns `(quotient, remainder)` with
    /// `self = quotient * divisor + remainder` and
    /// `deg remainder < deg divisor`.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        if self.is_zero() || self.degree() < divisor.degree() {
            return (Self::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let dlead = divisor.leading();
        let ddeg = divisor.degree();
        let qdeg = self.degree() - ddeg;
        let mut quot = vec![0.0; qdeg + 1];
        for k in (0..=qdeg).rev() {
            let q = rem[k + ddeg] / dlead;
            quot[k] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
        }
        rem.truncate(ddeg);
        (Self::new(quot), Self::new(rem))
    }

    /// Approximate monic GCD by the Euclidean algorithm. A remainder whose
    /// largest coefficient falls below `rel_tol` times the running coefficient
    /// scale is treated as zero.
    pub fn gcd_approx(&self, other: &Self, rel_tol: f64) -> Self {
        let mut a = self.clone();
        let mut b = other.clone();
        if a.is_zero() {
            return b.monic();
        }
        if b.is_zero() {
            return a.monic();
        }
        if a.degree() < b.degree() {
            core::mem::swap(&mut a, &mut b);
        }
        let scale = self.max_abs_coeff().max(other.max_abs_coeff()).max(1.0);
        loop {
            let (_, r) = a.div_rem(&b);
            if r.is_zero() || r.max_abs_coeff() <= rel_tol * scale.max(b.max_abs_coeff()) {
                return b.monic();
            }
            a = b;
            // Renormalize to keep the Euclidean chain numerically tame.
            b = r.monic();
        }
    }

    /// Rescales so the leading coefficient is one. The zero polynomial is
    /// returned unchanged.
    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(1.0 / self.leading())
    }

    /// All complex roots by the Durand–Kerner iteration. Intended for the
    /// low-degree denominators handled by this crate; degenerate clusters
    /// converge to closely spaced approximations rather than exact multiples.
    pub fn roots(&self) -> Vec<Complex64> {
        let p = self.monic();
        let n = p.degree();
        if p.is_zero() || n == 0 {
            return Vec::new();
        }
        // Cauchy bound on root magnitude.
        let radius = 1.0 + p.coeffs[..n].iter().fold(0.0f64, |m, c| m.max(float::abs(*c)));
        let seed = Complex64::new(0.4, 0.9);
        let mut w: Vec<Complex64> = (0..n)
            .map(|k| seed.powu(k as u32 + 1) * radius)
            .collect();
        for _ in 0..500 {
            let mut max_step = 0.0f64;
            for i in 0..n {
                let mut denom = Complex64::new(1.0, 0.0);
                for j in 0..n {
                    if j != i {
                        denom *= w[i] - w[j];
                    }
                }
                if denom.norm() == 0.0 {
                    // Perturb coincident iterates and keep going.
                    w[i] += Complex64::new(1e-8 * radius, 1e-8 * radius);
                    max_step = f64::MAX;
                    continue;
                }
                let delta = p.eval_complex(w[i]) / denom;
                w[i] -= delta;
                max_step = max_step.max(delta.norm() / w[i].norm().max(1.0));
            }
            if max_step < 1e-14 {
                break;
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trims_exact_zero_leading_coeffs() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
    }

    #[test]
    fn mul_and_div_rem_are_inverse() {
        let a = Polynomial::new(vec![1.0, 3.0, 2.0]);
        let b = Polynomial::new(vec![-1.0, 1.0]);
        let prod = a.mul(&b);
        let (q, r) = prod.div_rem(&b);
        assert_eq!(q, a);
        assert!(r.is_zero());
    }

    #[test]
    fn gcd_finds_shared_factor() {
        // (s+1)(s+2) and (s+1)(s+3) share (s+1).
        let a = Polynomial::new(vec![2.0, 3.0, 1.0]);
        let b = Polynomial::new(vec![3.0, 4.0, 1.0]);
        let g = a.gcd_approx(&b, 1e-9);
        assert_eq!(g.degree(), 1);
        assert_abs_diff_eq!(g.coeff(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.coeff(1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gcd_of_coprime_is_constant() {
        let a = Polynomial::new(vec![1.0, 1.0]);
        let b = Polynomial::new(vec![2.0, 1.0]);
        assert_eq!(a.gcd_approx(&b, 1e-9).degree(), 0);
    }

    #[test]
    fn roots_of_cubic() {
        // (s+1)(s+2)(s+3)
        let p = Polynomial::new(vec![6.0, 11.0, 6.0, 1.0]);
        let mut re: Vec<f64> = p.roots().iter().map(|r| r.re).collect();
        re.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(re[0], -3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(re[1], -2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(re[2], -1.0, epsilon = 1e-9);
        for r in p.roots() {
            assert_abs_diff_eq!(r.im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn roots_of_imaginary_pair() {
        // s^2 + 4 -> +-2j
        let p = Polynomial::new(vec![4.0, 0.0, 1.0]);
        let roots = p.roots();
        assert_eq!(roots.len(), 2);
        for r in roots {
            assert_abs_diff_eq!(r.re, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(r.im.abs(), 2.0, epsilon = 1e-10);
        }
    }
}
