//! Rational transfer functions with exact coefficient algebra.
//!
//! A [`RatFun`] keeps numerator and denominator [`Polynomial`]s in canonical
//! form: the denominator is nonzero and monic. Common factors are never
//! cancelled behind the caller's back; [`RatFun::simplify`] must be called
//! explicitly.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::float;
use crate::poly::Polynomial;

/// Pivot substituted for an exactly-zero leading entry in the Routh table.
const ROUTH_EPS_PIVOT: f64 = 1e-12;

/// Relative threshold below which a denominator evaluation counts as a pole.
const POLE_EVAL_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatFunError {
    /// Construction with an identically zero denominator.
    ZeroDenominator,
    /// Inversion of the zero function.
    ZeroNumerator,
    /// Evaluation at (numerically) a pole.
    PoleEvaluation,
    /// Stability test on a function with deg num > deg den.
    ImproperTransferFunction,
    /// Turbine reduction over an empty set.
    EmptyTurbineSet,
    /// Turbine reduction with a nonpositive gain or time constant.
    NonPositiveTurbine,
}

impl core::fmt::Display for RatFunError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::ZeroDenominator => write!(f, "denominator is the zero polynomial"),
            Self::ZeroNumerator => write!(f, "cannot invert a zero numerator"),
            Self::PoleEvaluation => write!(f, "evaluation point is a pole"),
            Self::ImproperTransferFunction => {
                write!(f, "transfer function is improper (deg num > deg den)")
            }
            Self::EmptyTurbineSet => write!(f, "turbine set is empty"),
            Self::NonPositiveTurbine => {
                write!(f, "turbine gains and time constants must be positive")
            }
        }
    }
}

impl core::error::Error for RatFunError {}

/// Verdict of the Routh–Hurwitz tabular criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouthVerdict {
    /// All roots strictly in the open left half plane.
    Stable,
    /// At least one root with positive real part.
    Unstable,
    /// A zero pivot or zero row occurred; roots on (or numerically on) the
    /// imaginary axis. Treated as not stable.
    Marginal,
}

/// Routh–Hurwitz criterion on a denominator polynomial (ascending
/// coefficients). Zero leading entries are replaced by a `1e-12` pivot and
/// the case is flagged [`RouthVerdict::Marginal`].
pub fn routh_hurwitz(den: &Polynomial) -> RouthVerdict {
    let d = den.degree();
    if den.is_zero() {
        return RouthVerdict::Marginal;
    }
    if d == 0 {
        return RouthVerdict::Stable;
    }
    let mut desc: Vec<f64> = den.coeffs().iter().rev().copied().collect();
    if desc[0] < 0.0 {
        for v in &mut desc {
            *v = -*v;
        }
    }
    let row0: Vec<f64> = desc.iter().step_by(2).copied().collect();
    let row1: Vec<f64> = desc.iter().skip(1).step_by(2).copied().collect();
    let mut rows: Vec<Vec<f64>> = alloc::vec![row0, row1];
    let mut marginal = false;
    while rows.len() < d + 1 {
        let prev = &rows[rows.len() - 2];
        let cur = &rows[rows.len() - 1];
        if cur.iter().all(|&v| v == 0.0) {
            return RouthVerdict::Marginal;
        }
        let mut pivot = cur[0];
        if pivot == 0.0 {
            pivot = ROUTH_EPS_PIVOT;
            marginal = true;
        }
        let len = (prev.len().max(cur.len())).saturating_sub(1).max(1);
        let mut next = Vec::with_capacity(len);
        for i in 0..len {
            let p1 = prev.get(i + 1).copied().unwrap_or(0.0);
            let c1 = cur.get(i + 1).copied().unwrap_or(0.0);
            next.push((pivot * p1 - prev[0] * c1) / pivot);
        }
        rows.push(next);
    }
    let mut sign_changes = 0usize;
    let mut last_sign = 1.0f64;
    for row in &rows {
        let head = row[0];
        if head == 0.0 {
            marginal = true;
            continue;
        }
        let sign = if head > 0.0 { 1.0 } else { -1.0 };
        if sign != last_sign {
            sign_changes += 1;
        }
        last_sign = sign;
    }
    if marginal {
        RouthVerdict::Marginal
    } else if sign_changes == 0 {
        RouthVerdict::Stable
    } else {
        RouthVerdict::Unstable
    }
}

/// Real rational function `num(s) / den(s)` with a monic denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct RatFun {
    num: Polynomial,
    den: Polynomial,
}

impl RatFun {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, RatFunError> {
        if den.is_zero() {
            return Err(RatFunError::ZeroDenominator);
        }
        let k = den.leading();
        Ok(Self {
            num: num.scale(1.0 / k),
            den: den.scale(1.0 / k),
        })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, RatFunError> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn constant(c: f64) -> Self {
        Self {
            num: Polynomial::constant(c),
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        Self {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `deg den - deg num`; zero for the zero function.
    pub fn relative_degree(&self) -> i64 {
        if self.num.is_zero() {
            0
        } else {
            self.den.degree() as i64 - self.num.degree() as i64
        }
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// Sum as a rational function. The result's denominator is the product of
    /// the operands' denominators; no cancellation is performed.
    pub fn add(&self, other: &Self) -> Self {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        // Both denominators are monic, so their product is monic.
        Self { num, den }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// Swaps numerator and denominator.
    pub fn inverse(&self) -> Result<Self, RatFunError> {
        if self.num.is_zero() {
            return Err(RatFunError::ZeroNumerator);
        }
        Self::new(self.den.clone(), self.num.clone())
    }

    /// Evaluates at a complex point. Fails when the denominator magnitude is
    /// below machine scale relative to the size of its evaluation.
    pub fn eval(&self, s: Complex64) -> Result<Complex64, RatFunError> {
        let d = self.den.eval_complex(s);
        let scale = self.den.eval_abs(s.norm()).max(1e-300);
        if d.norm() <= POLE_EVAL_REL * scale {
            return Err(RatFunError::PoleEvaluation);
        }
        Ok(self.num.eval_complex(s) / d)
    }

    /// Value at `s = 0`.
    pub fn dc_gain(&self) -> Result<f64, RatFunError> {
        self.eval(Complex64::new(0.0, 0.0)).map(|v| v.re)
    }

    /// True iff every denominator root has strictly negative real part,
    /// by the Routh–Hurwitz criterion. Marginal tables count as not stable.
    pub fn is_stable(&self) -> Result<bool, RatFunError> {
        if !self.is_proper() {
            return Err(RatFunError::ImproperTransferFunction);
        }
        Ok(routh_hurwitz(&self.den) == RouthVerdict::Stable)
    }

    /// Scale-invariant equality through the cross products
    /// `num(f)·den(g)` and `num(g)·den(f)`, compared coefficient-wise within
    /// `tol` relative to the largest coefficient magnitude.
    pub fn approx_equal(&self, other: &Self, tol: f64) -> bool {
        self.approx_distance(other) <= tol
    }

    /// Largest cross-product coefficient gap relative to the largest
    /// coefficient magnitude; zero iff the functions are identical as
    /// rational functions.
    pub fn approx_distance(&self, other: &Self) -> f64 {
        let c1 = self.num.mul(&other.den);
        let c2 = other.num.mul(&self.den);
        let scale = c1.max_abs_coeff().max(c2.max_abs_coeff());
        if scale == 0.0 {
            return 0.0;
        }
        let n = c1.coeffs().len().max(c2.coeffs().len());
        (0..n).fold(0.0f64, |worst, i| {
            worst.max(float::abs(c1.coeff(i) - c2.coeff(i)) / scale)
        })
    }

    /// Cancels common numerator/denominator roots found by the approximate
    /// Euclidean GCD at relative tolerance `tol`. Simplification is always
    /// explicit; arithmetic never calls this.
    pub fn simplify(&self, tol: f64) -> Self {
        if self.num.is_zero() {
            return Self::zero();
        }
        let g = self.num.gcd_approx(&self.den, tol);
        if g.degree() == 0 {
            return self.clone();
        }
        let (num, _) = self.num.div_rem(&g);
        let (den, _) = self.den.div_rem(&g);
        Self::new(num, den).expect("gcd divides a nonzero denominator")
    }
}

impl core::fmt::Display for RatFun {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        fn write_poly(f: &mut core::fmt::Formatter<'_>, p: &Polynomial) -> core::fmt::Result {
            if p.is_zero() {
                return write!(f, "0");
            }
            let mut first = true;
            for k in (0..=p.degree()).rev() {
                let c = p.coeff(k);
                if c == 0.0 {
                    continue;
                }
                if !first {
                    write!(f, " {} ", if c < 0.0 { "-" } else { "+" })?;
                } else if c < 0.0 {
                    write!(f, "-")?;
                }
                first = false;
                let a = float::abs(c);
                match k {
                    0 => write!(f, "{a}")?,
                    1 => write!(f, "{a}s")?,
                    _ => write!(f, "{a}s^{k}")?,
                }
            }
            Ok(())
        }
        write!(f, "(")?;
        write_poly(f, &self.num)?;
        write!(f, ") / (")?;
        write_poly(f, &self.den)?;
        write!(f, ")")
    }
}

/// First-order reduction of a set of turbine droop stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedTurbine {
    /// Aggregate inverse droop gain (p.u. power per p.u. frequency).
    pub r_t_inv: f64,
    /// Gain-weighted time constant (seconds).
    pub tau: f64,
}

impl ReducedTurbine {
    /// The reduced droop stage `r̃⁻¹ / (τ̃ s + 1)`.
    pub fn droop_tf(&self) -> RatFun {
        RatFun::from_coeffs(&[self.r_t_inv], &[1.0, self.tau]).expect("nonzero denominator")
    }
}

/// Reduces a set of first-order turbine stages `(r_t_inv, tau)` to one stage
/// with exactly matched DC gain and the gain-weighted time constant:
/// `r̃⁻¹ = Σ rᵢ⁻¹`, `τ̃ = Σ rᵢ⁻¹ τᵢ / Σ rᵢ⁻¹`.
pub fn reduce_turbines_first_order(
    turbines: &[(f64, f64)],
) -> Result<ReducedTurbine, RatFunError> {
    if turbines.is_empty() {
        return Err(RatFunError::EmptyTurbineSet);
    }
    if turbines.iter().any(|&(r, t)| r <= 0.0 || t <= 0.0) {
        return Err(RatFunError::NonPositiveTurbine);
    }
    let r_t_inv: f64 = turbines.iter().map(|&(r, _)| r).sum();
    let tau = turbines.iter().map(|&(r, t)| r * t).sum::<f64>() / r_t_inv;
    Ok(ReducedTurbine { r_t_inv, tau })
}
