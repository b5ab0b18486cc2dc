//! Decentralized internal-stability certification.
//!
//! Each bus transfer function `ĥ_i`, scaled by its coupling bound `γ_i`,
//! must lie in the class
//!
//! ```text
//! Q = { q̂ ∈ H∞ :  q̂(0) ≠ 0,  (s/(s+τ_α)) (1 + q̂(s)/s) − ε ∈ PR }
//! ```
//!
//! for one shared witness pair `(τ_α, ε)`. For the first- and second-order
//! bus dynamics handled here the shifted function is a ratio of cubics
//! `p(s)/Q(s)` whose coefficient vectors ξ (numerator) and η (denominator)
//! come out of [`build_pr_coeffs`]. Positive realness is then decided
//! algebraically:
//!
//! * the nonnegativity screen on ξ and η (necessary: a positive-real
//!   function and its inverse are both free of right-half-plane zeros, so
//!   both coefficient vectors are sign-constant),
//! * the product inequality `(ξ₁+η₁)(ξ₂+η₂) ≥ (ξ₀+η₀)(ξ₃+η₃)`, which is the
//!   Routh condition for the cubic `p + Q`,
//! * the exact axis condition `Re p(jν) Q(−jν) ≥ 0` for all ν, reduced to
//!   the sign of a cubic in `x = ν²` and checked at its closed-form
//!   stationary points.
//!
//! The product inequality alone is necessary but not sufficient — the axis
//! condition can fail while it holds — so certification requires all three.
//! The grid-based [`pr_numeric_oracle`] provides an independent route to
//! the same answer through complex evaluation of the assembled function.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::float;
use crate::net::{BusId, Case};
use crate::ratfun::RatFun;

/// Absolute tolerance on `Re f(jν)` for the numeric oracle.
pub const PR_REAL_TOL: f64 = 1e-9;

/// Poles with real part within this band count as imaginary-axis poles.
const AXIS_POLE_BAND: f64 = 1e-9;

/// Distance used for the limit evaluation of residues at axis poles.
const RESIDUE_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StabilityError {
    /// The bus dynamics are not of the (≤ 2)-order shape the coefficient
    /// system covers.
    UnsupportedOrder,
    /// The cubic test was invoked outside the nondegenerate case.
    DegenerateCoefficients,
    /// A bus without an assigned transfer function reached certification.
    MissingDynamics(BusId),
}

impl core::fmt::Display for StabilityError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::UnsupportedOrder => write!(
                f,
                "bus dynamics must be at most second order with first-order numerator"
            ),
            Self::DegenerateCoefficients => write!(
                f,
                "coefficients outside the nondegenerate case (negative entry or zero denominator vector)"
            ),
            Self::MissingDynamics(id) => {
                write!(f, "inverter bus {id} has no controller assigned")
            }
        }
    }
}

impl core::error::Error for StabilityError {}

/// Numerator (ξ) and denominator (η) coefficients, ascending degree, of the
/// shifted function `(s/(s+τ_α))(1 + γĥ/s) − ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrCoeffs {
    pub xi: [f64; 4],
    pub eta: [f64; 4],
}

impl PrCoeffs {
    /// The nondegenerate case: every entry nonnegative and η not the zero
    /// vector.
    pub fn nonneg_screen(&self) -> bool {
        self.xi.iter().chain(self.eta.iter()).all(|&v| v >= 0.0)
            && self.eta.iter().any(|&v| v != 0.0)
    }
}

/// Builds ξ/η for a bus function `h = (c₁s + c₀)/(q₂s² + q₁s + q₀)`:
///
/// ```text
/// ξ₀ = γc₀ − q₀τ_αε            η₀ = q₀τ_α
/// ξ₁ = q₀(1−ε) + γc₁ − q₁τ_αε  η₁ = q₀ + q₁τ_α
/// ξ₂ = q₁(1−ε) − q₂τ_αε        η₂ = q₁ + q₂τ_α
/// ξ₃ = q₂(1−ε)                 η₃ = q₂
/// ```
///
/// First-order dynamics are the degenerate case `q₂ = c₁ = 0`; memoryless
/// (constant) dynamics additionally have `q₁ = 0`.
pub fn build_pr_coeffs(
    h: &RatFun,
    gamma: f64,
    tau_alpha: f64,
    epsilon: f64,
) -> Result<PrCoeffs, StabilityError> {
    if h.is_zero() || h.num().degree() > 1 || h.den().degree() > 2 || !h.is_proper() {
        return Err(StabilityError::UnsupportedOrder);
    }
    let (c0, c1) = (h.num().coeff(0), h.num().coeff(1));
    let (q0, q1, q2) = (h.den().coeff(0), h.den().coeff(1), h.den().coeff(2));
    let te = tau_alpha * epsilon;
    Ok(PrCoeffs {
        xi: [
            gamma * c0 - q0 * te,
            q0 * (1.0 - epsilon) + gamma * c1 - q1 * te,
            q1 * (1.0 - epsilon) - q2 * te,
            q2 * (1.0 - epsilon),
        ],
        eta: [
            q0 * tau_alpha,
            q0 + q1 * tau_alpha,
            q1 + q2 * tau_alpha,
            q2,
        ],
    })
}

/// The product inequality `(ξ₁+η₁)(ξ₂+η₂) ≥ (ξ₀+η₀)(ξ₃+η₃)` — the Routh
/// condition for the cubic `p + Q`. Only valid in the nondegenerate case.
pub fn pr_cubic_test(c: &PrCoeffs) -> Result<bool, StabilityError> {
    if !c.nonneg_screen() {
        return Err(StabilityError::DegenerateCoefficients);
    }
    let lhs = (c.xi[1] + c.eta[1]) * (c.xi[2] + c.eta[2]);
    let rhs = (c.xi[0] + c.eta[0]) * (c.xi[3] + c.eta[3]);
    Ok(lhs >= rhs)
}

/// Exact check of the axis condition `Re p(jν)Q(−jν) ≥ 0` for all real ν.
/// With `x = ν²` the left side is the cubic `N(x) = Ax³ + Bx² + Cx + D`,
/// `A = ξ₃η₃`, `B = ξ₂η₂ − ξ₁η₃ − ξ₃η₁`, `C = ξ₁η₁ − ξ₀η₂ − ξ₂η₀`,
/// `D = ξ₀η₀`, whose minimum over `x ≥ 0` is evaluated in closed form.
pub fn pr_axis_condition(c: &PrCoeffs) -> bool {
    let a = c.xi[3] * c.eta[3];
    let b = c.xi[2] * c.eta[2] - c.xi[1] * c.eta[3] - c.xi[3] * c.eta[1];
    let cc = c.xi[1] * c.eta[1] - c.xi[0] * c.eta[2] - c.xi[2] * c.eta[0];
    let d = c.xi[0] * c.eta[0];
    let scale = float::abs(a)
        .max(float::abs(b))
        .max(float::abs(cc))
        .max(float::abs(d))
        .max(1.0);
    let tol = 1e-12 * scale;
    let n = |x: f64| ((a * x + b) * x + cc) * x + d;
    let min = if a < 0.0 {
        return false;
    } else if a == 0.0 {
        if b < 0.0 {
            return false;
        }
        if b == 0.0 {
            if cc < -tol {
                return false;
            }
            d
        } else if cc >= 0.0 {
            d
        } else {
            let x_star = -cc / (2.0 * b);
            n(x_star).min(d)
        }
    } else {
        // Stationary points of the cubic: 3Ax² + 2Bx + C = 0.
        let disc = b * b - 3.0 * a * cc;
        if disc <= 0.0 {
            d
        } else {
            let x_plus = (-b + float::sqrt(disc)) / (3.0 * a);
            if x_plus <= 0.0 {
                d
            } else {
                n(x_plus).min(d)
            }
        }
    };
    min >= -tol
}

/// The shifted function `(s/(s+τ_α))(1 + γh/s) − ε = (s + γh)/(s + τ_α) − ε`
/// assembled by rational-function arithmetic (independent of the ξ/η
/// coefficient route).
pub fn assemble_shifted(h: &RatFun, gamma: f64, tau_alpha: f64, epsilon: f64) -> RatFun {
    let s = RatFun::from_coeffs(&[0.0, 1.0], &[1.0]).expect("nonzero denominator");
    let pole = RatFun::from_coeffs(&[tau_alpha, 1.0], &[1.0]).expect("nonzero denominator");
    s.add(&h.scale(gamma))
        .mul(&pole.inverse().expect("first-order numerator"))
        .sub(&RatFun::constant(epsilon))
}

/// 400 log-spaced points over `[1e-4, 1e4]` rad/s, the default oracle grid.
pub fn default_oracle_grid() -> Vec<f64> {
    float::log_grid(1e-4, 1e4, 400)
}

/// Minimum of `Re f(jν)` over the grid, with a golden-section refinement
/// around the smallest sample. Grid points that land on a pole are skipped.
/// Returns `f64::INFINITY` for an empty grid.
pub fn axis_real_minimum(f: &RatFun, grid: &[f64]) -> f64 {
    let re_at = |nu: f64| f.eval(Complex64::new(0.0, nu)).map(|v| v.re);
    let mut best = f64::INFINITY;
    let mut best_idx = None;
    for (i, &nu) in grid.iter().enumerate() {
        if let Ok(re) = re_at(nu) {
            if re < best {
                best = re;
                best_idx = Some(i);
            }
        }
    }
    let Some(i) = best_idx else {
        return best;
    };
    let lo = if i == 0 { grid[0] * 0.5 } else { grid[i - 1] };
    let hi = if i + 1 == grid.len() {
        grid[i] * 2.0
    } else {
        grid[i + 1]
    };
    // Golden-section minimization of Re f(jν) on [lo, hi].
    let phi = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = re_at(x1).unwrap_or(f64::INFINITY);
    let mut f2 = re_at(x2).unwrap_or(f64::INFINITY);
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = re_at(x1).unwrap_or(f64::INFINITY);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = re_at(x2).unwrap_or(f64::INFINITY);
        }
    }
    best.min(f1).min(f2)
}

/// Definition-level positive-realness check: all poles in the closed left
/// half plane (axis poles simple with nonnegative real residue) and
/// `Re f(jν) ≥ −1e-9` across the grid.
pub fn pr_numeric_oracle(f: &RatFun, grid: &[f64]) -> bool {
    if !f.is_proper() {
        return false;
    }
    if f.is_zero() {
        return true;
    }
    let poles = f.den().roots();
    for (k, p) in poles.iter().enumerate() {
        if p.re > AXIS_POLE_BAND {
            return false;
        }
        if float::abs(p.re) <= AXIS_POLE_BAND {
            // Simplicity: no other pole may sit within the clustering radius.
            let multiple = poles
                .iter()
                .enumerate()
                .any(|(j, q)| j != k && (p - q).norm() < RESIDUE_OFFSET);
            if multiple {
                return false;
            }
            // Residue by limit evaluation a small real distance off the axis.
            let s = Complex64::new(p.re + RESIDUE_OFFSET, p.im);
            let Ok(v) = f.eval(s) else {
                return false;
            };
            let res = v * Complex64::new(RESIDUE_OFFSET, 0.0);
            if res.re < -PR_REAL_TOL || float::abs(res.im) > 1e-6 * res.norm().max(1.0) {
                return false;
            }
        }
    }
    axis_real_minimum(f, grid) >= -PR_REAL_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// `γĥ ∉ H∞`: the denominator is not Hurwitz.
    NotStable,
    /// `γĥ(0)` vanishes (or sits on a pole).
    ZeroDcGain,
    /// The shifted function failed the positive-realness test at this
    /// witness pair.
    NotPositiveReal,
}

impl core::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::NotStable => write!(f, "not stable (H-infinity membership fails)"),
            Self::ZeroDcGain => write!(f, "zero DC value"),
            Self::NotPositiveReal => write!(f, "shifted function not positive real"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusVerdict {
    Certified,
    Failed(FailureReason),
}

/// Class-Q membership of `γĥ` at one witness pair: (i) stability, (ii)
/// nonzero DC value, (iii) the algebraic positive-realness test
/// (nonnegativity screen, product inequality, axis condition).
pub fn certify_bus(
    h: &RatFun,
    gamma: f64,
    tau_alpha: f64,
    epsilon: f64,
) -> Result<BusVerdict, StabilityError> {
    debug_assert!(gamma > 0.0 && tau_alpha > 0.0 && epsilon > 0.0 && epsilon < 1.0);
    let stable = h.is_stable().map_err(|_| StabilityError::UnsupportedOrder)?;
    if !stable {
        return Ok(BusVerdict::Failed(FailureReason::NotStable));
    }
    match h.dc_gain() {
        Ok(dc) if float::abs(gamma * dc) > 1e-12 => {}
        _ => return Ok(BusVerdict::Failed(FailureReason::ZeroDcGain)),
    }
    let coeffs = build_pr_coeffs(h, gamma, tau_alpha, epsilon)?;
    if !coeffs.nonneg_screen() {
        return Ok(BusVerdict::Failed(FailureReason::NotPositiveReal));
    }
    let cubic = pr_cubic_test(&coeffs).expect("screen passed");
    if cubic && pr_axis_condition(&coeffs) {
        Ok(BusVerdict::Certified)
    } else {
        Ok(BusVerdict::Failed(FailureReason::NotPositiveReal))
    }
}

/// Witness search grid. The default is 13 log-spaced `τ_α` over
/// `[1e-2, 1e2]` and `ε ∈ {1e-6, 1e-4, 1e-3, 1e-2}` tried smallest first
/// (a pass at some ε implies a pass at every smaller ε, so small ε never
/// hurts).
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub tau_alpha: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            tau_alpha: float::log_grid(1e-2, 1e2, 13),
            epsilon: alloc::vec![1e-6, 1e-4, 1e-3, 1e-2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub tau_alpha: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusCertificate {
    pub id: BusId,
    pub verdict: BusVerdict,
}

/// Outcome of the shared-witness search. `overall` is true only when a
/// single `(τ_α, ε)` pair certifies every bus; the criterion is sufficient,
/// not necessary, so `overall = false` is inconclusive rather than a proof
/// of instability.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// The certifying pair, or the best-scoring pair when `overall` is
    /// false. `None` only for an empty grid.
    pub witness: Option<Witness>,
    pub overall: bool,
    pub per_bus: Vec<BusCertificate>,
    /// Number of witness pairs tried.
    pub attempts: usize,
}

/// Scans the witness grid in order (τ_α ascending, then ε as listed) and
/// returns the first pair certifying all buses, else the pair that
/// certified the most buses. `γ_i` comes from
/// [`crate::net::coupling_bounds`] at `v_max_factor`.
pub fn certify_system(
    case: &Case,
    grid: &SearchGrid,
    v_max_factor: f64,
) -> Result<Certificate, StabilityError> {
    let gammas = crate::net::coupling_bounds(case, v_max_factor);
    let mut dynamics = Vec::with_capacity(case.n());
    for bus in case.buses() {
        let tf = bus.tf().ok_or(StabilityError::MissingDynamics(bus.id))?;
        dynamics.push((bus.id, tf));
    }
    let mut attempts = 0usize;
    let mut best: Option<(usize, Witness, Vec<BusCertificate>)> = None;
    for &tau_alpha in &grid.tau_alpha {
        for &epsilon in &grid.epsilon {
            attempts += 1;
            let mut per_bus = Vec::with_capacity(dynamics.len());
            let mut certified = 0usize;
            for ((id, tf), gamma) in dynamics.iter().zip(&gammas) {
                let verdict = certify_bus(tf, *gamma, tau_alpha, epsilon)?;
                if verdict == BusVerdict::Certified {
                    certified += 1;
                }
                per_bus.push(BusCertificate { id: *id, verdict });
            }
            let witness = Witness { tau_alpha, epsilon };
            if certified == dynamics.len() {
                return Ok(Certificate {
                    witness: Some(witness),
                    overall: true,
                    per_bus,
                    attempts,
                });
            }
            if best.as_ref().is_none_or(|(n, _, _)| certified > *n) {
                best = Some((certified, witness, per_bus));
            }
        }
    }
    let (witness, per_bus) = match best {
        Some((_, w, p)) => (Some(w), p),
        None => (None, Vec::new()),
    };
    Ok(Certificate {
        witness,
        overall: false,
        per_bus,
        attempts,
    })
}
