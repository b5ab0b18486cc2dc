//! Frequency-shaping synthesis: pick aggregate first-order gains `(a, b)`
//! from frequency-security specs, split them across the inverter fleet, and
//! realize the droop-compensation term by one of two strategies so the
//! coherent dynamics of the network collapses to `1/(as + b)`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bus::{GOption, GffsParams};
use crate::float;
use crate::net::{BusId, BusKind, Case, InverterControl};
use crate::ratfun::{reduce_turbines_first_order, RatFun};

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisError {
    /// Spec fields must all be positive magnitudes.
    InvalidSpec(&'static str),
    /// `a ≤ Σ m_i` or `b ≤ Σ d_i`: nothing left for the inverters.
    InfeasibleTarget,
    NoInverters,
    /// Individual matching needs at least as many inverters as generators.
    CardinalityViolation { generators: usize, inverters: usize },
    /// Distribution weights must be nonnegative, sum to one, and have one
    /// entry per inverter.
    WeightError(&'static str),
    /// A bus in the coherent sum has no transfer function yet.
    UnassignedInverter(BusId),
}

impl core::fmt::Display for SynthesisError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::InvalidSpec(what) => write!(f, "frequency spec field `{what}` must be > 0"),
            Self::InfeasibleTarget => write!(
                f,
                "target gains do not exceed the generator totals; no positive inverter split exists"
            ),
            Self::NoInverters => write!(f, "case has no inverter buses"),
            Self::CardinalityViolation {
                generators,
                inverters,
            } => write!(
                f,
                "individual matching needs |I| >= |G| but found {inverters} inverters for {generators} generators"
            ),
            Self::WeightError(what) => write!(f, "invalid distribution weights: {what}"),
            Self::UnassignedInverter(id) => {
                write!(f, "inverter bus {id} has no controller assigned")
            }
        }
    }
}

impl core::error::Error for SynthesisError {}

/// Frequency-security specification for a worst-case aggregate step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySpec {
    /// Worst-case aggregate power step (p.u., sign free).
    pub delta_p: f64,
    /// Largest tolerable steady-state frequency deviation (p.u.).
    pub max_ss_dev: f64,
    /// Largest tolerable rate of change of frequency (p.u./s).
    pub max_rocof: f64,
}

impl FrequencySpec {
    pub fn new(delta_p: f64, max_ss_dev: f64, max_rocof: f64) -> Result<Self, SynthesisError> {
        if delta_p == 0.0 || !delta_p.is_finite() {
            return Err(SynthesisError::InvalidSpec("delta_p"));
        }
        if !(max_ss_dev > 0.0) || !max_ss_dev.is_finite() {
            return Err(SynthesisError::InvalidSpec("max_ss_dev"));
        }
        if !(max_rocof > 0.0) || !max_rocof.is_finite() {
            return Err(SynthesisError::InvalidSpec("max_rocof"));
        }
        Ok(Self {
            delta_p,
            max_ss_dev,
            max_rocof,
        })
    }
}

/// Desired coherent dynamics `1/(as + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisTarget {
    /// Aggregate inertia (p.u.·s²).
    pub a: f64,
    /// Aggregate damping (p.u.).
    pub b: f64,
}

/// The minimal gains meeting the spec with equality: `a = |Δp| / max_rocof`,
/// `b = |Δp| / max_ss_dev`.
pub fn target_gains(spec: &FrequencySpec) -> SynthesisTarget {
    let dp = float::abs(spec.delta_p);
    SynthesisTarget {
        a: dp / spec.max_rocof,
        b: dp / spec.max_ss_dev,
    }
}

/// Predicted step response of the coherent model: steady-state deviation
/// `u0_sum / b` and initial RoCoF `u0_sum / a`.
pub fn predict_response(target: &SynthesisTarget, u0_sum: f64) -> (f64, f64) {
    (u0_sum / target.b, u0_sum / target.a)
}

/// Equal split of the residual inertia and damping over the inverters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualAllocation {
    pub m_inv: f64,
    pub d_inv_base: f64,
    pub inverter_count: usize,
}

/// `m_inv = (a − Σ_G m_i)/|I|`, `d_inv_base = (b − Σ_G d_i)/|I|`, both
/// required strictly positive.
pub fn allocate_equal(
    target: &SynthesisTarget,
    case: &Case,
) -> Result<EqualAllocation, SynthesisError> {
    let k = case.indices_of_kind(BusKind::Inverter).len();
    if k == 0 {
        return Err(SynthesisError::NoInverters);
    }
    let m_rem = target.a - case.sum_generator_inertia();
    let d_rem = target.b - case.sum_generator_damping();
    if m_rem <= 0.0 || d_rem <= 0.0 {
        return Err(SynthesisError::InfeasibleTarget);
    }
    Ok(EqualAllocation {
        m_inv: m_rem / k as f64,
        d_inv_base: d_rem / k as f64,
        inverter_count: k,
    })
}

/// One inverter's share of the droop-compensation term, plus the damping
/// raise that keeps the steady state matched when the share is pulled from
/// the reduced aggregate model.
#[derive(Debug, Clone, PartialEq)]
pub struct GAssignment {
    pub bus_id: BusId,
    pub g: GOption,
    pub d_raise: f64,
}

/// Strategy 1: a bijection from generators onto a subset of the inverters,
/// each matched inverter carrying one generator's turbine stage exactly.
/// Generators and inverters pair up in ascending bus-id order; leftover
/// inverters get the zero option.
pub fn g_match_individual(case: &Case) -> Result<Vec<GAssignment>, SynthesisError> {
    let gen_idx = case.indices_of_kind(BusKind::Generator);
    let inv_idx = case.indices_of_kind(BusKind::Inverter);
    if inv_idx.len() < gen_idx.len() {
        return Err(SynthesisError::CardinalityViolation {
            generators: gen_idx.len(),
            inverters: inv_idx.len(),
        });
    }
    let stages = case.turbine_stages();
    let mut out = Vec::with_capacity(inv_idx.len());
    for (slot, &inv) in inv_idx.iter().enumerate() {
        let g = match stages.get(slot) {
            // A disabled droop stage (r_t⁻¹ = 0) degenerates to the zero option.
            Some(&(r_inv, tau)) if r_inv > 0.0 => GOption::FirstOrder {
                rho: r_inv,
                sigma: tau,
            },
            _ => GOption::Zero,
        };
        out.push(GAssignment {
            bus_id: case.buses()[inv].id,
            g,
            d_raise: 0.0,
        });
    }
    Ok(out)
}

/// Strategy 2: distribute the first-order reduced model of the aggregate
/// turbine dynamics over the inverters with weights `z` (`z_i ≥ 0`,
/// `Σ z_i = 1`). Each inverter's damping is raised by `z_i · r̃⁻¹` so the
/// steady-state comparison against an equally tuned virtual-inertia fleet
/// stays matched by construction.
pub fn g_distribute_reduced(
    case: &Case,
    weights: &[f64],
) -> Result<Vec<GAssignment>, SynthesisError> {
    let inv_idx = case.indices_of_kind(BusKind::Inverter);
    if inv_idx.is_empty() {
        return Err(SynthesisError::NoInverters);
    }
    if weights.len() != inv_idx.len() {
        return Err(SynthesisError::WeightError("one weight per inverter required"));
    }
    if weights.iter().any(|&z| z < 0.0 || !z.is_finite()) {
        return Err(SynthesisError::WeightError("weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if float::abs(total - 1.0) > 1e-12 {
        return Err(SynthesisError::WeightError("weights must sum to one"));
    }
    let stages = case.turbine_stages();
    let reduced = if stages.is_empty() {
        None
    } else {
        Some(reduce_turbines_first_order(&stages).expect("validated generator stages"))
    };
    let mut out = Vec::with_capacity(inv_idx.len());
    for (&inv, &z) in inv_idx.iter().zip(weights) {
        let (g, d_raise) = match &reduced {
            Some(r) if z > 0.0 => (
                GOption::FirstOrder {
                    rho: z * r.r_t_inv,
                    sigma: r.tau,
                },
                z * r.r_t_inv,
            ),
            _ => (GOption::Zero, 0.0),
        };
        out.push(GAssignment {
            bus_id: case.buses()[inv].id,
            g,
            d_raise,
        });
    }
    Ok(out)
}

/// Uniform weights `1/|I|`.
pub fn uniform_weights(count: usize) -> Vec<f64> {
    vec![1.0 / count as f64; count]
}

/// Coherent dynamics of the network: the inverse of
/// `Σ_{G∪I} ĥ_i⁻¹(s) + Σ_L d_i`. Load damping enters as a frequency-
/// proportional constant so cases with loads keep a well-defined coherent
/// prediction ("extended" coherent dynamics).
pub fn coherent_tf(case: &Case) -> Result<RatFun, SynthesisError> {
    let mut sum = RatFun::constant(case.sum_load_damping());
    for bus in case.buses() {
        match bus.kind() {
            BusKind::Generator | BusKind::Inverter => {
                let tf = bus
                    .tf()
                    .ok_or(SynthesisError::UnassignedInverter(bus.id))?;
                let inv = tf.inverse().expect("bus dynamics have nonzero numerator");
                sum = sum.add(&inv);
            }
            BusKind::Load => {}
        }
    }
    Ok(sum
        .inverse()
        .expect("positive-parameter bus dynamics sum to a nonzero function"))
}

/// The DC value of the extended coherent denominator,
/// `Σ 1/ĥ_i(0) + Σ_L d_i`, computed directly from parameters. This is the
/// damping a step disturbance sees in steady state.
pub fn coherent_dc_denominator(case: &Case) -> Result<f64, SynthesisError> {
    let mut sum = 0.0;
    for bus in case.buses() {
        sum += match &bus.params {
            crate::net::BusParams::Generator(p) => p.d + p.rt_inv(),
            crate::net::BusParams::Load(p) => p.d,
            crate::net::BusParams::Inverter(Some(InverterControl::Gfvi(p))) => p.d,
            crate::net::BusParams::Inverter(Some(InverterControl::Gffs(p))) => match p.g {
                GOption::Zero => p.d,
                GOption::FirstOrder { rho, .. } => p.d - rho,
            },
            crate::net::BusParams::Inverter(None) => {
                return Err(SynthesisError::UnassignedInverter(bus.id))
            }
        };
    }
    Ok(sum)
}

/// Which realization strategy produced a synthesis.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    MatchIndividual,
    /// `None` means uniform weights.
    DistributeReduced { weights: Option<Vec<f64>> },
}

/// A fully realized frequency-shaping design.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    /// The input case with every inverter assigned its controller.
    pub case: Case,
    pub target: SynthesisTarget,
    pub allocation: EqualAllocation,
    pub strategy: Strategy,
    pub per_inverter: Vec<(BusId, GffsParams)>,
    /// `b` plus the total damping raise applied by the distribution strategy.
    pub b_effective: f64,
    /// Worst-case magnitude over a log frequency grid of the gap between
    /// `Σ ĝ_i` and the aggregate turbine droop `Σ r_t⁻¹/(τs+1)`. Zero (up to
    /// rounding) when the realization satisfies the first-order condition
    /// exactly.
    pub mismatch_norm: f64,
}

/// Runs the full pipeline: equal allocation, droop-term realization by the
/// chosen strategy, controller assignment, and the realization-gap norm.
pub fn synthesize(
    case: &Case,
    target: &SynthesisTarget,
    strategy: Strategy,
) -> Result<Synthesis, SynthesisError> {
    let allocation = allocate_equal(target, case)?;
    let assignments = match &strategy {
        Strategy::MatchIndividual => g_match_individual(case)?,
        Strategy::DistributeReduced { weights } => {
            let uniform;
            let w: &[f64] = match weights {
                Some(w) => w,
                None => {
                    uniform = uniform_weights(allocation.inverter_count);
                    &uniform
                }
            };
            g_distribute_reduced(case, w)?
        }
    };
    let mut per_inverter = Vec::with_capacity(assignments.len());
    let mut total_raise = 0.0;
    for a in &assignments {
        total_raise += a.d_raise;
        let params = GffsParams {
            m: allocation.m_inv,
            d: allocation.d_inv_base + a.d_raise,
            g: a.g,
        };
        per_inverter.push((a.bus_id, params));
    }
    let assigned = case
        .with_inverter_controls(
            per_inverter
                .iter()
                .map(|(id, p)| (*id, InverterControl::Gffs(*p))),
        )
        .expect("assignments target validated inverter buses");
    let mismatch_norm = g_mismatch_norm(
        &assignments.iter().map(|a| a.g).collect::<Vec<_>>(),
        &case.turbine_stages(),
    );
    Ok(Synthesis {
        case: assigned,
        target: *target,
        allocation,
        strategy,
        per_inverter,
        b_effective: target.b + total_raise,
        mismatch_norm,
    })
}

/// `max_ν |Σ ĝ_i(jν) − Σ r_t⁻¹/(τ jν + 1)|` over a 400-point log grid of
/// `[1e-3, 1e3]` rad/s.
pub fn g_mismatch_norm(gs: &[GOption], turbine_stages: &[(f64, f64)]) -> f64 {
    let mut diff = RatFun::zero();
    for g in gs {
        if let GOption::FirstOrder { rho, sigma } = g {
            diff = diff.add(&RatFun::from_coeffs(&[*rho], &[1.0, *sigma]).expect("sigma > 0"));
        }
    }
    for &(r_inv, tau) in turbine_stages {
        diff = diff.sub(&RatFun::from_coeffs(&[r_inv], &[1.0, tau]).expect("tau > 0"));
    }
    if diff.is_zero() {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for nu in float::log_grid(1e-3, 1e3, 400) {
        let v = diff
            .eval(Complex64::new(0.0, nu))
            .expect("poles lie off the imaginary axis")
            .norm();
        worst = worst.max(v);
    }
    worst
}
