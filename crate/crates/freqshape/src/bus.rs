//! Per-bus dynamics: transfer functions from power imbalance to frequency
//! deviation for each bus kind.

use crate::ratfun::RatFun;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamError {
    /// A parameter that must be strictly positive was not.
    NonPositive(&'static str),
}

impl core::fmt::Display for ParamError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::NonPositive(name) => write!(f, "parameter `{name}` must be > 0"),
        }
    }
}

impl core::error::Error for ParamError {}

fn require_positive(value: f64, name: &'static str) -> Result<f64, ParamError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NonPositive(name))
    }
}

/// Synchronous generator: swing dynamics with a first-order turbine droop
/// stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    /// Aggregate inertia (p.u.·s²).
    pub m: f64,
    /// Aggregate damping (p.u.).
    pub d: f64,
    /// Turbine time constant (s).
    pub tau: f64,
    /// Turbine droop coefficient (p.u.). `f64::INFINITY` disables the droop
    /// stage (useful in tests of limiting identities); case validation
    /// additionally requires finite values for production data.
    pub rt: f64,
}

impl GeneratorParams {
    pub fn new(m: f64, d: f64, tau: f64, rt: f64) -> Result<Self, ParamError> {
        Ok(Self {
            m: require_positive(m, "m")?,
            d: require_positive(d, "d")?,
            tau: require_positive(tau, "tau")?,
            rt: require_positive(rt, "rt")?,
        })
    }

    pub fn rt_inv(&self) -> f64 {
        1.0 / self.rt
    }

    /// `(τs + 1) / (mτ s² + (m + dτ) s + d + r_t⁻¹)`; strictly proper and
    /// stable for positive parameters.
    pub fn tf(&self) -> RatFun {
        RatFun::from_coeffs(
            &[1.0, self.tau],
            &[
                self.d + self.rt_inv(),
                self.m + self.d * self.tau,
                self.m * self.tau,
            ],
        )
        .expect("nonzero denominator")
    }
}

/// The internal droop-like term of the frequency-shaping inverter law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GOption {
    Zero,
    FirstOrder {
        /// Gain ρ (p.u.).
        rho: f64,
        /// Time constant σ (s).
        sigma: f64,
    },
}

impl GOption {
    pub fn first_order(rho: f64, sigma: f64) -> Result<Self, ParamError> {
        Ok(Self::FirstOrder {
            rho: require_positive(rho, "rho")?,
            sigma: require_positive(sigma, "sigma")?,
        })
    }
}

/// Grid-forming frequency-shaping inverter.
///
/// Construction only requires `m, d > 0`; the certification condition
/// `d > rho` is checked by the stability module, not here, so that
/// deliberately infeasible settings can be exercised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GffsParams {
    /// Synthetic inertia (p.u.·s²).
    pub m: f64,
    /// Damping (p.u.).
    pub d: f64,
    pub g: GOption,
}

impl GffsParams {
    pub fn new(m: f64, d: f64, g: GOption) -> Result<Self, ParamError> {
        Ok(Self {
            m: require_positive(m, "m")?,
            d: require_positive(d, "d")?,
            g,
        })
    }

    /// `1 / (ms + d)` for the zero option, otherwise
    /// `(σs + 1) / (mσ s² + (m + dσ) s + d − ρ)`.
    pub fn tf(&self) -> RatFun {
        match self.g {
            GOption::Zero => {
                RatFun::from_coeffs(&[1.0], &[self.d, self.m]).expect("nonzero denominator")
            }
            GOption::FirstOrder { rho, sigma } => RatFun::from_coeffs(
                &[1.0, sigma],
                &[
                    self.d - rho,
                    self.m + self.d * sigma,
                    self.m * sigma,
                ],
            )
            .expect("nonzero denominator"),
        }
    }
}

/// Grid-forming virtual-inertia inverter: `1 / (m_v s + d_v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfviParams {
    pub m: f64,
    pub d: f64,
}

impl GfviParams {
    pub fn new(m: f64, d: f64) -> Result<Self, ParamError> {
        Ok(Self {
            m: require_positive(m, "m_v")?,
            d: require_positive(d, "d_v")?,
        })
    }

    pub fn tf(&self) -> RatFun {
        RatFun::from_coeffs(&[1.0], &[self.d, self.m]).expect("nonzero denominator")
    }
}

/// Frequency-damping load: memoryless droop `ω = u_P / d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadParams {
    pub d: f64,
}

impl LoadParams {
    pub fn new(d: f64) -> Result<Self, ParamError> {
        Ok(Self {
            d: require_positive(d, "d")?,
        })
    }

    pub fn tf(&self) -> RatFun {
        RatFun::constant(1.0 / self.d)
    }
}
