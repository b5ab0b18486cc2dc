//! Float math routed through `std` or `libm` depending on the build.

#[cfg(feature = "std")]
mod imp {
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    pub fn log10(x: f64) -> f64 {
        x.log10()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    pub fn log10(x: f64) -> f64 {
        libm::log10(x)
    }
}

pub(crate) use imp::*;

/// `count` log-spaced points over `[lo, hi]`, endpoints included.
pub(crate) fn log_grid(lo: f64, hi: f64, count: usize) -> alloc::vec::Vec<f64> {
    debug_assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (log10(lo), log10(hi));
    (0..count)
        .map(|i| powf(10.0, a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}
