//! Synthesis, certification, and simulation of grid-forming frequency-shaping
//! inverter control for low-inertia power networks.
//!
//! The crate is organized around a small set of value types:
//!
//! * [`ratfun`] — exact-coefficient rational transfer-function algebra,
//!   Routh–Hurwitz stability, and first-order turbine model reduction.
//! * [`bus`] — per-bus transfer functions (generator swing + turbine droop,
//!   frequency-shaping and virtual-inertia inverters, damping loads).
//! * [`net`] — network cases, the angle-coupling Laplacian, and the
//!   coupling-strength bounds used by certification.
//! * [`synthesis`] — choosing aggregate gains `(a, b)` from frequency-security
//!   specs and realizing them across the inverter fleet.
//! * [`stability`] — the decentralized positive-realness certificate with a
//!   shared witness pair.
//! * [`sim`] — closed-loop state-space assembly, fixed-step integration
//!   (linear and nonlinear), and Nadir/RoCoF/steady-state metrics.
//!
//! Everything is a plain immutable value over `f64`; operations are pure
//! functions, safe to call from any number of threads. The crate is
//! `no_std`-compatible (`alloc` required): build with
//! `--no-default-features --features libm` to drop the standard library.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("freqshape requires either the `std` or the `libm` feature");

pub(crate) mod float;
pub mod matrix;
pub mod poly;
pub mod ratfun;

pub mod bus;
pub mod net;
pub mod stability;
pub mod synthesis;

pub mod sim;

pub use num_complex::Complex64;
