//! Two-way coding for SISO LTI feedback loops under injection attacks.
//!
//! The crate computes the six closed-loop maps from reference and attack
//! inputs to plant input/output, checks them against a generic
//! signal-flow solver, co-designs static controllers with coding matrices
//! that nullify an attack channel, simulates the loop in the time domain and
//! reports H-infinity and band-limited Bode-integral metrics.

pub mod attacks;
pub mod blockdiagram;
#[cfg(feature = "cli")]
pub mod cli;
pub mod closedloop;
pub mod decoupling;
pub mod error;
pub mod metrics;
pub mod polyrat;
pub mod scenario;
pub mod simulate;

pub use error::{Error, Result};
pub use polyrat::{Polynomial, RationalFunction};
