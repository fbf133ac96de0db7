//! Lindbladian lifts of density-matrix paths.
//!
//! Given a path `t ↦ ρ_t` of density matrices, the crate constructs families of
//! time-local GKSL generators `L_t` with `L_t(ρ_t) = ρ̇_t`, checks that each
//! member really is a GKSL generator, integrates the resulting Markovian
//! evolution, and reproduces a set of worked scenarios (dephasing with a
//! sign-changing rate, an eternally non-Markovian qubit channel, a qutrit
//! family, and piecewise-affine interpolation of sampled states).

pub mod error;
pub mod gksl;
pub mod io;
pub mod lift;
pub mod matcore;
pub mod paths;
pub mod propagate;
pub mod scenarios;

pub use error::{Error, Result};
