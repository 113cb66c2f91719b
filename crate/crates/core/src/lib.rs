//! Split-step simulation of matterwaves on a ring and Fisher-information
//! sensitivity of rotation-sensing schemes.
//!
//! Units are `ħ = m = 1`; angles are in radians, the ring radius `R` sets the
//! length scale and the rotation rate `Ω` is measured in the same time units
//! as the evolution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fisher;
pub mod grid;
pub mod potential;
pub mod propagator;
pub mod schemes;
pub mod spinor;
pub mod wavefunction;

pub use config::{SchemeConfig, SchemeId};
pub use error::{Error, Result};
pub use fisher::{DerivativeBundle, FisherSeries};
pub use grid::RingGrid;
pub use potential::{Barrier, PotentialSpec, TrapPath};
pub use propagator::{evolve, ground_state, EvolveParams, GroundState, GroundStateOptions, Propagator};
pub use schemes::{build_scheme, run_scheme, SchemeOutput, SchemePlan};
pub use spinor::{
    evolve_spinor, evolve_spinor_with_pulse, microwave_pulse, raman_pulse, raman_pulse_inverse, SpinorPotential,
};
pub use wavefunction::{SpinorState, Wavefunction};
