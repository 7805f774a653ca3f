//! Finite-band fermionic environments for open-system dynamics: spectral
//! density transformations, chain mappings, a universal Markovian closure,
//! and a quadratic (Gaussian) Lindblad evolution engine.

// `!(x > 0.0)` is used deliberately throughout input validation so that
// NaN arguments fail the check along with non-positive ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chainmap;
pub mod closure;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod linalg;
pub mod quad;
pub mod specdens;

pub use error::{Error, Result};
pub use specdens::{
    fermi_occupation, majorana_extend, merge_environments, szego_diagnostic, tcsm_modulate,
    thermofield_couplings, Interval, InverseTemperature, LeadSpec, ModulatedPair,
    SpectralDensity, SzegoReport,
};
