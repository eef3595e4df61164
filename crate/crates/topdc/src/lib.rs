//! Third-order parametric down-conversion in a microring resonator.
//!
//! Models a ring resonator side-coupled to a channel waveguide in which a
//! pump photon splits into three via the chi3 nonlinearity. Two schemes are
//! covered: the fully degenerate one (pump mode T at 3w decays into a photon
//! triplet in mode F at w) and the non-degenerate, seeded one (pump P at
//! 2w_G + w_S decays into a pair in G plus one photon in the seeded mode S).
//!
//! The crate computes conversion rates with their factor breakdowns, joint
//! spectral amplitudes of the generated pairs and triplets, Schmidt
//! decompositions of the pair spectra, and seeded-scan reconstructions of
//! the triplet spectrum from stimulated pair measurements.

pub mod analysis;
pub mod check;
pub mod config;
pub mod constants;
pub mod error;
pub mod output;
pub mod physics;
pub mod rates;
mod util;
pub mod wavefunction;

pub use error::{Error, Result};
