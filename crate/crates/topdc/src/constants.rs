//! Physical constants (CODATA 2018). Fixed; never user-configurable.

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054571817e-34;

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.8541878128e-12;
