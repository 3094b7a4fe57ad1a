//! Physical constants (SI, CODATA 2018) and unit conventions.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Vacuum permeability, H/m.
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// Reduced Planck constant used in every cross-section formula.
pub const HBAR: f64 = 1.0;

/// Overall scale multiplying the 1D dressed propagator. The source term of the
/// vector Helmholtz operator carries mu_0; the scalar 1D kernel here is
/// normalised to a unit delta source instead, so the factor is 1.
pub const PROPAGATOR_SCALE: f64 = 1.0;

/// Human-readable description of the conventions, attached to output metadata.
pub const UNITS_CONVENTION: &str = "SI units; hbar = 1 in cross sections; \
frequency-domain propagators with the exp(-i omega t) factor removed; \
1D propagator normalised to a unit delta source (scale 1, mu_0 folded out)";
