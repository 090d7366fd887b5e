//! Exact SI values of the physical constants used throughout the crate.

/// Planck constant in J·s.
pub const PLANCK_H: f64 = 6.626_070_15e-34;

/// Boltzmann constant in J/K.
pub const BOLTZMANN_K: f64 = 1.380_649e-23;

/// Reference temperature for noise figures, in kelvin.
pub const NOISE_REFERENCE_T0_K: f64 = 290.0;

/// Photon energy `h·f` expressed as a temperature `h·f/k_B`, in kelvin.
#[inline]
pub fn photon_energy_kelvin(frequency_hz: f64) -> f64 {
    PLANCK_H * frequency_hz / BOLTZMANN_K
}
