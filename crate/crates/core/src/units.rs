//! Unit conventions.
//!
//! Energies are carried in meV and times in ps. Dynamics run with ħ = 1 in
//! units of rad/ps, so every energy is divided by [`HBAR_MEV_PS`] before it
//! reaches the integrator.

/// Reduced Planck constant in meV·ps.
pub const HBAR_MEV_PS: f64 = 0.658_211_956_9;

/// Energy in meV to angular frequency in rad/ps.
#[inline]
pub fn mev_to_rad_per_ps(e: f64) -> f64 {
    e / HBAR_MEV_PS
}

/// Rate in 1/ns to rate in 1/ps.
#[inline]
pub fn per_ns_to_per_ps(rate: f64) -> f64 {
    rate * 1e-3
}
