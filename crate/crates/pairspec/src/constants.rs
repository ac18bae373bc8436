//! Physical constants used throughout the crate.
//!
//! Frequencies are in Hz, magnetic fields in gauss, electric field gradients
//! in V/mm² and times in seconds unless a name says otherwise.

/// Bohr magneton divided by the Planck constant, in Hz per gauss.
pub const MU_B_HZ_PER_G: f64 = 1.399_625e6;

/// Landé g-factor of the ⁴⁰Ca⁺ 4s ²S₁/₂ ground state.
pub const G_S_HALF: f64 = 2.0023;

/// Landé g-factor of the ⁴⁰Ca⁺ 3d ²D₅/₂ metastable state.
pub const G_D_FIVE_HALF: f64 = 1.2;

/// Default lifetime of the D₅/₂ state, seconds.
pub const D_FIVE_HALF_LIFETIME_S: f64 = 1.16;

/// Elementary charge, coulomb.
pub const ELEMENTARY_CHARGE_C: f64 = 1.602_176_634e-19;

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY_F_PER_M: f64 = 8.854_187_812_8e-12;

/// Atomic mass unit, kg.
pub const ATOMIC_MASS_KG: f64 = 1.660_539_066_60e-27;

/// Nominal mass of a ⁴⁰Ca⁺ ion in atomic mass units (mass number).
pub const CA40_ION_MASS_AMU: f64 = 40.0;

/// Planck constant, J·s.
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

/// Bohr radius, m.
pub const BOHR_RADIUS_M: f64 = 5.291_772_109_03e-11;
