//! Linear-trap geometry: equilibrium separation of two ions and the
//! calibration of the axial electric field gradient from the axial frequency.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{ATOMIC_MASS_KG, ELEMENTARY_CHARGE_C, VACUUM_PERMITTIVITY_F_PER_M};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrapError {
    #[error("axial frequency must be > 0, got {0} Hz")]
    NonPositiveAxialFreq(f64),
    #[error("radial frequency ({radial} Hz) must exceed the axial frequency ({axial} Hz)")]
    RadialBelowAxial { radial: f64, axial: f64 },
    #[error("ion mass must be > 0, got {0} amu")]
    NonPositiveMass(f64),
}

/// Secular frequencies and ion mass of a linear trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Axial center-of-mass frequency ω_z/2π, Hz.
    pub axial_freq: f64,
    /// Radial frequency ω_⊥/2π, Hz.
    pub radial_freq: f64,
    /// Ion mass, atomic mass units.
    pub ion_mass_amu: f64,
}

impl TrapConfig {
    pub fn new(axial_freq: f64, radial_freq: f64, ion_mass_amu: f64) -> Result<Self, TrapError> {
        let cfg = Self {
            axial_freq,
            radial_freq,
            ion_mass_amu,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TrapError> {
        if !(self.axial_freq > 0.0) {
            return Err(TrapError::NonPositiveAxialFreq(self.axial_freq));
        }
        if !(self.radial_freq > self.axial_freq) {
            return Err(TrapError::RadialBelowAxial {
                radial: self.radial_freq,
                axial: self.axial_freq,
            });
        }
        if !(self.ion_mass_amu > 0.0) {
            return Err(TrapError::NonPositiveMass(self.ion_mass_amu));
        }
        Ok(())
    }

    fn mass_kg(&self) -> f64 {
        self.ion_mass_amu * ATOMIC_MASS_KG
    }
}

/// Equilibrium separation of two identical ions in the axial well, meters.
///
/// d = (e²/(2πε₀ m ω_z²))^(1/3), from balancing the Coulomb repulsion
/// against the harmonic confinement.
pub fn two_ion_distance(cfg: &TrapConfig) -> f64 {
    let omega = std::f64::consts::TAU * cfg.axial_freq;
    let e = ELEMENTARY_CHARGE_C;
    (e * e / (std::f64::consts::TAU * VACUUM_PERMITTIVITY_F_PER_M * cfg.mass_kg() * omega * omega))
        .cbrt()
}

/// Axial electric field gradient |dE_z/dz| implied by the axial frequency,
/// V/mm².
///
/// A single ion of charge e oscillating at ω_z sits in a potential with
/// curvature m·ω_z²/e; the value is converted from V/m² to V/mm².
pub fn gradient_from_axial_freq(cfg: &TrapConfig) -> f64 {
    let omega = std::f64::consts::TAU * cfg.axial_freq;
    cfg.mass_kg() * omega * omega / ELEMENTARY_CHARGE_C * 1e-6
}

/// Convenience mapping from trap tip voltage to axial frequency, Hz.
///
/// The axial frequency scales as √V; this anchors the curve to the measured
/// operating points 500 V ↔ 860 kHz and 2000 V ↔ 1720 kHz. The calibration
/// path of record is the axial frequency itself — this helper only exists to
/// express scan settings in electrode volts.
pub fn axial_freq_from_tip_voltage(tip_volts: f64) -> f64 {
    860e3 * (tip_volts / 500.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CA40_ION_MASS_AMU;
    use approx::assert_relative_eq;

    fn ca40(axial: f64) -> TrapConfig {
        TrapConfig::new(axial, 4.0e6, CA40_ION_MASS_AMU).unwrap()
    }

    #[test]
    fn spacing_reproduces_measured_range() {
        // 860 kHz → 6.2 µm and 1720 kHz → 3.9 µm, within 2 %
        assert_relative_eq!(two_ion_distance(&ca40(860e3)), 6.2e-6, max_relative = 0.02);
        assert_relative_eq!(two_ion_distance(&ca40(1720e3)), 3.9e-6, max_relative = 0.02);
    }

    #[test]
    fn spacing_power_law() {
        let d1 = two_ion_distance(&ca40(860e3));
        let d2 = two_ion_distance(&ca40(1720e3));
        assert_relative_eq!(d2 / d1, 2f64.powf(-2.0 / 3.0), max_relative = 1e-12);
    }

    #[test]
    fn spacing_cube_times_freq_squared_is_constant() {
        let reference = {
            let d = two_ion_distance(&ca40(1.0e6));
            d.powi(3) * (1.0e6f64).powi(2)
        };
        for i in 0..10 {
            let f = 600e3 + f64::from(i) * 150e3;
            let d = two_ion_distance(&ca40(f));
            assert_relative_eq!(d.powi(3) * f * f, reference, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_hand_evaluated() {
        // m(2π·10⁶)²/e = 16.367 V/mm² for ⁴⁰Ca⁺
        assert_relative_eq!(
            gradient_from_axial_freq(&ca40(1.0e6)),
            16.3666,
            max_relative = 1e-4
        );
    }

    #[test]
    fn gradient_consistency_chain() {
        // at 890 kHz the gradient times α = 2.977 Hz/(V/mm²) reproduces the
        // measured 38.6 Hz parity oscillation frequency
        let grad = gradient_from_axial_freq(&ca40(890e3));
        assert_relative_eq!(grad, 12.964, max_relative = 1e-3);
        assert_relative_eq!(grad * 2.977, 38.6, max_relative = 2e-3);
    }

    #[test]
    fn gradient_is_quadratic_and_increasing() {
        let g1 = gradient_from_axial_freq(&ca40(700e3));
        let g2 = gradient_from_axial_freq(&ca40(1400e3));
        assert_relative_eq!(g2 / g1, 4.0, max_relative = 1e-12);
        let mut last = 0.0;
        for i in 1..=10 {
            let g = gradient_from_axial_freq(&ca40(f64::from(i) * 200e3));
            assert!(g > last);
            last = g;
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert_eq!(
            TrapConfig::new(0.0, 4.0e6, 40.0).unwrap_err(),
            TrapError::NonPositiveAxialFreq(0.0)
        );
        assert!(matches!(
            TrapConfig::new(5.0e6, 4.0e6, 40.0).unwrap_err(),
            TrapError::RadialBelowAxial { .. }
        ));
        assert!(matches!(
            TrapConfig::new(1.0e6, 4.0e6, 0.0).unwrap_err(),
            TrapError::NonPositiveMass(_)
        ));
    }

    #[test]
    fn tip_voltage_mapping_hits_both_anchors() {
        assert_relative_eq!(axial_freq_from_tip_voltage(500.0), 860e3, max_relative = 1e-12);
        assert_relative_eq!(axial_freq_from_tip_voltage(2000.0), 1720e3, max_relative = 1e-12);
    }
}
