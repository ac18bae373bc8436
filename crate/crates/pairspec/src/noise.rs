//! Seeded collective-noise generators.
//!
//! Every experimental shot draws its randomness from an independent child
//! stream derived from the model's master seed and the shot index, so the
//! result of a simulation is a pure function of (model, shot index) and
//! shots can be evaluated in parallel in any order.
//!
//! Substream derivation (fixed for reproducibility across implementations):
//! the child seed for shot `k` is the SplitMix64 output at position `k + 1`
//! of the sequence started at `master_seed`,
//!
//! ```text
//! z  = master_seed + (k + 1) · 0x9E3779B97F4A7C15   (mod 2⁶⁴)
//! z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9            (mod 2⁶⁴)
//! z ^= z >> 27;  z *= 0x94D049BB133111EB            (mod 2⁶⁴)
//! child = z ^ (z >> 31)
//! ```
//!
//! The child seed feeds a ChaCha8 stream from which the per-shot values are
//! drawn in a fixed order: (1) standard normal for the magnetic phase
//! integral, (2) standard normal for the laser frequency, (3) uniform for
//! the protocol phase φ_X, (4) uniform reserved for measurement sampling.
//! All four are drawn even when a noise amplitude is zero, so draws with
//! different noise settings stay aligned shot-for-shot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("{0} must be non-negative")]
    NegativeParameter(&'static str),
    #[error("correlation time must be > 0")]
    NonPositiveCorrelationTime,
    #[error("dephasing time is undefined for zero magnetic noise")]
    ZeroNoise,
}

/// Parametric collective noise acting identically on both ions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// RMS amplitude of the magnetic field fluctuation, gauss.
    pub b_rms: f64,
    /// Correlation time of the magnetic Ornstein-Uhlenbeck process, seconds.
    pub b_corr_time: f64,
    /// Gaussian FWHM of the probe laser line, Hz.
    pub laser_fwhm: f64,
    /// Deterministic laser detuning added to every shot, Hz.
    pub laser_offset: f64,
    /// Master seed from which all per-shot substreams derive.
    pub master_seed: u64,
}

impl NoiseModel {
    pub fn new(
        b_rms: f64,
        b_corr_time: f64,
        laser_fwhm: f64,
        laser_offset: f64,
        master_seed: u64,
    ) -> Result<Self, NoiseError> {
        let model = Self {
            b_rms,
            b_corr_time,
            laser_fwhm,
            laser_offset,
            master_seed,
        };
        model.validate()?;
        Ok(model)
    }

    /// A model with every stochastic amplitude set to zero.
    pub fn noiseless(master_seed: u64) -> Self {
        Self {
            b_rms: 0.0,
            b_corr_time: 1.0,
            laser_fwhm: 0.0,
            laser_offset: 0.0,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.b_rms >= 0.0) {
            return Err(NoiseError::NegativeParameter("b_rms"));
        }
        if !(self.b_corr_time > 0.0) {
            return Err(NoiseError::NonPositiveCorrelationTime);
        }
        if !(self.laser_fwhm >= 0.0) {
            return Err(NoiseError::NegativeParameter("laser_fwhm"));
        }
        Ok(())
    }

    /// Standard deviation of the quasi-static laser frequency error, Hz.
    pub fn laser_sigma(&self) -> f64 {
        self.laser_fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    /// The noise realization for one shot; a pure function of
    /// (master_seed, shot_index).
    pub fn draw_shot(&self, wait: f64, shot_index: u64) -> ShotNoiseDraw {
        self.draw_shot_with_measurement(wait, shot_index).0
    }

    /// Like [`NoiseModel::draw_shot`] but also returns the reserved uniform
    /// used by the sequencer to sample one measurement outcome.
    pub fn draw_shot_with_measurement(&self, wait: f64, shot_index: u64) -> (ShotNoiseDraw, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(self.master_seed, shot_index));
        let n_b: f64 = rng.sample(StandardNormal);
        let n_l: f64 = rng.sample(StandardNormal);
        let u_phase: f64 = rng.random();
        let u_meas: f64 = rng.random();
        let draw = ShotNoiseDraw {
            b_phase_integral: n_b * ou_integral_variance(self.b_rms, self.b_corr_time, wait).sqrt(),
            laser_freq: self.laser_offset + n_l * self.laser_sigma(),
            phi_x: std::f64::consts::TAU * u_phase,
        };
        (draw, u_meas)
    }
}

/// One shot's realization of the collective noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseDraw {
    /// ∫δB dt over the Ramsey wait, gauss·seconds.
    pub b_phase_integral: f64,
    /// Quasi-static laser frequency error for this shot (offset included), Hz.
    pub laser_freq: f64,
    /// Protocol randomization phase, uniform in [0, 2π).
    pub phi_x: f64,
}

/// SplitMix64 child seed for substream `stream` of `master_seed`.
pub fn child_seed(master_seed: u64, stream: u64) -> u64 {
    let mut z = master_seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Variance of the time integral ∫₀ᵀ x(t) dt of a stationary OU process
/// with variance `b_rms²` and correlation time `corr_time`:
///
/// Var = 2·b_rms²·t_c·(T − t_c·(1 − e^(−T/t_c)))
///
/// which approaches b_rms²·T² for T ≪ t_c (quasi-static) and
/// 2·b_rms²·t_c·T for T ≫ t_c (diffusive).
pub fn ou_integral_variance(b_rms: f64, corr_time: f64, wait: f64) -> f64 {
    if wait <= 0.0 || b_rms == 0.0 {
        return 0.0;
    }
    let x = wait / corr_time;
    let sigma2 = b_rms * b_rms;
    if x < 1e-4 {
        // series for x − (1 − e^(−x)) to avoid cancellation
        sigma2 * wait * wait * (1.0 - x / 3.0 + x * x / 12.0)
    } else {
        2.0 * sigma2 * corr_time * (wait - corr_time * (-(-x).exp_m1()))
    }
}

/// Time at which a single-ion coherence of the given Zeeman sensitivity has
/// decayed to 1/e contrast under the configured OU magnetic noise, seconds.
///
/// The ensemble-averaged contrast is exp(−(2π·s)²·Var[∫δB]/2); the 1/e time
/// solves (2π·s)²·Var(t) = 2. In the quasi-static limit t ≪ t_c this reduces
/// to √2/(2π·s·b_rms). A coherence with zero sensitivity never dephases and
/// returns `f64::INFINITY`.
pub fn single_ion_dephasing_time(
    model: &NoiseModel,
    zeeman_sensitivity: f64,
) -> Result<f64, NoiseError> {
    if model.b_rms == 0.0 {
        return Err(NoiseError::ZeroNoise);
    }
    let s = zeeman_sensitivity.abs();
    if s == 0.0 {
        return Ok(f64::INFINITY);
    }
    let k = (std::f64::consts::TAU * s).powi(2);
    let target = 2.0 / k;
    // quasi-static guess, then expand the bracket and bisect
    let mut hi = std::f64::consts::SQRT_2 / (std::f64::consts::TAU * s * model.b_rms);
    while ou_integral_variance(model.b_rms, model.b_corr_time, hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ou_integral_variance(model.b_rms, model.b_corr_time, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
