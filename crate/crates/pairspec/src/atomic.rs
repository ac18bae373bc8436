//! Zeeman and electric-quadrupole structure of the ⁴⁰Ca⁺ S₁/₂ and D₅/₂
//! manifolds, and the field sensitivities of coherences built from them.
//!
//! A [`Sublevel`] is one Zeeman substate |term, m⟩; a [`LevelPair`] is the
//! two sublevels of one ion that participate in a Ramsey coherence, together
//! with the derived frequency sensitivities
//!
//! - `zeeman_sensitivity`  — coherence shift per unit magnetic field, Hz/G,
//! - `quadrupole_sensitivity` — coherence shift per unit electric field
//!   gradient at the configured angle β, Hz/(V/mm²).
//!
//! Magnetic quantum numbers are stored as twice their value (`m_twice`) so
//! that half-integer arithmetic stays exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{
    BOHR_RADIUS_M, D_FIVE_HALF_LIFETIME_S, ELEMENTARY_CHARGE_C, G_D_FIVE_HALF, G_S_HALF,
    MU_B_HZ_PER_G, PLANCK_J_S,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtomicError {
    #[error("magnetic quantum number {m_twice}/2 invalid for a state with j = {j_twice}/2")]
    InvalidMagneticNumber { m_twice: i32, j_twice: i32 },
    #[error("decay rate must be non-negative, got {0}")]
    NegativeDecayRate(f64),
    #[error("a coherence requires two distinct sublevels")]
    IdenticalLevels,
}

/// Electronic term of a participating level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    SHalf,
    DFiveHalf,
}

impl Term {
    /// Twice the total angular momentum j.
    pub fn j_twice(self) -> i32 {
        match self {
            Term::SHalf => 1,
            Term::DFiveHalf => 5,
        }
    }

    /// Landé g-factor of the term.
    pub fn g_factor(self) -> f64 {
        match self {
            Term::SHalf => G_S_HALF,
            Term::DFiveHalf => G_D_FIVE_HALF,
        }
    }

    /// Spontaneous decay rate out of the spectroscopy manifold, 1/s.
    ///
    /// Zero for the ground state; 1/τ(D₅/₂) for the metastable state.
    pub fn default_decay_rate(self) -> f64 {
        match self {
            Term::SHalf => 0.0,
            Term::DFiveHalf => 1.0 / D_FIVE_HALF_LIFETIME_S,
        }
    }
}

/// One Zeeman sublevel |term, m⟩ of a single ion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sublevel {
    pub term: Term,
    /// Twice the magnetic quantum number m (odd integer, |m_twice| ≤ 2j).
    pub m_twice: i32,
    /// Landé g-factor, fixed by `term`.
    pub g_factor: f64,
    /// Spontaneous decay rate to the leak state, 1/s.
    pub decay_rate: f64,
}

impl Sublevel {
    /// Construct a sublevel with the term's default g-factor and decay rate.
    pub fn new(term: Term, m_twice: i32) -> Result<Self, AtomicError> {
        if m_twice.abs() > term.j_twice() || m_twice.rem_euclid(2) == 0 {
            return Err(AtomicError::InvalidMagneticNumber {
                m_twice,
                j_twice: term.j_twice(),
            });
        }
        Ok(Self {
            term,
            m_twice,
            g_factor: term.g_factor(),
            decay_rate: term.default_decay_rate(),
        })
    }

    /// S₁/₂ sublevel; `m_twice` is ±1.
    pub fn s_half(m_twice: i32) -> Result<Self, AtomicError> {
        Self::new(Term::SHalf, m_twice)
    }

    /// D₅/₂ sublevel with the default lifetime; `m_twice` is odd, |m_twice| ≤ 5.
    pub fn d_five_half(m_twice: i32) -> Result<Self, AtomicError> {
        Self::new(Term::DFiveHalf, m_twice)
    }

    /// Replace the decay rate (1/s).
    pub fn with_decay_rate(mut self, rate: f64) -> Result<Self, AtomicError> {
        if !(rate >= 0.0) {
            return Err(AtomicError::NegativeDecayRate(rate));
        }
        self.decay_rate = rate;
        Ok(self)
    }

    /// Replace the decay rate by 1/lifetime.
    pub fn with_lifetime(self, lifetime: f64) -> Result<Self, AtomicError> {
        self.with_decay_rate(1.0 / lifetime)
    }

    /// Magnetic quantum number m.
    pub fn m(&self) -> f64 {
        f64::from(self.m_twice) * 0.5
    }

    /// Linear Zeeman slope g·m·μ_B/h of this level, Hz/G.
    pub fn zeeman_slope(&self) -> f64 {
        self.g_factor * (f64::from(self.m_twice) * 0.5) * MU_B_HZ_PER_G
    }
}

/// First-order Zeeman shift of a sublevel in a field of `b_gauss`, Hz.
pub fn zeeman_shift(level: &Sublevel, b_gauss: f64) -> f64 {
    level.zeeman_slope() * b_gauss
}

/// Summed Zeeman slope of a set of levels occupied by one branch of a
/// two-ion state, Hz/G.
///
/// When all levels share the same g-factor the half-integer m's are summed
/// exactly before multiplying, so branches with equal Σm compare bit-for-bit
/// equal (the decoherence-free-subspace condition).
pub fn combined_zeeman_slope(levels: &[Sublevel]) -> f64 {
    let same_g = levels
        .windows(2)
        .all(|w| w[0].g_factor.to_bits() == w[1].g_factor.to_bits());
    if same_g && !levels.is_empty() {
        let m_sum: i32 = levels.iter().map(|l| l.m_twice).sum();
        levels[0].g_factor * (f64::from(m_sum) * 0.5) * MU_B_HZ_PER_G
    } else {
        levels.iter().map(Sublevel::zeeman_slope).sum()
    }
}

/// Static electric quadrupole field along the trap axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrupoleEnvironment {
    /// Electric field gradient dE_z/dz along the symmetry axis, V/mm².
    pub field_gradient: f64,
    /// Angle between the symmetry axis and the magnetic field, radians,
    /// normalized to [0, π/2].
    pub beta: f64,
    /// Quadrupole moment Θ(D, j)/h with the gradient unit folded in,
    /// Hz per (V/mm²).
    pub theta_moment: f64,
}

impl QuadrupoleEnvironment {
    /// `beta` is folded into [0, π/2]; the shift formula only depends on
    /// cos²β, which is symmetric about both 0 and π/2.
    pub fn new(field_gradient: f64, beta: f64, theta_moment: f64) -> Self {
        let mut b = beta.abs() % std::f64::consts::PI;
        if b > std::f64::consts::FRAC_PI_2 {
            b = std::f64::consts::PI - b;
        }
        Self {
            field_gradient,
            beta: b,
            theta_moment,
        }
    }

    /// Angular factor 3cos²β − 1.
    pub fn beta_factor(&self) -> f64 {
        3.0 * self.beta.cos().powi(2) - 1.0
    }
}

/// The angle β = arccos(1/√3) at which the quadrupole shift vanishes.
pub fn magic_angle() -> f64 {
    (1.0 / 3.0f64.sqrt()).acos()
}

/// Dimensionless m-dependence [j(j+1) − 3m²]/[j(2j−1)] of the quadrupole
/// shift; zero for S states, which carry no quadrupole moment here.
pub fn quadrupole_angular_factor(level: &Sublevel) -> f64 {
    if level.term != Term::DFiveHalf {
        return 0.0;
    }
    let j2 = i64::from(level.term.j_twice());
    let m2 = i64::from(level.m_twice);
    // j(j+1) - 3m² = (j2(j2+2) - 3 m2²)/4,  j(2j-1) = j2(j2-1)/2
    let numerator = (j2 * (j2 + 2) - 3 * m2 * m2) as f64 / 4.0;
    let denominator = (j2 * (j2 - 1)) as f64 / 2.0;
    numerator / denominator
}

/// Electric-quadrupole shift of a sublevel, Hz.
///
/// Evaluates (1/4)·(dE_z/dz)·Θ·[j(j+1)−3m²]/[j(2j−1)]·(3cos²β−1); S levels
/// return 0.
pub fn quadrupole_shift(level: &Sublevel, env: &QuadrupoleEnvironment) -> f64 {
    0.25 * env.field_gradient
        * env.theta_moment
        * quadrupole_angular_factor(level)
        * env.beta_factor()
}

/// The two sublevels of one ion participating in a Ramsey coherence,
/// with derived per-unit field sensitivities (upper minus lower).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPair {
    pub lower: Sublevel,
    pub upper: Sublevel,
    /// Coherence frequency shift per unit magnetic field, Hz/G.
    pub zeeman_sensitivity: f64,
    /// Coherence frequency shift per unit field gradient at the configured
    /// β, Hz/(V/mm²).
    pub quadrupole_sensitivity: f64,
    /// Whether the probe laser phase enters this coherence.
    pub laser_coupled: bool,
    /// Constant detuning ω_A − ω_L of the coherence, Hz.
    pub static_detuning: f64,
}

impl LevelPair {
    pub fn with_static_detuning(mut self, detuning_hz: f64) -> Self {
        self.static_detuning = detuning_hz;
        self
    }
}

/// Build a [`LevelPair`] from two distinct sublevels.
///
/// The Zeeman sensitivity is μ_B/h·(g_u·m_u − g_l·m_l); when both levels
/// share a term the difference of m's is taken exactly so that pairs with
/// equal Δm have bit-identical sensitivities. The quadrupole sensitivity is
/// the shift difference per unit gradient at the environment's β.
pub fn coherence_sensitivities(
    lower: Sublevel,
    upper: Sublevel,
    env: &QuadrupoleEnvironment,
    laser_coupled: bool,
) -> Result<LevelPair, AtomicError> {
    if lower.term == upper.term && lower.m_twice == upper.m_twice {
        return Err(AtomicError::IdenticalLevels);
    }
    let zeeman_sensitivity = if lower.term == upper.term {
        lower.g_factor * (f64::from(upper.m_twice - lower.m_twice) * 0.5) * MU_B_HZ_PER_G
    } else {
        (upper.g_factor * upper.m() - lower.g_factor * lower.m()) * MU_B_HZ_PER_G
    };
    let quadrupole_sensitivity = 0.25
        * env.theta_moment
        * env.beta_factor()
        * (quadrupole_angular_factor(&upper) - quadrupole_angular_factor(&lower));
    Ok(LevelPair {
        lower,
        upper,
        zeeman_sensitivity,
        quadrupole_sensitivity,
        laser_coupled,
        static_detuning: 0.0,
    })
}

/// Convert a quadrupole moment from Hz/(V/mm²) to SI units of C·m².
pub fn theta_moment_si(theta_hz_per_v_mm2: f64) -> f64 {
    theta_hz_per_v_mm2 * PLANCK_J_S * 1e-6
}

/// Convert a quadrupole moment from Hz/(V/mm²) to atomic units of e·a₀².
pub fn theta_moment_atomic(theta_hz_per_v_mm2: f64) -> f64 {
    theta_moment_si(theta_hz_per_v_mm2) / (ELEMENTARY_CHARGE_C * BOHR_RADIUS_M * BOHR_RADIUS_M)
}
