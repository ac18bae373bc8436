//! Open-system dynamics of two three-level ions.
//!
//! Each ion is modeled on the basis {lower, upper, leaked}: the two
//! spectroscopy sublevels of its [`LevelPair`] plus one bookkeeping state
//! that collects population lost by spontaneous decay. The composite state
//! is a dense 9×9 density matrix with basis index `3·i₁ + i₂`.
//!
//! Operations are pure: every function returns a new [`TwoIonState`], so
//! per-shot pipelines can run in parallel with no shared mutable state.
//! Free evolution applies the per-ion phase
//!
//! ```text
//! exp(−i·2π·[static_detuning + quadrupole_sensitivity·E′
//!            + zeeman_sensitivity·(B₀ + δB) − laser_coupled·laser_freq]·τ)
//! ```
//!
//! to the upper level (δB entering through the noise draw's phase integral)
//! and amplitude-damps each metastable level into the ion's leak state.
//! Coherences to the leak states are never created.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atomic::{LevelPair, QuadrupoleEnvironment};
use crate::noise::ShotNoiseDraw;

/// Composite two-ion density matrix.
pub type DensityMatrix = SMatrix<Complex64, 9, 9>;
/// Pure composite state vector.
pub type StateVector = SVector<Complex64, 9>;

type Mat3 = SMatrix<Complex64, 3, 3>;

/// Per-ion basis indices.
pub const LOWER: usize = 0;
pub const UPPER: usize = 1;
pub const LEAKED: usize = 2;

/// Composite basis index of ion 1 in level `i1` and ion 2 in level `i2`.
pub const fn composite(i1: usize, i2: usize) -> usize {
    3 * i1 + i2
}

/// Coherences whose summed Zeeman sensitivity exceeds this magnitude (Hz/G)
/// are destroyed by [`collective_dephase`]; smaller sums count as
/// decoherence-free. The threshold sits twelve orders of magnitude below a
/// Bohr magneton so it only absorbs floating-point residue of exact
/// cancellations.
pub const COLLECTIVE_NULL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("pulse area must lie in (0, 2π], got {0}")]
    InvalidPulseArea(f64),
    #[error("state invariant violated: {0}")]
    InvalidState(String),
}

/// Which ion a pulse addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ion {
    One,
    Two,
}

/// A resonant rotation on one ion's {lower, upper} subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub target: Ion,
    /// Rotation angle, radians; π/2 for analysis pulses.
    pub area: f64,
    /// Rotation axis angle in the equatorial plane, radians.
    pub phase: f64,
}

impl PulseSpec {
    pub fn new(target: Ion, area: f64, phase: f64) -> Result<Self, DynamicsError> {
        if !(area > 0.0 && area <= std::f64::consts::TAU) {
            return Err(DynamicsError::InvalidPulseArea(area));
        }
        Ok(Self {
            target,
            area,
            phase,
        })
    }
}

/// Initial states the preparation stage can produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PrepKind {
    /// (|g e⟩ + e^(iφ)|e g⟩)/√2.
    Bell(f64),
    /// (|g⟩+|e⟩)⊗(|g⟩+|e⟩)/2.
    Product,
    /// |g g⟩.
    GroundGround,
}

/// Composite state of the two ions together with their level pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoIonState {
    pub rho: DensityMatrix,
    pub pair1: LevelPair,
    pub pair2: LevelPair,
}

impl TwoIonState {
    /// Build a state from a pure composite vector (normalized by the caller).
    pub fn from_pure(psi: &StateVector, pair1: LevelPair, pair2: LevelPair) -> Self {
        Self {
            rho: psi * psi.adjoint(),
            pair1,
            pair2,
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// tr(ρ²), 1 for pure states.
    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Overlap ⟨ψ|ρ|ψ⟩ with a pure state.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> f64 {
        (psi.adjoint() * self.rho * psi)[(0, 0)].re
    }

    /// Population currently in either ion's leak state.
    pub fn leaked_population(&self) -> f64 {
        (0..9)
            .filter(|&i| i / 3 == LEAKED || i % 3 == LEAKED)
            .map(|i| self.rho[(i, i)].re)
            .sum()
    }

    /// Check trace, hermiticity and positivity to the stated tolerances.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(DynamicsError::InvalidState(format!("trace = {tr}")));
        }
        let herm = (self.rho - self.rho.adjoint()).norm();
        if herm > 1e-12 {
            return Err(DynamicsError::InvalidState(format!(
                "hermiticity residual = {herm}"
            )));
        }
        let eigen = nalgebra::SymmetricEigen::new(self.rho);
        let min = eigen.eigenvalues.min();
        if min < -1e-10 {
            return Err(DynamicsError::InvalidState(format!(
                "negative eigenvalue {min}"
            )));
        }
        Ok(())
    }
}

/// Prepare one of the reference initial states on the given level pairs.
pub fn prepare(kind: PrepKind, pairs: (LevelPair, LevelPair)) -> TwoIonState {
    let mut psi = StateVector::zeros();
    match kind {
        PrepKind::Bell(phi) => {
            let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            psi[composite(LOWER, UPPER)] = amp;
            psi[composite(UPPER, LOWER)] = amp * Complex64::from_polar(1.0, phi);
        }
        PrepKind::Product => {
            let amp = Complex64::new(0.5, 0.0);
            psi[composite(LOWER, LOWER)] = amp;
            psi[composite(LOWER, UPPER)] = amp;
            psi[composite(UPPER, LOWER)] = amp;
            psi[composite(UPPER, UPPER)] = amp;
        }
        PrepKind::GroundGround => {
            psi[composite(LOWER, LOWER)] = Complex64::new(1.0, 0.0);
        }
    }
    TwoIonState::from_pure(&psi, pairs.0, pairs.1)
}

fn coherence_phase(pair: &LevelPair, wait: f64, draw: &ShotNoiseDraw, env: &QuadrupoleEnvironment, b0: f64) -> f64 {
    let laser = if pair.laser_coupled { draw.laser_freq } else { 0.0 };
    let detuning = pair.static_detuning
        + pair.quadrupole_sensitivity * env.field_gradient
        + pair.zeeman_sensitivity * b0
        - laser;
    std::f64::consts::TAU * (detuning * wait + pair.zeeman_sensitivity * draw.b_phase_integral)
}

/// Amplitude-damping Kraus operators for one ion: `p_lower`/`p_upper` are
/// the decay probabilities of the two spectroscopy levels into the leak.
fn damping_kraus(p_lower: f64, p_upper: f64) -> Vec<Mat3> {
    let mut k0 = Mat3::identity();
    k0[(LOWER, LOWER)] = Complex64::new((1.0 - p_lower).sqrt(), 0.0);
    k0[(UPPER, UPPER)] = Complex64::new((1.0 - p_upper).sqrt(), 0.0);
    let mut kraus = vec![k0];
    if p_lower > 0.0 {
        let mut k = Mat3::zeros();
        k[(LEAKED, LOWER)] = Complex64::new(p_lower.sqrt(), 0.0);
        kraus.push(k);
    }
    if p_upper > 0.0 {
        let mut k = Mat3::zeros();
        k[(LEAKED, UPPER)] = Complex64::new(p_upper.sqrt(), 0.0);
        kraus.push(k);
    }
    kraus
}

/// Free evolution for `wait` seconds under one noise realization.
///
/// Applies the coherence phase of each ion's pair to its upper level and
/// amplitude damping from every decaying level into the ion's leak state;
/// the trace is preserved.
pub fn evolve(
    state: &TwoIonState,
    wait: f64,
    draw: &ShotNoiseDraw,
    env: &QuadrupoleEnvironment,
    b0: f64,
) -> TwoIonState {
    debug_assert!(wait >= 0.0, "wait must be non-negative");
    let mut out = state.clone();
    if wait == 0.0 {
        return out;
    }

    // phase on the upper level of each ion (diagonal unitary, elementwise)
    let phi1 = coherence_phase(&state.pair1, wait, draw, env, b0);
    let phi2 = coherence_phase(&state.pair2, wait, draw, env, b0);
    let one = Complex64::new(1.0, 0.0);
    let u1 = [one, Complex64::from_polar(1.0, -phi1), one];
    let u2 = [one, Complex64::from_polar(1.0, -phi2), one];
    for a in 0..9 {
        for b in 0..9 {
            let ua = u1[a / 3] * u2[a % 3];
            let ub = u1[b / 3] * u2[b % 3];
            out.rho[(a, b)] *= ua * ub.conj();
        }
    }

    // spontaneous decay into the leak states
    let q = |rate: f64| 1.0 - (-rate * wait).exp();
    let p1 = (q(state.pair1.lower.decay_rate), q(state.pair1.upper.decay_rate));
    let p2 = (q(state.pair2.lower.decay_rate), q(state.pair2.upper.decay_rate));
    if p1.0 > 0.0 || p1.1 > 0.0 || p2.0 > 0.0 || p2.1 > 0.0 {
        let k1 = damping_kraus(p1.0, p1.1);
        let k2 = damping_kraus(p2.0, p2.1);
        let mut damped = DensityMatrix::zeros();
        for a in &k1 {
            for b in &k2 {
                let k = a.kronecker(b);
                damped += k * out.rho * k.adjoint();
            }
        }
        out.rho = damped;
    }
    out
}

/// Zeeman slope of each per-ion basis level, Hz/G (leak carries none).
fn level_slopes(pair: &LevelPair) -> [f64; 3] {
    [pair.lower.zeeman_slope(), pair.upper.zeeman_slope(), 0.0]
}

/// Destroy every coherence whose summed Zeeman sensitivity is nonzero.
///
/// This is the long-time limit of collective magnetic dephasing: an element
/// ρ_(a₁a₂),(b₁b₂) survives only if the two basis states shift identically
/// in a common field. Idempotent; decoherence-free coherences are untouched.
pub fn collective_dephase(state: &TwoIonState) -> TwoIonState {
    let s1 = level_slopes(&state.pair1);
    let s2 = level_slopes(&state.pair2);
    let mut out = state.clone();
    for a in 0..9 {
        for b in 0..9 {
            if a == b {
                continue;
            }
            let sensitivity = s1[a / 3] + s2[a % 3] - s1[b / 3] - s2[b % 3];
            if sensitivity.abs() > COLLECTIVE_NULL_TOLERANCE {
                out.rho[(a, b)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    out
}

/// Rotation exp(−i·area/2·(cosφ σ_x + sinφ σ_y)) on the {lower, upper}
/// subspace of the target ion; the leak state is untouched.
pub fn apply_pulse(state: &TwoIonState, pulse: &PulseSpec) -> TwoIonState {
    let c = Complex64::new((pulse.area / 2.0).cos(), 0.0);
    let ms = Complex64::new(0.0, -(pulse.area / 2.0).sin());
    let mut r = Mat3::identity();
    r[(LOWER, LOWER)] = c;
    r[(UPPER, UPPER)] = c;
    r[(LOWER, UPPER)] = ms * Complex64::from_polar(1.0, -pulse.phase);
    r[(UPPER, LOWER)] = ms * Complex64::from_polar(1.0, pulse.phase);
    let eye = Mat3::identity();
    let u = match pulse.target {
        Ion::One => r.kronecker(&eye),
        Ion::Two => eye.kronecker(&r),
    };
    TwoIonState {
        rho: u * state.rho * u.adjoint(),
        pair1: state.pair1,
        pair2: state.pair2,
    }
}

/// How leaked population appears to the fluorescence detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LeakDetection {
    /// Decayed population fluoresces like the lower ("S") outcome; the
    /// dipole cycle returns decayed ions to the ground state.
    #[default]
    AsLower,
    /// Decayed population counted with the upper ("D") outcome.
    AsUpper,
}

/// Joint detection probabilities over {SS, SD, DS, DD} with the default
/// leak mapping ([`LeakDetection::AsLower`]).
pub fn measure_probs(state: &TwoIonState) -> [f64; 4] {
    measure_probs_with(state, LeakDetection::AsLower)
}

/// Joint detection probabilities over {SS, SD, DS, DD}.
pub fn measure_probs_with(state: &TwoIonState, leak: LeakDetection) -> [f64; 4] {
    let upper_outcome = |idx: usize| match idx {
        UPPER => true,
        LEAKED => leak == LeakDetection::AsUpper,
        _ => false,
    };
    let mut probs = [0.0; 4];
    for i in 0..9 {
        let o1 = upper_outcome(i / 3) as usize;
        let o2 = upper_outcome(i % 3) as usize;
        probs[2 * o1 + o2] += state.rho[(i, i)].re;
    }
    probs
}

/// ⟨σ_z⊗σ_z⟩ from the four outcome probabilities (SS, DD → +1; SD, DS → −1).
pub fn parity_from_probs(probs: &[f64; 4]) -> f64 {
    probs[0] - probs[1] - probs[2] + probs[3]
}

/// Per-ion ⟨σ_z⟩ (upper = +1) from the four outcome probabilities.
pub fn single_ion_z_from_probs(probs: &[f64; 4]) -> (f64, f64) {
    (
        probs[2] + probs[3] - probs[0] - probs[1],
        probs[1] + probs[3] - probs[0] - probs[2],
    )
}
