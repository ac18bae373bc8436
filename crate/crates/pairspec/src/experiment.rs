//! Ramsey/parity sequencer.
//!
//! A [`RamseyPlan`] schedules prepare → wait → analysis pulses → measurement
//! over a wait-time or analysis-phase grid, draws one noise realization and
//! one measurement outcome per shot, and aggregates parity and single-ion
//! means. Shot `s` of scan point `p` uses the noise substream
//! `p·shots_per_point + s`, so traces are identical for any execution order
//! or thread count.
//!
//! Phase conventions: analysis pulses are π/2 rotations whose rotation phase
//! is referenced to the idealized preparation pulse. Preparing (|g⟩+|e⟩)/√2
//! corresponds to a first pulse of rotation phase π/2, so the Ramsey phase
//! φₙ of ion n maps to rotation phase φₙ + π/2. With this reference a
//! product state yields the parity
//!
//! ```text
//! ⟨σ_z⁽¹⁾σ_z⁽²⁾⟩ = ⟨cos(ψ₁+φ₁)·cos(ψ₂+φ₂)⟩
//!               = ½(⟨cos(ψ₁+ψ₂+φ₁+φ₂)⟩ + ⟨cos(ψ₁−ψ₂+φ₁−φ₂)⟩)
//! ```
//!
//! with ψₙ the accumulated coherence phase of ion n, which is the working
//! form of the laser/magnetic noise separation: common-mode laser phase
//! enters the sum term doubled, anti-symmetric magnetic phase enters the
//! difference term. The randomized policies scramble one of the two terms
//! with the uniform per-shot phase φ_X.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{fit_damped_sinusoid, FitError, FitResult};
use crate::atomic::{LevelPair, QuadrupoleEnvironment};
use crate::dynamics::{
    apply_pulse, collective_dephase, evolve, measure_probs, prepare, Ion, PrepKind, PulseSpec,
    COLLECTIVE_NULL_TOLERANCE,
};
use crate::noise::{ou_integral_variance, NoiseModel};

/// Rotation phase of the implicit preparation pulse; analysis pulse phases
/// are measured relative to it.
const ANALYSIS_REFERENCE_PHASE: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    Config(String),
    #[error("scan point index {0} out of range")]
    PointOutOfRange(usize),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Initial state of a Ramsey sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    /// (|g e⟩ + e^(iφ)|e g⟩)/√2.
    Bell(f64),
    /// The pure product of two equal superpositions.
    Product,
    /// The product state after full collective dephasing.
    DephasedProduct,
}

/// What the scan steps through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scan {
    /// Ramsey wait times, seconds.
    WaitScan(Vec<f64>),
    /// Analysis phases (radians) at a fixed wait time.
    PhaseScan { phases: Vec<f64>, wait: f64 },
}

/// How the two analysis-pulse phases are chosen.
///
/// In a phase scan the scanned value is added to φ₁ (fixed policy) or to φ₀
/// (randomized policies).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePolicy {
    /// Deterministic phases (φ₁, φ₂).
    Fixed { phi1: f64, phi2: f64 },
    /// φ₁ = φ₀ + φ_X, φ₂ = −φ_X: magnetic term averaged out, laser term kept.
    RandomizedLaserSensitive { phi0: f64 },
    /// φ₁ = φ₀ + φ_X, φ₂ = +φ_X: laser term averaged out, magnetic term kept.
    RandomizedBFieldSensitive { phi0: f64 },
}

impl PhasePolicy {
    fn resolve(&self, scan_phase: f64, phi_x: f64) -> (f64, f64) {
        match *self {
            PhasePolicy::Fixed { phi1, phi2 } => (phi1 + scan_phase, phi2),
            PhasePolicy::RandomizedLaserSensitive { phi0 } => (phi0 + scan_phase + phi_x, -phi_x),
            PhasePolicy::RandomizedBFieldSensitive { phi0 } => (phi0 + scan_phase + phi_x, phi_x),
        }
    }
}

/// A full two-ion Ramsey experiment schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyPlan {
    pub preparation: Preparation,
    pub pairs: (LevelPair, LevelPair),
    pub scan: Scan,
    pub phase_policy: PhasePolicy,
    pub shots_per_point: u32,
    pub noise: NoiseModel,
    pub env: QuadrupoleEnvironment,
    /// Static magnetic field, gauss.
    pub b0: f64,
}

/// One scan point resolved to (abscissa, wait, scanned phase offset).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub abscissa: f64,
    pub wait: f64,
    pub scan_phase: f64,
}

impl RamseyPlan {
    pub fn points(&self) -> Vec<ScanPoint> {
        match &self.scan {
            Scan::WaitScan(waits) => waits
                .iter()
                .map(|&w| ScanPoint {
                    abscissa: w,
                    wait: w,
                    scan_phase: 0.0,
                })
                .collect(),
            Scan::PhaseScan { phases, wait } => phases
                .iter()
                .map(|&p| ScanPoint {
                    abscissa: p,
                    wait: *wait,
                    scan_phase: p,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.shots_per_point < 1 {
            return Err(ExperimentError::Config(
                "shots_per_point must be at least 1".into(),
            ));
        }
        let points = self.points();
        if points.is_empty() {
            return Err(ExperimentError::Config("scan grid is empty".into()));
        }
        if points.iter().any(|p| !(p.wait >= 0.0) || !p.wait.is_finite()) {
            return Err(ExperimentError::Config(
                "scan wait times must be finite and non-negative".into(),
            ));
        }
        self.noise
            .validate()
            .map_err(|e| ExperimentError::Config(format!("noise: {e}")))?;
        if matches!(self.phase_policy, PhasePolicy::RandomizedLaserSensitive { .. })
            && !self.pairs.0.laser_coupled
            && !self.pairs.1.laser_coupled
        {
            return Err(ExperimentError::Config(
                "phase_policy: a laser-sensitive protocol needs at least one laser-coupled pair"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Aggregated outcomes of one scan point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityTrace {
    /// Wait time (seconds) or analysis phase (radians), per the scan.
    pub abscissa: f64,
    pub parity_mean: f64,
    /// Sample standard deviation over shots divided by √shots.
    pub parity_stderr: f64,
    /// ⟨σ_z⁽¹⁾⟩ and ⟨σ_z⁽²⁾⟩ (upper level = +1, leak detects as lower).
    pub single_ion_means: (f64, f64),
    pub shots: u32,
}

fn sample_outcome(probs: &[f64; 4], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p.max(0.0);
        if u < acc {
            return k;
        }
    }
    3
}

/// parity, σ_z⁽¹⁾, σ_z⁽²⁾ of one sampled shot, each ±1.
fn run_shot(plan: &RamseyPlan, point: &ScanPoint, shot_index: u64) -> (i64, i64, i64) {
    let (draw, u_meas) = plan.noise.draw_shot_with_measurement(point.wait, shot_index);
    let (phi1, phi2) = plan.phase_policy.resolve(point.scan_phase, draw.phi_x);

    let state = match plan.preparation {
        Preparation::Bell(phi) => prepare(PrepKind::Bell(phi), plan.pairs),
        Preparation::Product => prepare(PrepKind::Product, plan.pairs),
        Preparation::DephasedProduct => collective_dephase(&prepare(PrepKind::Product, plan.pairs)),
    };
    let state = evolve(&state, point.wait, &draw, &plan.env, plan.b0);
    let state = apply_pulse(
        &state,
        &PulseSpec {
            target: Ion::One,
            area: std::f64::consts::FRAC_PI_2,
            phase: phi1 + ANALYSIS_REFERENCE_PHASE,
        },
    );
    let state = apply_pulse(
        &state,
        &PulseSpec {
            target: Ion::Two,
            area: std::f64::consts::FRAC_PI_2,
            phase: phi2 + ANALYSIS_REFERENCE_PHASE,
        },
    );
    let outcome = sample_outcome(&measure_probs(&state), u_meas);
    let z1 = if outcome >= 2 { 1 } else { -1 };
    let z2 = if outcome % 2 == 1 { 1 } else { -1 };
    (z1 * z2, z1, z2)
}

/// Execute the plan: N sampled shots per scan point, aggregated into one
/// [`ParityTrace`] per point. Deterministic in the plan's master seed.
pub fn run_plan(plan: &RamseyPlan) -> Result<Vec<ParityTrace>, ExperimentError> {
    plan.validate()?;
    let shots = plan.shots_per_point;
    let traces = plan
        .points()
        .iter()
        .enumerate()
        .map(|(p_idx, point)| {
            let base = p_idx as u64 * u64::from(shots);
            // integer sums make the aggregation exact and order-independent
            let (parity_sum, z1_sum, z2_sum) = (0..shots)
                .into_par_iter()
                .map(|s| run_shot(plan, point, base + u64::from(s)))
                .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
            let n = f64::from(shots);
            let mean = parity_sum as f64 / n;
            let stderr = if shots > 1 {
                ((1.0 - mean * mean).max(0.0) / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            ParityTrace {
                abscissa: point.abscissa,
                parity_mean: mean,
                parity_stderr: stderr,
                single_ion_means: (z1_sum as f64 / n, z2_sum as f64 / n),
                shots,
            }
        })
        .collect();
    Ok(traces)
}

/// Per-ion ingredients of the analytic parity formula.
struct IonTerms {
    /// Deterministic detuning entering the coherence phase, Hz.
    det: f64,
    /// Zeeman sensitivity, Hz/G.
    zs: f64,
    /// 1 if the laser phase enters the coherence.
    lc: f64,
    /// Coherence survival factor e^(−(Γ_g+Γ_e)τ/2).
    eta: f64,
    /// Leak probability ½(q_g + q_e).
    leak: f64,
    /// Decay probabilities of (lower, upper).
    q: (f64, f64),
}

fn ion_terms(pair: &LevelPair, env: &QuadrupoleEnvironment, b0: f64, laser_offset: f64, tau: f64) -> IonTerms {
    let lc = if pair.laser_coupled { 1.0 } else { 0.0 };
    let det = pair.static_detuning + pair.quadrupole_sensitivity * env.field_gradient
        + pair.zeeman_sensitivity * b0
        - lc * laser_offset;
    let qg = 1.0 - (-pair.lower.decay_rate * tau).exp();
    let qe = 1.0 - (-pair.upper.decay_rate * tau).exp();
    IonTerms {
        det,
        zs: pair.zeeman_sensitivity,
        lc,
        eta: (-(pair.lower.decay_rate + pair.upper.decay_rate) * tau / 2.0).exp(),
        leak: 0.5 * (qg + qe),
        q: (qg, qe),
    }
}

/// One noise-averaged cosine term of the parity signal.
struct OscTerm {
    amp: f64,
    /// Deterministic phase excluding the analysis-pulse phases.
    mean: f64,
    /// Variance of the Gaussian phase fluctuations.
    var: f64,
    /// Coefficients of φ₁ and φ₂ in the argument.
    a: (f64, f64),
    /// Summed Zeeman sensitivity of the underlying coherence, Hz/G
    /// (decides survival of explicit collective dephasing).
    zeeman_coef: f64,
}

fn gaussian_phase_var(zs: f64, lc: f64, tau: f64, v_integral: f64, laser_sigma: f64) -> f64 {
    let tau_2pi = std::f64::consts::TAU;
    (tau_2pi * zs).powi(2) * v_integral + (tau_2pi * lc * tau * laser_sigma).powi(2)
}

/// Noise-averaged parity of one scan point, evaluated in closed form.
///
/// For product preparations this is the two-term cosine average quoted in
/// the module docs (decay factors and the leak baseline included); for the
/// randomized policies the φ_X-dependent terms vanish identically, leaving
/// (1/2)·⟨cos(2φ_L + φ₀)⟩ for the laser-sensitive protocol. Kept
/// independent of the density-matrix path so the two can cross-check.
pub fn expected_parity(plan: &RamseyPlan, point_index: usize) -> Result<f64, ExperimentError> {
    plan.validate()?;
    let points = plan.points();
    let point = points
        .get(point_index)
        .ok_or(ExperimentError::PointOutOfRange(point_index))?;
    let tau = point.wait;
    let i1 = ion_terms(&plan.pairs.0, &plan.env, plan.b0, plan.noise.laser_offset, tau);
    let i2 = ion_terms(&plan.pairs.1, &plan.env, plan.b0, plan.noise.laser_offset, tau);
    let v_int = ou_integral_variance(plan.noise.b_rms, plan.noise.b_corr_time, tau);
    let sig_f = plan.noise.laser_sigma();
    let tau_2pi = std::f64::consts::TAU;

    let mut terms: Vec<OscTerm> = Vec::new();
    let constant;
    match plan.preparation {
        Preparation::Bell(phi_bell) => {
            terms.push(OscTerm {
                amp: i1.eta * i2.eta,
                mean: tau_2pi * (i1.det - i2.det) * tau - phi_bell,
                var: gaussian_phase_var(i1.zs - i2.zs, i1.lc - i2.lc, tau, v_int, sig_f),
                a: (1.0, -1.0),
                zeeman_coef: i1.zs - i2.zs,
            });
            constant = 0.5 * (i1.q.0 * i2.q.1 + i1.q.1 * i2.q.0);
        }
        Preparation::Product | Preparation::DephasedProduct => {
            terms.push(OscTerm {
                amp: 0.5 * i1.eta * i2.eta,
                mean: tau_2pi * (i1.det + i2.det) * tau,
                var: gaussian_phase_var(i1.zs + i2.zs, i1.lc + i2.lc, tau, v_int, sig_f),
                a: (1.0, 1.0),
                zeeman_coef: i1.zs + i2.zs,
            });
            terms.push(OscTerm {
                amp: 0.5 * i1.eta * i2.eta,
                mean: tau_2pi * (i1.det - i2.det) * tau,
                var: gaussian_phase_var(i1.zs - i2.zs, i1.lc - i2.lc, tau, v_int, sig_f),
                a: (1.0, -1.0),
                zeeman_coef: i1.zs - i2.zs,
            });
            terms.push(OscTerm {
                amp: -i1.eta * i2.leak,
                mean: tau_2pi * i1.det * tau,
                var: gaussian_phase_var(i1.zs, i1.lc, tau, v_int, sig_f),
                a: (1.0, 0.0),
                zeeman_coef: i1.zs,
            });
            terms.push(OscTerm {
                amp: -i2.eta * i1.leak,
                mean: tau_2pi * i2.det * tau,
                var: gaussian_phase_var(i2.zs, i2.lc, tau, v_int, sig_f),
                a: (0.0, 1.0),
                zeeman_coef: i2.zs,
            });
            constant = i1.leak * i2.leak;
            if matches!(plan.preparation, Preparation::DephasedProduct) {
                terms.retain(|t| t.zeeman_coef.abs() <= COLLECTIVE_NULL_TOLERANCE);
            }
        }
    }

    let mut parity = constant;
    for term in &terms {
        let value = match plan.phase_policy {
            PhasePolicy::Fixed { phi1, phi2 } => {
                let arg = term.mean + term.a.0 * (phi1 + point.scan_phase) + term.a.1 * phi2;
                term.amp * (-term.var / 2.0).exp() * arg.cos()
            }
            PhasePolicy::RandomizedLaserSensitive { phi0 } => {
                // φ_X coefficient a₁ − a₂ must vanish for the term to survive
                if (term.a.0 - term.a.1).abs() > 1e-9 {
                    0.0
                } else {
                    let arg = term.mean + term.a.0 * (phi0 + point.scan_phase);
                    term.amp * (-term.var / 2.0).exp() * arg.cos()
                }
            }
            PhasePolicy::RandomizedBFieldSensitive { phi0 } => {
                if (term.a.0 + term.a.1).abs() > 1e-9 {
                    0.0
                } else {
                    let arg = term.mean + term.a.0 * (phi0 + point.scan_phase);
                    term.amp * (-term.var / 2.0).exp() * arg.cos()
                }
            }
        };
        parity += value;
    }
    Ok(parity)
}

/// Noise-averaged ⟨σ_z⟩ of one ion at one scan point.
///
/// Under either randomized policy the coherent fringe averages to zero
/// exactly and only the leak baseline −L remains.
pub fn expected_single_ion(
    plan: &RamseyPlan,
    point_index: usize,
    ion: Ion,
) -> Result<f64, ExperimentError> {
    plan.validate()?;
    let points = plan.points();
    let point = points
        .get(point_index)
        .ok_or(ExperimentError::PointOutOfRange(point_index))?;
    let tau = point.wait;
    let pair = match ion {
        Ion::One => &plan.pairs.0,
        Ion::Two => &plan.pairs.1,
    };
    let terms = ion_terms(pair, &plan.env, plan.b0, plan.noise.laser_offset, tau);
    // DephasedProduct destroys magnetically sensitive single-ion coherences
    let dephased_away = matches!(plan.preparation, Preparation::DephasedProduct)
        && terms.zs.abs() > COLLECTIVE_NULL_TOLERANCE;
    let fringe = match plan.phase_policy {
        PhasePolicy::Fixed { phi1, phi2 } => {
            if matches!(plan.preparation, Preparation::Bell(_)) {
                // a Bell state has no single-ion coherence
                0.0
            } else if dephased_away {
                0.0
            } else {
                let v_int = ou_integral_variance(plan.noise.b_rms, plan.noise.b_corr_time, tau);
                let var = gaussian_phase_var(terms.zs, terms.lc, tau, v_int, plan.noise.laser_sigma());
                let phi = match ion {
                    Ion::One => phi1 + point.scan_phase,
                    Ion::Two => phi2,
                };
                terms.eta
                    * (-var / 2.0).exp()
                    * (std::f64::consts::TAU * terms.det * tau + phi).cos()
            }
        }
        // every single-ion coherence carries φ_X and averages out
        PhasePolicy::RandomizedLaserSensitive { .. }
        | PhasePolicy::RandomizedBFieldSensitive { .. } => 0.0,
    };
    Ok(fringe - terms.leak)
}

/// Configuration of a magnetic-field-gradient measurement: both ions carry
/// the same level pair and see opposite field offsets ±ΔB/2 from the
/// gradient across their separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientScenario {
    /// Field gradient along the trap axis, G/m.
    pub db_per_dz: f64,
    /// Ion separation, m.
    pub distance: f64,
    pub pair: LevelPair,
    pub waits: Vec<f64>,
    pub shots_per_point: u32,
    pub noise: NoiseModel,
    pub b0: f64,
}

#[derive(Debug, Clone)]
pub struct GradientOutcome {
    pub traces: Vec<ParityTrace>,
    pub fit: FitResult,
    /// Parity frequency dν/dB·ΔB implied by the configuration, Hz.
    pub analytic_frequency: f64,
}

/// Run the gradient measurement and extract the parity frequency.
///
/// The emitted traces are the raw parity data. For the frequency fit the
/// deterministic leak baseline L₁(t)·L₂(t) (decayed population detecting as
/// the lower outcome on both ions) is removed first; over waits approaching
/// the D-state lifetime the offset-free sinusoid model would otherwise
/// absorb the rising baseline into a frequency bias.
pub fn gradient_scenario(cfg: &GradientScenario) -> Result<GradientOutcome, ExperimentError> {
    let delta_b = cfg.db_per_dz * cfg.distance;
    let zs = cfg.pair.zeeman_sensitivity;
    let pair1 = cfg
        .pair
        .with_static_detuning(cfg.pair.static_detuning - zs * delta_b / 2.0);
    let pair2 = cfg
        .pair
        .with_static_detuning(cfg.pair.static_detuning + zs * delta_b / 2.0);
    let plan = RamseyPlan {
        preparation: Preparation::DephasedProduct,
        pairs: (pair1, pair2),
        scan: Scan::WaitScan(cfg.waits.clone()),
        phase_policy: PhasePolicy::Fixed { phi1: 0.0, phi2: 0.0 },
        shots_per_point: cfg.shots_per_point,
        noise: cfg.noise,
        env: QuadrupoleEnvironment::new(0.0, 0.0, 0.0),
        b0: cfg.b0,
    };
    let traces = run_plan(&plan)?;
    let leak = |pair: &LevelPair, t: f64| {
        let qg = 1.0 - (-pair.lower.decay_rate * t).exp();
        let qe = 1.0 - (-pair.upper.decay_rate * t).exp();
        0.5 * (qg + qe)
    };
    let corrected: Vec<ParityTrace> = traces
        .iter()
        .map(|t| ParityTrace {
            parity_mean: t.parity_mean - leak(&pair1, t.abscissa) * leak(&pair2, t.abscissa),
            ..*t
        })
        .collect();
    let fit = fit_damped_sinusoid(&corrected, 0.0)?;
    Ok(GradientOutcome {
        traces,
        fit,
        analytic_frequency: (zs * delta_b).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::{coherence_sensitivities, Sublevel};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn no_quad() -> QuadrupoleEnvironment {
        QuadrupoleEnvironment::new(0.0, 0.0, 0.0)
    }

    fn sd_pair(detuning: f64) -> LevelPair {
        coherence_sensitivities(
            Sublevel::s_half(1).unwrap(),
            Sublevel::d_five_half(5).unwrap().with_decay_rate(0.0).unwrap(),
            &no_quad(),
            true,
        )
        .unwrap()
        .with_static_detuning(detuning)
    }

    fn base_plan(preparation: Preparation, scan: Scan, policy: PhasePolicy) -> RamseyPlan {
        RamseyPlan {
            preparation,
            pairs: (sd_pair(0.0), sd_pair(0.0)),
            scan,
            phase_policy: policy,
            shots_per_point: 200,
            noise: NoiseModel::noiseless(11),
            env: no_quad(),
            b0: 0.0,
        }
    }

    #[test]
    fn bell_state_at_zero_wait_has_unit_parity() {
        let plan = base_plan(
            Preparation::Bell(0.0),
            Scan::WaitScan(vec![0.0]),
            PhasePolicy::Fixed { phi1: 0.0, phi2: 0.0 },
        );
        let traces = run_plan(&plan).unwrap();
        assert_eq!(traces[0].parity_mean, 1.0);
        assert_eq!(traces[0].parity_stderr, 0.0);
        assert_eq!(traces[0].shots, 200);
        assert_relative_eq!(expected_parity(&plan, 0).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn dephased_product_has_half_parity() {
        let plan = base_plan(
            Preparation::DephasedProduct,
            Scan::WaitScan(vec![0.0]),
            PhasePolicy::Fixed { phi1: 0.0, phi2: 0.0 },
        );
        assert_relative_eq!(expected_parity(&plan, 0).unwrap(), 0.5, max_relative = 1e-12);
        let mut mc = plan.clone();
        mc.shots_per_point = 4000;
        let trace = &run_plan(&mc).unwrap()[0];
        assert!(
            (trace.parity_mean - 0.5).abs() < 4.0 * trace.parity_stderr.max(1e-3),
            "MC parity {} vs analytic 0.5",
            trace.parity_mean
        );
    }

    #[test]
    fn randomized_laser_protocol_at_pi_gives_minus_half() {
        let plan = base_plan(
            Preparation::Product,
            Scan::WaitScan(vec![0.0]),
            PhasePolicy::RandomizedLaserSensitive { phi0: std::f64::consts::PI },
        );
        assert_relative_eq!(expected_parity(&plan, 0).unwrap(), -0.5, max_relative = 1e-12);
        let trace = &run_plan(&plan).unwrap()[0];
        assert!((trace.parity_mean + 0.5).abs() < 4.0 * trace.parity_stderr);
    }

    #[test]
    fn all_deterministic_phases_zero_gives_unit_parity() {
        let plan = base_plan(
            Preparation::Product,
            Scan::WaitScan(vec![0.0]),
            PhasePolicy::Fixed { phi1: 0.0, phi2: 0.0 },
        );
        assert_relative_eq!(expected_parity(&plan, 0).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn laser_policy_requires_laser_coupled_pair() {
        let mut plan = base_plan(
            Preparation::Product,
            Scan::WaitScan(vec![0.0]),
            PhasePolicy::RandomizedLaserSensitive { phi0: 0.0 },
        );
        plan.pairs.0.laser_coupled = false;
        plan.pairs.1.laser_coupled = false;
        assert!(matches!(run_plan(&plan), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn empty_grid_and_zero_shots_are_rejected() {
        let plan = base_plan(
            Preparation::Product,
            Scan::WaitScan(vec![]),
            PhasePolicy::Fixed { phi1: 0.0, phi2: 0.0 },
        );
        assert!(matches!(run_plan(&plan), Err(ExperimentError::Config(_))));
        let mut plan = base_plan(
            Preparation::Product,
            Scan::WaitScan(vec![0.0]),
            PhasePolicy::Fixed { phi1: 0.0, phi2: 0.0 },
        );
        plan.shots_per_point = 0;
        assert!(matches!(run_plan(&plan), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn runs_are_reproducible() {
        let mut plan = base_plan(
            Preparation::Product,
            Scan::WaitScan(vec![0.0, 1e-3, 2e-3]),
            PhasePolicy::RandomizedLaserSensitive { phi0: 0.4 },
        );
        plan.noise = NoiseModel::new(2e-6, 0.01, 30.0, 0.0, 99).unwrap();
        let a = run_plan(&plan).unwrap();
        let b = run_plan(&plan).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn swapping_ion_labels_leaves_symmetric_parity_invariant() {
        let mut plan = base_plan(
            Preparation::DephasedProduct,
            Scan::WaitScan(vec![0.0, 2e-3, 5e-3, 9e-3]),
            PhasePolicy::Fixed { phi1: 0.7, phi2: 0.7 },
        );
        plan.pairs = (sd_pair(40.0), sd_pair(-15.0));
        plan.noise = NoiseModel::new(1e-6, 0.02, 20.0, 0.0, 5).unwrap();
        let forward = run_plan(&plan).unwrap();
        let mut swapped = plan.clone();
        swapped.pairs = (plan.pairs.1, plan.pairs.0);
        let backward = run_plan(&swapped).unwrap();
        // the parity of each shot is invariant under the relabeling, so the
        // traces agree exactly; individual σ_z outcomes only agree in
        // distribution (the shared uniform can fall on a SD/DS boundary)
        for (f, b) in forward.iter().zip(&backward) {
            assert_eq!(f.parity_mean, b.parity_mean);
            assert_eq!(f.parity_stderr, b.parity_stderr);
            let bound = 8.0 / (f64::from(f.shots)).sqrt();
            assert!((f.single_ion_means.0 - b.single_ion_means.1).abs() < bound);
            assert!((f.single_ion_means.1 - b.single_ion_means.0).abs() < bound);
        }
    }

    #[test]
    fn phase_scan_fringe_matches_expected_parity() {
        let phases: Vec<f64> = (0..12).map(|i| f64::from(i) * std::f64::consts::TAU / 12.0).collect();
        let mut plan = base_plan(
            Preparation::Bell(0.3),
            Scan::PhaseScan { phases, wait: 0.0 },
            PhasePolicy::Fixed { phi1: 0.0, phi2: 0.0 },
        );
        plan.shots_per_point = 3000;
        let traces = run_plan(&plan).unwrap();
        for (idx, trace) in traces.iter().enumerate() {
            let analytic = expected_parity(&plan, idx).unwrap();
            assert!(
                (trace.parity_mean - analytic).abs() < 4.0 * trace.parity_stderr.max(5e-3),
                "phase point {idx}: MC {} vs analytic {analytic}",
                trace.parity_mean
            );
        }
    }

    #[test]
    fn gradient_scenario_recovers_configured_beat() {
        let waits: Vec<f64> = (0..30).map(|i| f64::from(i) * 0.9 / 29.0).collect();
        let out = gradient_scenario(&GradientScenario {
            db_per_dz: 0.08,
            distance: 5e-6,
            pair: sd_pair(0.0),
            waits,
            shots_per_point: 150,
            noise: NoiseModel::noiseless(3),
            b0: 0.0,
        })
        .unwrap();
        assert_relative_eq!(out.analytic_frequency, 1.119, max_relative = 1e-3);
        assert!(out.fit.converged);
        let freq = out.fit.value("freq");
        let err = out.fit.stderr("freq").max(1e-3);
        assert!(
            (freq - out.analytic_frequency).abs() < 3.0 * err,
            "fitted {freq} vs analytic {}",
            out.analytic_frequency
        );
    }

    #[test]
    fn zero_gradient_gives_flat_trace() {
        let waits: Vec<f64> = (0..10).map(|i| f64::from(i) * 0.05).collect();
        let out = gradient_scenario(&GradientScenario {
            db_per_dz: 0.0,
            distance: 5e-6,
            pair: sd_pair(0.0),
            waits,
            shots_per_point: 100,
            noise: NoiseModel::noiseless(3),
            b0: 0.0,
        });
        // flat half-contrast trace: frequency 0 and no oscillation to fit
        let out = out.unwrap();
        assert_eq!(out.analytic_frequency, 0.0);
        for trace in &out.traces {
            assert_abs_diff_eq!(trace.parity_mean, 0.5, epsilon = 0.2);
        }
    }
}
