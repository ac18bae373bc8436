//! Dynamics checks against independent oracles: a hand-built 9×9 phase
//! propagator, a hand-built 4×4 two-qubit parity calculation, and the
//! closed-form decay of two-D-level coherences.

use nalgebra::SMatrix;
use num_complex::Complex64;
use pairspec::analysis::{fit_damped_sinusoid, fit_exponential};
use pairspec::atomic::{coherence_sensitivities, QuadrupoleEnvironment, Sublevel};
use pairspec::dynamics::{
    apply_pulse, collective_dephase, composite, evolve, measure_probs, parity_from_probs, prepare,
    Ion, PrepKind, PulseSpec, StateVector, TwoIonState, LOWER, UPPER,
};
use pairspec::experiment::ParityTrace;
use pairspec::noise::ShotNoiseDraw;

fn no_quad() -> QuadrupoleEnvironment {
    QuadrupoleEnvironment::new(0.0, 0.0, 0.0)
}

fn quiet() -> ShotNoiseDraw {
    ShotNoiseDraw {
        b_phase_integral: 0.0,
        laser_freq: 0.0,
        phi_x: 0.0,
    }
}

fn stable_sd_pair(detuning: f64) -> pairspec::atomic::LevelPair {
    coherence_sensitivities(
        Sublevel::s_half(1).unwrap(),
        Sublevel::d_five_half(5)
            .unwrap()
            .with_decay_rate(0.0)
            .unwrap(),
        &no_quad(),
        true,
    )
    .unwrap()
    .with_static_detuning(detuning)
}

/// The D-D pairs of the quadrupole measurement, default decay.
fn dd_pairs() -> (pairspec::atomic::LevelPair, pairspec::atomic::LevelPair) {
    (
        coherence_sensitivities(
            Sublevel::d_five_half(-5).unwrap(),
            Sublevel::d_five_half(-1).unwrap(),
            &no_quad(),
            false,
        )
        .unwrap(),
        coherence_sensitivities(
            Sublevel::d_five_half(-1).unwrap(),
            Sublevel::d_five_half(3).unwrap(),
            &no_quad(),
            false,
        )
        .unwrap(),
    )
}

fn analysis_parity(state: &TwoIonState, phi1: f64, phi2: f64) -> f64 {
    // rotation phases referenced to the preparation pulse, as in the sequencer
    let a = apply_pulse(
        state,
        &PulseSpec::new(Ion::One, std::f64::consts::FRAC_PI_2, phi1 + std::f64::consts::FRAC_PI_2)
            .unwrap(),
    );
    let b = apply_pulse(
        &a,
        &PulseSpec::new(Ion::Two, std::f64::consts::FRAC_PI_2, phi2 + std::f64::consts::FRAC_PI_2)
            .unwrap(),
    );
    parity_from_probs(&measure_probs(&b))
}

/// Independent propagation oracle: the diagonal phase unitary built directly
/// from the per-basis-state detunings, bypassing `evolve`.
fn brute_force_phase_evolution(
    state: &TwoIonState,
    delta1: f64,
    delta2: f64,
    tau: f64,
) -> TwoIonState {
    let mut u = SMatrix::<Complex64, 9, 9>::zeros();
    for i1 in 0..3 {
        for i2 in 0..3 {
            let mut freq = 0.0;
            if i1 == UPPER {
                freq += delta1;
            }
            if i2 == UPPER {
                freq += delta2;
            }
            let idx = composite(i1, i2);
            u[(idx, idx)] = Complex64::from_polar(1.0, -std::f64::consts::TAU * freq * tau);
        }
    }
    TwoIonState {
        rho: u * state.rho * u.adjoint(),
        pair1: state.pair1,
        pair2: state.pair2,
    }
}

#[test]
fn evolve_matches_brute_force_propagator() {
    let delta1 = 100.0;
    let delta2 = 37.0;
    let pairs = (stable_sd_pair(delta1), stable_sd_pair(delta2));
    let state = prepare(PrepKind::Product, pairs);
    for step in 0..24 {
        let tau = f64::from(step) * 3.3e-3;
        let engine = evolve(&state, tau, &quiet(), &no_quad(), 0.0);
        let oracle = brute_force_phase_evolution(&state, delta1, delta2, tau);
        let diff = (engine.rho - oracle.rho).norm();
        assert!(diff < 1e-12, "τ = {tau}: |Δρ| = {diff}");
    }
}

#[test]
fn parity_beat_frequency_sign_rule() {
    let delta1 = 100.0;
    let delta2 = 37.0;
    let pairs = (stable_sd_pair(delta1), stable_sd_pair(delta2));
    let taus: Vec<f64> = (0..160).map(|i| f64::from(i) * 0.5e-3).collect();

    // anti-correlated Bell state |ge⟩+|eg⟩: beat at |Δ₁ − Δ₂|
    let anti = prepare(PrepKind::Bell(0.0), pairs);
    // correlated Bell state |gg⟩+|ee⟩: beat at |Δ₁ + Δ₂|
    let mut psi = StateVector::zeros();
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[composite(LOWER, LOWER)] = amp;
    psi[composite(UPPER, UPPER)] = amp;
    let corr = TwoIonState::from_pure(&psi, pairs.0, pairs.1);

    for (state, expected_freq) in [(anti, delta1 - delta2), (corr, delta1 + delta2)] {
        let trace: Vec<ParityTrace> = taus
            .iter()
            .map(|&tau| {
                let evolved = evolve(&state, tau, &quiet(), &no_quad(), 0.0);
                ParityTrace {
                    abscissa: tau,
                    parity_mean: analysis_parity(&evolved, 0.0, 0.0),
                    parity_stderr: 0.01,
                    single_ion_means: (0.0, 0.0),
                    shots: 0,
                }
            })
            .collect();
        let fit = fit_damped_sinusoid(&trace, 0.0).unwrap();
        assert!(fit.converged);
        let freq = fit.value("freq");
        assert!(
            (freq - expected_freq.abs()).abs() < 1e-6 * expected_freq.abs(),
            "fitted {freq} vs expected {expected_freq}"
        );
    }
}

#[test]
fn two_d_level_parity_contrast_decays_at_half_lifetime() {
    // with all four participating levels metastable, the two-ion coherence
    // decays at 2Γ and the parity contrast time constant is τ_D/2
    let pairs = dd_pairs();
    let state = prepare(PrepKind::Bell(0.0), pairs);
    let points: Vec<(f64, f64, f64)> = (0..25)
        .map(|i| {
            let tau = f64::from(i) * 0.06;
            let evolved = evolve(&state, tau, &quiet(), &no_quad(), 0.0);
            let coherence =
                evolved.rho[(composite(LOWER, UPPER), composite(UPPER, LOWER))].norm();
            (tau, 2.0 * coherence, 0.01)
        })
        .collect();
    let fit = fit_exponential(&points).unwrap();
    assert!(fit.converged);
    let tau_expected = 1.16 / 2.0;
    let tau_fit = fit.value("tau");
    assert!(
        (tau_fit - tau_expected).abs() < 0.05 * tau_expected,
        "fitted τ_d = {tau_fit} vs τ_D/2 = {tau_expected}"
    );
}

/// Hand-built 4×4 oracle: the dephased-product mixture, π/2 rotations and
/// σ_z⊗σ_z expectation written out in the two-qubit basis {gg, ge, eg, ee},
/// fully independent of the 9×9 engine.
fn parity_of_reference_mixture(phi1: f64, phi2: f64) -> f64 {
    type M4 = SMatrix<Complex64, 4, 4>;
    let c = Complex64::new;

    let mut rho = M4::zeros();
    rho[(0, 0)] = c(0.25, 0.0); // |gg⟩⟨gg|
    rho[(3, 3)] = c(0.25, 0.0); // |ee⟩⟨ee|
    // ½|Ψ₊⟩⟨Ψ₊| over |ge⟩, |eg⟩
    for i in 1..=2 {
        for j in 1..=2 {
            rho[(i, j)] = c(0.25, 0.0);
        }
    }

    let rot = |phi: f64| -> SMatrix<Complex64, 2, 2> {
        let half = std::f64::consts::FRAC_PI_4; // (π/2)/2
        let rotation_phase = phi + std::f64::consts::FRAC_PI_2;
        SMatrix::<Complex64, 2, 2>::new(
            c(half.cos(), 0.0),
            c(0.0, -half.sin()) * Complex64::from_polar(1.0, -rotation_phase),
            c(0.0, -half.sin()) * Complex64::from_polar(1.0, rotation_phase),
            c(half.cos(), 0.0),
        )
    };
    let u = rot(phi1).kronecker(&rot(phi2));
    let rotated = u * rho * u.adjoint();
    // σ_z⊗σ_z diag over {gg, ge, eg, ee} with upper = +1
    let signs = [1.0, -1.0, -1.0, 1.0];
    (0..4).map(|i| signs[i] * rotated[(i, i)].re).sum()
}

#[test]
fn dephased_product_parity_matches_two_qubit_oracle() {
    let pairs = (stable_sd_pair(0.0), stable_sd_pair(0.0));
    let mixture = collective_dephase(&prepare(PrepKind::Product, pairs));
    for k in 0..16 {
        let phi = f64::from(k) * std::f64::consts::TAU / 16.0;
        let engine = analysis_parity(&mixture, phi, 0.0);
        let oracle = parity_of_reference_mixture(phi, 0.0);
        assert!(
            (engine - oracle).abs() < 1e-12,
            "φ = {phi}: engine {engine} vs oracle {oracle}"
        );
    }
    // the frozen reference value: equal-phase pulses, no evolution
    assert!((parity_of_reference_mixture(0.0, 0.0) - 0.5).abs() < 1e-12);
}

#[test]
fn dephased_product_has_exactly_half_the_bell_contrast() {
    let pairs = (stable_sd_pair(0.0), stable_sd_pair(0.0));
    let bell = prepare(PrepKind::Bell(0.0), pairs);
    let mixture = collective_dephase(&prepare(PrepKind::Product, pairs));
    for k in 0..24 {
        let phi = f64::from(k) * std::f64::consts::TAU / 24.0;
        let bell_parity = analysis_parity(&bell, phi, 0.0);
        let product_parity = analysis_parity(&mixture, phi, 0.0);
        assert!((bell_parity - phi.cos()).abs() < 1e-12);
        assert!((product_parity - 0.5 * phi.cos()).abs() < 1e-12);
    }
}
