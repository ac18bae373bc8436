//! Round-trip coverage of every fitter: synthesize data from known
//! parameters with Gaussian noise of known width, fit, and require the truth
//! to land inside the 3σ interval in at least 95 % of 200 seeded trials.

use pairspec::analysis::{
    fit_contrast_gaussian, fit_damped_sinusoid, fit_exponential, fit_line,
};
use pairspec::experiment::ParityTrace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const TRIALS: u64 = 200;
const MIN_COVERED: usize = 190; // 95 % of 200

fn noisy<F: Fn(f64) -> f64>(
    rng: &mut ChaCha8Rng,
    truth: F,
    ts: &[f64],
    sigma: f64,
) -> Vec<(f64, f64, f64)> {
    ts.iter()
        .map(|&t| {
            let n: f64 = rng.sample(StandardNormal);
            (t, truth(t) + sigma * n, sigma)
        })
        .collect()
}

fn covered(value: f64, truth: f64, stderr: f64) -> bool {
    (value - truth).abs() <= 3.0 * stderr
}

#[test]
fn damped_sinusoid_coverage() {
    let (c0, freq, tau_d) = (0.5, 38.6, 0.6);
    let ts: Vec<f64> = (0..60).map(|i| f64::from(i) * 2.5e-3).collect();
    let sigma = 0.03;
    let mut freq_hits = 0;
    let mut c0_hits = 0;
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let data = noisy(
            &mut rng,
            |t| c0 * (-t / tau_d).exp() * (std::f64::consts::TAU * freq * t).cos(),
            &ts,
            sigma,
        );
        let trace: Vec<ParityTrace> = data
            .iter()
            .map(|&(t, y, s)| ParityTrace {
                abscissa: t,
                parity_mean: y,
                parity_stderr: s,
                single_ion_means: (0.0, 0.0),
                shots: 0,
            })
            .collect();
        let fit = fit_damped_sinusoid(&trace, 0.0).unwrap();
        if covered(fit.value("freq"), freq, fit.stderr("freq")) {
            freq_hits += 1;
        }
        if covered(fit.value("c0"), c0, fit.stderr("c0")) {
            c0_hits += 1;
        }
    }
    assert!(freq_hits >= MIN_COVERED, "freq coverage {freq_hits}/{TRIALS}");
    assert!(c0_hits >= MIN_COVERED, "c0 coverage {c0_hits}/{TRIALS}");
}

#[test]
fn gaussian_contrast_coverage() {
    let (c0, tau_half) = (0.5, 4.6e-3);
    let ts: Vec<f64> = (1..=12).map(|i| f64::from(i) * 0.8e-3).collect();
    let sigma = 0.01;
    let mut hits = 0;
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + trial);
        let data = noisy(
            &mut rng,
            |t| c0 * (-std::f64::consts::LN_2 * (t / tau_half).powi(2)).exp(),
            &ts,
            sigma,
        );
        let fit = fit_contrast_gaussian(&data).unwrap();
        if fit.converged && covered(fit.value("tau_half"), tau_half, fit.stderr("tau_half")) {
            hits += 1;
        }
    }
    assert!(hits >= MIN_COVERED, "tau_half coverage {hits}/{TRIALS}");
}

#[test]
fn line_fit_coverage() {
    let (alpha, offset) = (2.977, 0.5);
    let xs = [5.0, 8.75, 12.5, 16.25, 20.0];
    let sigma = 0.25;
    let mut hits = 0;
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(2_000 + trial);
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| alpha * x + offset + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let errs = vec![sigma; xs.len()];
        let fit = fit_line(&xs, &ys, &errs).unwrap();
        if covered(fit.value("alpha"), alpha, fit.stderr("alpha")) {
            hits += 1;
        }
    }
    assert!(hits >= MIN_COVERED, "alpha coverage {hits}/{TRIALS}");
}

#[test]
fn exponential_coverage() {
    let (amp, tau) = (0.8, 0.58);
    let ts: Vec<f64> = (0..15).map(|i| f64::from(i) * 0.08).collect();
    let sigma = 0.01;
    let mut hits = 0;
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(3_000 + trial);
        let data = noisy(&mut rng, |t| amp * (-t / tau).exp(), &ts, sigma);
        let fit = fit_exponential(&data).unwrap();
        if covered(fit.value("tau"), tau, fit.stderr("tau")) {
            hits += 1;
        }
    }
    assert!(hits >= MIN_COVERED, "tau coverage {hits}/{TRIALS}");
}
