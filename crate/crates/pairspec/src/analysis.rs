//! Estimation layer: weighted least-squares fits and the projection-noise
//! error model.
//!
//! Nonlinear fits use Levenberg-Marquardt with analytic Jacobians; the
//! oscillation frequency is initialized from a discrete spectral scan and
//! decay constants from log-linear regression. Data points are weighted by
//! 1/σ²; parameter uncertainties come from the covariance (JᵀWJ)⁻¹ of the
//! linearized problem at the optimum.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::experiment::ParityTrace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("fit did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate design: the abscissa values do not span a range")]
    DegenerateDesign,
}

/// One fitted parameter with its 1σ uncertainty.
#[derive(Debug, Clone, Serialize)]
pub struct FitParam {
    pub name: &'static str,
    pub value: f64,
    pub stderr: f64,
}

/// Result of a weighted least-squares fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    pub chi2_reduced: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn param(&self, name: &str) -> &FitParam {
        self.params
            .iter()
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("no fit parameter named {name}"))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.param(name).value
    }

    pub fn stderr(&self, name: &str) -> f64 {
        self.param(name).stderr
    }
}

const MAX_ITERATIONS: usize = 300;

/// Levenberg-Marquardt minimization of Σ w_i (y_i − f(x_i, p))².
///
/// `jacobian` fills one row of ∂f/∂p. Returns parameters, 1σ errors from
/// (JᵀWJ)⁻¹, reduced χ² and a convergence flag.
fn lm_fit<F, J>(
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    mut params: Vec<f64>,
    model: F,
    jacobian: J,
) -> (Vec<f64>, Vec<f64>, f64, bool)
where
    F: Fn(f64, &[f64]) -> f64,
    J: Fn(f64, &[f64], &mut [f64]),
{
    let n = x.len();
    let np = params.len();
    let chi2 = |p: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .zip(sigma)
            .map(|((&xi, &yi), &si)| {
                let r = (yi - model(xi, p)) / si;
                r * r
            })
            .sum()
    };

    let mut lambda = 1e-3;
    let mut current = chi2(&params);
    let mut converged = false;
    let mut row = vec![0.0; np];

    for _ in 0..MAX_ITERATIONS {
        // weighted normal equations
        let mut jtj = DMatrix::<f64>::zeros(np, np);
        let mut jtr = DVector::<f64>::zeros(np);
        for i in 0..n {
            jacobian(x[i], &params, &mut row);
            let w = 1.0 / (sigma[i] * sigma[i]);
            let r = y[i] - model(x[i], &params);
            for a in 0..np {
                jtr[a] += w * row[a] * r;
                for b in 0..np {
                    jtj[(a, b)] += w * row[a] * row[b];
                }
            }
        }

        let mut improved = false;
        for _ in 0..24 {
            let mut damped = jtj.clone();
            for a in 0..np {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-30);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 11.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, d)| p + d).collect();
            let trial_chi2 = chi2(&trial);
            if trial_chi2.is_finite() && trial_chi2 <= current {
                let gain = current - trial_chi2;
                params = trial;
                current = trial_chi2;
                lambda = (lambda / 9.0).max(1e-12);
                improved = true;
                if gain < 1e-12 * (current + 1e-12) {
                    converged = true;
                }
                break;
            }
            lambda *= 11.0;
            if lambda > 1e12 {
                // stuck in a flat or hostile region; call it converged if the
                // gradient is already negligible
                converged = jtr.amax() < 1e-8;
                break;
            }
        }
        if converged || !improved {
            break;
        }
    }

    // covariance from the undamped normal equations at the optimum
    let mut jtj = DMatrix::<f64>::zeros(np, np);
    for i in 0..n {
        jacobian(x[i], &params, &mut row);
        let w = 1.0 / (sigma[i] * sigma[i]);
        for a in 0..np {
            for b in 0..np {
                jtj[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let stderrs = match jtj.clone().try_inverse() {
        Some(cov) => (0..np).map(|a| cov[(a, a)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; np],
    };
    let dof = n.saturating_sub(np).max(1);
    (params, stderrs, current / dof as f64, converged)
}

/// Weighted scan for the dominant oscillation frequency: for each trial
/// frequency solve the linear cosine/sine amplitudes and keep the frequency
/// explaining the most weighted variance. Returns (freq, a, b) for
/// y ≈ a·cos(2πft) + b·sin(2πft).
fn spectral_peak(t: &[f64], y: &[f64], sigma: &[f64]) -> (f64, f64, f64) {
    let t_min = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (t_max - t_min).max(f64::MIN_POSITIVE);
    let mut sorted: Vec<f64> = t.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let min_dt = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let f_max = if min_dt.is_finite() { 0.5 / min_dt } else { 1.0 / span };
    let df = 0.25 / span;
    let steps = ((f_max / df) as usize).clamp(4, 40_000);

    let mut best = (0.0, 0.0, 0.0);
    let mut best_score = f64::NEG_INFINITY;
    for k in 0..=steps {
        let f = k as f64 * df;
        let (mut scc, mut scs, mut sss, mut scy, mut ssy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..t.len() {
            let w = 1.0 / (sigma[i] * sigma[i]);
            let (s, c) = (std::f64::consts::TAU * f * t[i]).sin_cos();
            scc += w * c * c;
            scs += w * c * s;
            sss += w * s * s;
            scy += w * c * y[i];
            ssy += w * s * y[i];
        }
        let det = scc * sss - scs * scs;
        let (a, b) = if det.abs() > 1e-12 * (scc * sss).max(1.0) {
            ((sss * scy - scs * ssy) / det, (scc * ssy - scs * scy) / det)
        } else if scc > 0.0 {
            (scy / scc, 0.0)
        } else {
            (0.0, 0.0)
        };
        let score = a * scy + b * ssy; // weighted explained variance
        if score > best_score {
            best_score = score;
            best = (f, a, b);
        }
    }
    best
}

fn trace_data(trace: &[ParityTrace], exclude_below: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut s = Vec::new();
    for point in trace {
        if point.abscissa < exclude_below {
            continue;
        }
        t.push(point.abscissa);
        y.push(point.parity_mean);
        // binomial floor keeps saturated points (all shots identical) from
        // acquiring infinite weight
        let floor = if point.shots > 0 {
            1.0 / f64::from(point.shots)
        } else {
            1e-3
        };
        s.push(point.parity_stderr.max(floor));
    }
    (t, y, s)
}

fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi % std::f64::consts::TAU;
    if p > std::f64::consts::PI {
        p -= std::f64::consts::TAU;
    } else if p <= -std::f64::consts::PI {
        p += std::f64::consts::TAU;
    }
    p
}

/// Fit C₀·e^(−t/τ_d)·cos(2π·f·t + φ) to a parity trace, ignoring points
/// with abscissa below `exclude_below` (seconds).
///
/// Reported parameters: `c0`, `freq` (Hz), `phase` (radians), `tau_d`
/// (seconds, converted from the fitted decay rate; its uncertainty follows
/// by error propagation). `converged` is false when no significant
/// oscillation amplitude is found.
pub fn fit_damped_sinusoid(
    trace: &[ParityTrace],
    exclude_below: f64,
) -> Result<FitResult, FitError> {
    let (t, y, s) = trace_data(trace, exclude_below);
    if t.len() < 6 {
        return Err(FitError::InsufficientData(format!(
            "damped sinusoid needs at least 6 points, got {}",
            t.len()
        )));
    }

    let (f0, a, b) = spectral_peak(&t, &y, &s);
    let span = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - t.iter().cloned().fold(f64::INFINITY, f64::min);
    let p0 = vec![a.hypot(b).max(1e-6), f0, (-b).atan2(a), 0.5 / span.max(1e-12)];

    let model = |x: f64, p: &[f64]| {
        p[0] * (-p[3] * x).exp() * (std::f64::consts::TAU * p[1] * x + p[2]).cos()
    };
    let jac = |x: f64, p: &[f64], row: &mut [f64]| {
        let envelope = (-p[3] * x).exp();
        let arg = std::f64::consts::TAU * p[1] * x + p[2];
        let (sin, cos) = arg.sin_cos();
        row[0] = envelope * cos;
        row[1] = -p[0] * envelope * sin * std::f64::consts::TAU * x;
        row[2] = -p[0] * envelope * sin;
        row[3] = -x * p[0] * envelope * cos;
    };
    let (mut p, mut perr, chi2_reduced, lm_ok) = lm_fit(&t, &y, &s, p0, model, jac);

    // canonical signs: positive amplitude and frequency
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[2] += std::f64::consts::PI;
    }
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[2] = -p[2];
    }
    p[2] = wrap_phase(p[2]);

    let significant = p[0].abs() > 2.0 * perr[0] || perr[0] == 0.0;
    let (tau_d, tau_err) = if p[3] != 0.0 {
        (1.0 / p[3], perr[3] / (p[3] * p[3]))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    if !perr.iter().all(|e| e.is_finite()) {
        perr = perr.iter().map(|e| if e.is_finite() { *e } else { 0.0 }).collect();
    }

    Ok(FitResult {
        params: vec![
            FitParam { name: "c0", value: p[0], stderr: perr[0] },
            FitParam { name: "freq", value: p[1], stderr: perr[1] },
            FitParam { name: "phase", value: p[2], stderr: perr[2] },
            FitParam { name: "tau_d", value: tau_d, stderr: tau_err },
        ],
        chi2_reduced,
        converged: lm_ok && significant,
    })
}

/// Fit A·e^(−t/τ) to (t, y, σ) triples. Reported parameters: `amp`, `tau`.
pub fn fit_exponential(points: &[(f64, f64, f64)]) -> Result<FitResult, FitError> {
    if points.len() < 3 {
        return Err(FitError::InsufficientData(format!(
            "exponential needs at least 3 points, got {}",
            points.len()
        )));
    }
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let s: Vec<f64> = points.iter().map(|p| p.2.max(1e-12)).collect();

    // log-linear initialization on the positive points
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut m = 0.0;
    for (&ti, &yi) in t.iter().zip(&y) {
        if yi > 0.0 {
            let ly = yi.ln();
            sx += ti;
            sy += ly;
            sxx += ti * ti;
            sxy += ti * ly;
            m += 1.0;
        }
    }
    let (amp0, rate0) = if m >= 2.0 && (m * sxx - sx * sx).abs() > 1e-30 {
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        let intercept = (sy - slope * sx) / m;
        (intercept.exp(), -slope)
    } else {
        (y[0].abs().max(1e-6), 1.0)
    };

    let model = |x: f64, p: &[f64]| p[0] * (-p[1] * x).exp();
    let jac = |x: f64, p: &[f64], row: &mut [f64]| {
        let e = (-p[1] * x).exp();
        row[0] = e;
        row[1] = -x * p[0] * e;
    };
    let (p, perr, chi2_reduced, lm_ok) = lm_fit(&t, &y, &s, vec![amp0, rate0], model, jac);
    let (tau, tau_err) = if p[1] != 0.0 {
        (1.0 / p[1], perr[1] / (p[1] * p[1]))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(FitResult {
        params: vec![
            FitParam { name: "amp", value: p[0], stderr: perr[0] },
            FitParam { name: "tau", value: tau, stderr: tau_err },
        ],
        chi2_reduced,
        converged: lm_ok,
    })
}

/// Fit C₀·exp(−ln2·(t/τ_half)²) to contrast-versus-time triples (t, c, σ).
///
/// τ_half is the time at which the contrast has dropped to C₀/2. Returns
/// `converged = false` when the data show no decreasing trend.
pub fn fit_contrast_gaussian(contrast_vs_time: &[(f64, f64, f64)]) -> Result<FitResult, FitError> {
    if contrast_vs_time.len() < 5 {
        return Err(FitError::InsufficientData(format!(
            "gaussian contrast fit needs at least 5 points, got {}",
            contrast_vs_time.len()
        )));
    }
    let mut points = contrast_vs_time.to_vec();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let s: Vec<f64> = points.iter().map(|p| p.2.max(1e-12)).collect();

    let c0 = y[0].max(y[1]);
    let trend_ok = c0 > 0.0 && y[y.len() - 1] < 0.9 * c0;

    // initialize τ_half from the first crossing of c0/2
    let half = c0 / 2.0;
    let mut tau0 = t[t.len() - 1];
    for i in 1..t.len() {
        if y[i] <= half && y[i - 1] > half {
            let frac = (y[i - 1] - half) / (y[i - 1] - y[i]);
            tau0 = t[i - 1] + frac * (t[i] - t[i - 1]);
            break;
        }
    }

    let model = |x: f64, p: &[f64]| {
        p[0] * (-std::f64::consts::LN_2 * (x / p[1]).powi(2)).exp()
    };
    let jac = |x: f64, p: &[f64], row: &mut [f64]| {
        let u = (x / p[1]).powi(2);
        let e = (-std::f64::consts::LN_2 * u).exp();
        row[0] = e;
        row[1] = p[0] * e * std::f64::consts::LN_2 * 2.0 * u / p[1];
    };
    let (p, perr, chi2_reduced, lm_ok) = lm_fit(&t, &y, &s, vec![c0, tau0], model, jac);

    Ok(FitResult {
        params: vec![
            FitParam { name: "c0", value: p[0], stderr: perr[0] },
            FitParam { name: "tau_half", value: p[1].abs(), stderr: perr[1] },
        ],
        chi2_reduced,
        converged: lm_ok && trend_ok && p[1].is_finite() && p[1] != 0.0,
    })
}

/// Laser line FWHM inferred from the Gaussian half-width of the two-ion
/// Ramsey contrast, Hz.
///
/// The randomized-protocol parity contrast of a quasi-static Gaussian laser
/// is (1/2)·exp(−2(2πσ_f τ)²); matching it to C₀·exp(−ln2·(τ/τ_half)²) and
/// using FWHM = 2√(2 ln2)·σ_f gives FWHM = ln2/(π·τ_half).
pub fn linewidth_from_tau_half(tau_half: f64) -> f64 {
    std::f64::consts::LN_2 / (std::f64::consts::PI * tau_half)
}

/// Weighted straight-line fit y = α·x + offset.
pub fn fit_line(x: &[f64], y: &[f64], y_err: &[f64]) -> Result<FitResult, FitError> {
    if x.len() < 2 {
        return Err(FitError::InsufficientData(format!(
            "line fit needs at least 2 points, got {}",
            x.len()
        )));
    }
    let x_min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if x_max - x_min == 0.0 {
        return Err(FitError::DegenerateDesign);
    }

    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let w = 1.0 / (y_err[i] * y_err[i]).max(1e-300);
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    let det = sw * sxx - sx * sx;
    if det <= 0.0 {
        return Err(FitError::DegenerateDesign);
    }
    let alpha = (sw * sxy - sx * sy) / det;
    let offset = (sxx * sy - sx * sxy) / det;
    let alpha_err = (sw / det).sqrt();
    let offset_err = (sxx / det).sqrt();

    let chi2: f64 = (0..x.len())
        .map(|i| {
            let r = (y[i] - alpha * x[i] - offset) / y_err[i].max(1e-150);
            r * r
        })
        .sum();
    let dof = x.len().saturating_sub(2).max(1);

    Ok(FitResult {
        params: vec![
            FitParam { name: "alpha", value: alpha, stderr: alpha_err },
            FitParam { name: "offset", value: offset, stderr: offset_err },
        ],
        chi2_reduced: chi2 / dof as f64,
        converged: true,
    })
}

/// Extract the fringe amplitude from a parity-versus-phase trace by the
/// weighted linear fit A·cos(φ + φ_off) + B; reports |A| as `amp`.
pub fn fit_phase_fringe(trace: &[ParityTrace]) -> Result<FitResult, FitError> {
    let (phi, y, s) = trace_data(trace, f64::NEG_INFINITY);
    if phi.len() < 3 {
        return Err(FitError::InsufficientData(format!(
            "fringe fit needs at least 3 points, got {}",
            phi.len()
        )));
    }

    // linear in (a, b, c): y = a cosφ + b sinφ + c
    let mut m = DMatrix::<f64>::zeros(3, 3);
    let mut v = DVector::<f64>::zeros(3);
    for i in 0..phi.len() {
        let w = 1.0 / (s[i] * s[i]);
        let row = [phi[i].cos(), phi[i].sin(), 1.0];
        for a in 0..3 {
            v[a] += w * row[a] * y[i];
            for b in 0..3 {
                m[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let cov = m.clone().try_inverse().ok_or(FitError::DegenerateDesign)?;
    let sol = &cov * &v;
    let (a, b, c) = (sol[0], sol[1], sol[2]);
    let amp = a.hypot(b);
    let amp_err = if amp > 0.0 {
        ((a * a * cov[(0, 0)] + b * b * cov[(1, 1)] + 2.0 * a * b * cov[(0, 1)]).max(0.0)).sqrt()
            / amp
    } else {
        cov[(0, 0)].max(cov[(1, 1)]).sqrt()
    };

    let chi2: f64 = (0..phi.len())
        .map(|i| {
            let r = (y[i] - a * phi[i].cos() - b * phi[i].sin() - c) / s[i];
            r * r
        })
        .sum();
    let dof = phi.len().saturating_sub(3).max(1);

    Ok(FitResult {
        params: vec![
            FitParam { name: "amp", value: amp, stderr: amp_err },
            FitParam { name: "phase", value: wrap_phase((-b).atan2(a)), stderr: 0.0 },
            FitParam { name: "offset", value: c, stderr: cov[(2, 2)].sqrt() },
        ],
        chi2_reduced: chi2 / dof as f64,
        converged: true,
    })
}

/// Projection-noise estimate of the frequency uncertainty of a parity
/// measurement: σ ≈ 1/((τ/2)·C·√(2N)), Hz.
///
/// τ is the maximum delay between preparation and parity measurement, C the
/// resulting Ramsey contrast, and N the number of experiments (2N state
/// detections for two ions).
pub fn projection_noise_sigma(tau: f64, contrast: f64, experiments: u64) -> f64 {
    1.0 / ((tau / 2.0) * contrast * (2.0 * experiments as f64).sqrt())
}
