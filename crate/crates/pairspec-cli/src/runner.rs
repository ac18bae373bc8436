//! Scenario execution: run the resolved plans, assemble the trace table,
//! the fit report and the reproducibility manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pairspec::analysis::{
    fit_contrast_gaussian, fit_damped_sinusoid, fit_line, fit_phase_fringe,
    linewidth_from_tau_half, FitError, FitResult,
};
use pairspec::dynamics::Ion;
use pairspec::experiment::{expected_single_ion, gradient_scenario, run_plan, ParityTrace, Scan};

use crate::scenario::{Execution, Scenario};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    Json,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for TraceFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "json" => Ok(TraceFormat::Json),
            other => Err(format!("unknown trace format {other:?} (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub shots_override: Option<u32>,
    pub format: Option<TraceFormat>,
}

/// One row of the emitted trace table. Which leading columns are present
/// depends on the scenario kind and is uniform within a run.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_v_mm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wait_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0_rad: Option<f64>,
    pub parity: f64,
    pub parity_err: f64,
    pub ion1_mean: f64,
    pub ion2_mean: f64,
}

impl TraceRow {
    fn from_trace(trace: &ParityTrace) -> Self {
        Self {
            gradient_v_mm2: None,
            wait_s: None,
            phi0_rad: None,
            parity: trace.parity_mean,
            parity_err: trace.parity_stderr,
            ion1_mean: trace.single_ion_means.0,
            ion2_mean: trace.single_ion_means.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadrupolePointReport {
    pub gradient_v_per_mm2: f64,
    pub analytic_frequency_hz: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadrupoleReport {
    /// |Δ quadrupole sensitivity| of the two pairs, Hz/(V/mm²).
    pub alpha_true_hz_per_v_mm2: f64,
    pub per_gradient: Vec<QuadrupolePointReport>,
    /// Weighted line fit of frequency versus gradient (two or more points).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_fit: Option<FitResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub distance_m: f64,
    pub delta_b_gauss: f64,
    pub analytic_frequency_hz: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContrastPoint {
    pub wait_s: f64,
    pub contrast: f64,
    pub contrast_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinewidthReport {
    pub contrasts: Vec<ContrastPoint>,
    /// Largest |⟨σ_z⟩ − DC| over all scan points and both ions.
    pub single_ion_max_abs_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian_fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_half_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fwhm_hz: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CustomReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub kind: String,
    pub seed: u64,
    pub shots_per_point: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrupole: Option<QuadrupoleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linewidth: Option<LinewidthReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomReport>,
}

/// Reproducibility record: the fully resolved scenario plus the effective
/// run settings; re-running from a manifest reproduces the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    /// Manifest format version.
    pub pairspec_manifest: u32,
    /// Package version that produced the run.
    pub version: String,
    pub seed: u64,
    pub shots_per_point: u32,
    pub trace_format: TraceFormat,
    /// SHA-256 of the canonical JSON of `scenario`.
    pub config_sha256: String,
    pub scenario: Scenario,
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    /// Resolved scenario name (file stem of the outputs).
    pub name: String,
    pub format: TraceFormat,
    pub trace_bytes: String,
    pub report: Report,
    pub report_json: String,
    pub manifest_json: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_csv(rows: &[TraceRow]) -> String {
    let with_gradient = rows.iter().any(|r| r.gradient_v_mm2.is_some());
    let with_wait = rows.iter().any(|r| r.wait_s.is_some());
    let with_phase = rows.iter().any(|r| r.phi0_rad.is_some());
    let mut header: Vec<&str> = Vec::new();
    if with_gradient {
        header.push("gradient_v_mm2");
    }
    if with_wait {
        header.push("wait_s");
    }
    if with_phase {
        header.push("phi0_rad");
    }
    header.extend_from_slice(&["parity", "parity_err", "ion1_mean", "ion2_mean"]);

    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let mut fields: Vec<String> = Vec::new();
        if with_gradient {
            fields.push(fmt_opt(row.gradient_v_mm2));
        }
        if with_wait {
            fields.push(fmt_opt(row.wait_s));
        }
        if with_phase {
            fields.push(fmt_opt(row.phi0_rad));
        }
        fields.push(row.parity.to_string());
        fields.push(row.parity_err.to_string());
        fields.push(row.ion1_mean.to_string());
        fields.push(row.ion2_mean.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn require_converged(fit: FitResult, what: &str) -> Result<FitResult, CliError> {
    if fit.converged {
        Ok(fit)
    } else {
        Err(CliError::FitNonConvergence(format!(
            "{what} did not converge"
        )))
    }
}

fn map_fit_error(err: FitError, what: &str) -> CliError {
    match err {
        FitError::NoConvergence(n) => {
            CliError::FitNonConvergence(format!("{what}: no convergence in {n} iterations"))
        }
        other => CliError::Validation(format!("{what}: {other}")),
    }
}

/// Run a scenario with the given overrides and assemble all artifacts.
/// Pure compute; nothing is written to disk.
pub fn execute(scenario: &Scenario, opts: &RunOptions) -> Result<Artifacts, CliError> {
    // resolve overrides into the scenario embedded in the manifest
    let mut resolved = scenario.clone();
    if let Some(seed) = opts.seed {
        resolved.seed = seed;
    }
    if let Some(shots) = opts.shots_override {
        resolved.shots_per_point = shots.max(1);
    }
    let format = opts.format.unwrap_or(TraceFormat::Csv);
    let execution = resolved.build_execution(resolved.seed, None)?;

    let mut rows: Vec<TraceRow> = Vec::new();
    let mut report = Report {
        scenario: resolved.name.clone(),
        kind: resolved.kind.to_string(),
        seed: resolved.seed,
        shots_per_point: resolved.shots_per_point,
        quadrupole: None,
        gradient: None,
        linewidth: None,
        custom: None,
    };

    match execution {
        Execution::Quadrupole { runs, alpha_true, fit_exclude_below } => {
            let multi = runs.len() > 1;
            let mut per_gradient = Vec::new();
            for (gradient, plan, analytic) in &runs {
                let traces = run_plan(plan).map_err(|e| CliError::Validation(e.to_string()))?;
                for trace in &traces {
                    let mut row = TraceRow::from_trace(trace);
                    row.wait_s = Some(trace.abscissa);
                    if multi {
                        row.gradient_v_mm2 = Some(*gradient);
                    }
                    rows.push(row);
                }
                let fit = fit_damped_sinusoid(&traces, fit_exclude_below)
                    .map_err(|e| map_fit_error(e, "parity oscillation fit"))?;
                let fit = require_converged(fit, "parity oscillation fit")?;
                per_gradient.push(QuadrupolePointReport {
                    gradient_v_per_mm2: *gradient,
                    analytic_frequency_hz: *analytic,
                    fit,
                });
            }
            let line_fit = if per_gradient.len() >= 2 {
                let x: Vec<f64> = per_gradient.iter().map(|p| p.gradient_v_per_mm2).collect();
                let y: Vec<f64> = per_gradient.iter().map(|p| p.fit.value("freq")).collect();
                let e: Vec<f64> = per_gradient
                    .iter()
                    .map(|p| p.fit.stderr("freq").max(1e-6))
                    .collect();
                Some(
                    fit_line(&x, &y, &e)
                        .map_err(|err| map_fit_error(err, "quadrupole line fit"))?,
                )
            } else {
                None
            };
            report.quadrupole = Some(QuadrupoleReport {
                alpha_true_hz_per_v_mm2: alpha_true,
                per_gradient,
                line_fit,
            });
        }
        Execution::Gradient { scenario: grad } => {
            let outcome =
                gradient_scenario(&grad).map_err(|e| match e {
                    pairspec::experiment::ExperimentError::Fit(fe) => {
                        map_fit_error(fe, "gradient parity fit")
                    }
                    other => CliError::Validation(other.to_string()),
                })?;
            let fit = require_converged(outcome.fit, "gradient parity fit")?;
            for trace in &outcome.traces {
                let mut row = TraceRow::from_trace(trace);
                row.wait_s = Some(trace.abscissa);
                rows.push(row);
            }
            report.gradient = Some(GradientReport {
                distance_m: grad.distance,
                delta_b_gauss: grad.db_per_dz * grad.distance,
                analytic_frequency_hz: outcome.analytic_frequency,
                fit,
            });
        }
        Execution::Linewidth { runs } => {
            let mut contrasts = Vec::new();
            let mut max_deviation = 0.0f64;
            for (wait, plan) in &runs {
                let traces = run_plan(plan).map_err(|e| CliError::Validation(e.to_string()))?;
                for (idx, trace) in traces.iter().enumerate() {
                    let mut row = TraceRow::from_trace(trace);
                    row.wait_s = Some(*wait);
                    row.phi0_rad = Some(trace.abscissa);
                    rows.push(row);
                    for (ion, mean) in [
                        (Ion::One, trace.single_ion_means.0),
                        (Ion::Two, trace.single_ion_means.1),
                    ] {
                        let dc = expected_single_ion(plan, idx, ion)
                            .map_err(|e| CliError::Validation(e.to_string()))?;
                        max_deviation = max_deviation.max((mean - dc).abs());
                    }
                }
                let fringe = fit_phase_fringe(&traces)
                    .map_err(|e| map_fit_error(e, "fringe fit"))?;
                contrasts.push(ContrastPoint {
                    wait_s: *wait,
                    contrast: fringe.value("amp"),
                    contrast_err: fringe.stderr("amp"),
                });
            }
            let (gaussian_fit, tau_half_s, fwhm_hz) = if contrasts.len() >= 5 {
                let points: Vec<(f64, f64, f64)> = contrasts
                    .iter()
                    .map(|c| (c.wait_s, c.contrast, c.contrast_err.max(1e-4)))
                    .collect();
                let fit = fit_contrast_gaussian(&points)
                    .map_err(|e| map_fit_error(e, "gaussian contrast fit"))?;
                let fit = require_converged(fit, "gaussian contrast fit")?;
                let tau_half = fit.value("tau_half");
                (Some(fit), Some(tau_half), Some(linewidth_from_tau_half(tau_half)))
            } else {
                (None, None, None)
            };
            report.linewidth = Some(LinewidthReport {
                contrasts,
                single_ion_max_abs_deviation: max_deviation,
                gaussian_fit,
                tau_half_s,
                fwhm_hz,
            });
        }
        Execution::Custom { plan, fit_exclude_below } => {
            let traces = run_plan(&plan).map_err(|e| CliError::Validation(e.to_string()))?;
            let phase_scan = matches!(plan.scan, Scan::PhaseScan { .. });
            for trace in &traces {
                let mut row = TraceRow::from_trace(trace);
                match plan.scan {
                    Scan::WaitScan(_) => row.wait_s = Some(trace.abscissa),
                    Scan::PhaseScan { wait, .. } => {
                        row.wait_s = Some(wait);
                        row.phi0_rad = Some(trace.abscissa);
                    }
                }
                rows.push(row);
            }
            // best-effort fit: custom scenarios may be raw-data runs
            let (fit, note) = if phase_scan {
                match fit_phase_fringe(&traces) {
                    Ok(fit) => (Some(fit), None),
                    Err(e) => (None, Some(format!("fringe fit skipped: {e}"))),
                }
            } else {
                match fit_damped_sinusoid(&traces, fit_exclude_below) {
                    Ok(fit) => (Some(fit), None),
                    Err(e) => (None, Some(format!("oscillation fit skipped: {e}"))),
                }
            };
            report.custom = Some(CustomReport { fit, note });
        }
    }

    let trace_bytes = match format {
        TraceFormat::Csv => render_csv(&rows),
        TraceFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("serializable rows");
            s.push('\n');
            s
        }
    };
    let report_json = {
        let mut s = serde_json::to_string_pretty(&report).expect("serializable report");
        s.push('\n');
        s
    };

    let scenario_json = serde_json::to_string(&resolved).expect("serializable scenario");
    let config_sha256 = hex_digest(scenario_json.as_bytes());
    let manifest = Manifest {
        pairspec_manifest: 1,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: resolved.seed,
        shots_per_point: resolved.shots_per_point,
        trace_format: format,
        config_sha256,
        scenario: resolved.clone(),
    };
    let manifest_json = {
        let mut s = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        s.push('\n');
        s
    };

    Ok(Artifacts {
        name: resolved.name,
        format,
        trace_bytes,
        report,
        report_json,
        manifest_json,
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
