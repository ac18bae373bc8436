//! Scenario parsing, validation errors, output files and manifest
//! reproducibility.

use pairspec_cli::runner::{execute, Manifest, RunOptions, TraceFormat};
use pairspec_cli::scenario::Scenario;
use pairspec_cli::{builtins, describe, resolve_input, run_to_dir, CliError};

fn fig3() -> Scenario {
    Scenario::parse(builtins::builtin("fig3_quadrupole_product").unwrap()).unwrap()
}

fn small_opts() -> RunOptions {
    RunOptions {
        seed: Some(9),
        shots_override: Some(5),
        format: None,
    }
}

#[test]
fn builtin_list_has_the_six_scenarios() {
    assert_eq!(
        builtins::names(),
        vec![
            "fig3_quadrupole_product",
            "fig4_quadrupole_product",
            "fig4_quadrupole_bell",
            "fig6_phase_scan",
            "fig7_linewidth",
            "sec41_gradient",
        ]
    );
    // every built-in parses and resolves
    for name in builtins::names() {
        let scenario = Scenario::parse(builtins::builtin(name).unwrap()).unwrap();
        scenario.build_execution(scenario.seed, Some(1)).unwrap();
    }
}

#[test]
fn describe_prints_grid_and_shots() {
    let text = describe("fig4_quadrupole_product").unwrap();
    assert!(text.contains("fig4_quadrupole_product"));
    assert!(text.contains("gradients"));
    assert!(text.contains("80 shots per point"));

    let err = describe("bogus").unwrap_err();
    assert!(matches!(err, CliError::Validation(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_keys_are_rejected() {
    let text = builtins::builtin("fig3_quadrupole_product")
        .unwrap()
        .replace("shots_per_point = 100", "shots_per_point = 100\ntypo_field = 3");
    let err = Scenario::parse(&text).unwrap_err();
    let CliError::Validation(message) = &err else {
        panic!("expected a validation error, got {err:?}")
    };
    assert!(message.contains("typo_field"), "message: {message}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn missing_sections_are_named() {
    let text = "\
name = \"broken\"
kind = \"linewidth\"
shots_per_point = 10

[noise]
laser_fwhm_hz = 48.0
";
    let scenario = Scenario::parse(text).unwrap();
    let err = scenario.build_execution(1, None).unwrap_err();
    let CliError::Validation(message) = &err else {
        panic!("expected a validation error, got {err:?}")
    };
    assert!(message.contains("phase_scan"), "message: {message}");
}

#[test]
fn validation_failure_writes_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("broken.scn");
    std::fs::write(&scn, "name = \"x\"\nkind = \"gradient\"\nshots_per_point = 1\n[noise]\n")
        .unwrap();
    let out = dir.path().join("results");
    let err = run_to_dir(scn.to_str().unwrap(), &RunOptions::default(), Some(&out)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn run_writes_trace_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_to_dir("fig3_quadrupole_product", &small_opts(), Some(dir.path())).unwrap();
    for path in [&summary.trace_path, &summary.report_path, &summary.manifest_path] {
        assert!(path.exists(), "missing {}", path.display());
    }
    let csv = std::fs::read_to_string(&summary.trace_path).unwrap();
    assert!(csv.starts_with("wait_s,parity,parity_err,ion1_mean,ion2_mean\n"));
    // 1 extra point + 40 grid points
    assert_eq!(csv.lines().count(), 42);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary.report_path).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["shots_per_point"], 5);
}

#[test]
fn phase_scan_trace_has_wait_and_phase_columns() {
    let scenario = Scenario::parse(builtins::builtin("fig6_phase_scan").unwrap()).unwrap();
    let artifacts = execute(&scenario, &small_opts()).unwrap();
    assert!(artifacts
        .trace_bytes
        .starts_with("wait_s,phi0_rad,parity,parity_err,ion1_mean,ion2_mean\n"));
}

#[test]
fn sweep_trace_carries_the_gradient_column() {
    let scenario = Scenario::parse(builtins::builtin("fig4_quadrupole_product").unwrap()).unwrap();
    let artifacts = execute(&scenario, &small_opts()).unwrap();
    assert!(artifacts
        .trace_bytes
        .starts_with("gradient_v_mm2,wait_s,parity,parity_err,ion1_mean,ion2_mean\n"));
}

#[test]
fn json_trace_format_is_valid_json() {
    let opts = RunOptions {
        format: Some(TraceFormat::Json),
        ..small_opts()
    };
    let artifacts = execute(&fig3(), &opts).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&artifacts.trace_bytes).unwrap();
    assert!(rows.as_array().unwrap().len() == 41);
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = execute(&fig3(), &small_opts()).unwrap();
    let b = execute(&fig3(), &small_opts()).unwrap();
    assert_eq!(a.trace_bytes, b.trace_bytes);
    assert_eq!(a.report_json, b.report_json);
    assert_eq!(a.manifest_json, b.manifest_json);
}

#[test]
fn manifest_round_trip_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_to_dir("fig3_quadrupole_product", &small_opts(), Some(dir.path())).unwrap();

    // re-run from the manifest with no CLI overrides
    let manifest_path = first.manifest_path.to_str().unwrap().to_string();
    let rerun_dir = tempfile::tempdir().unwrap();
    let second = run_to_dir(&manifest_path, &RunOptions::default(), Some(rerun_dir.path())).unwrap();

    let trace_a = std::fs::read(&first.trace_path).unwrap();
    let trace_b = std::fs::read(&second.trace_path).unwrap();
    assert_eq!(trace_a, trace_b);
    let report_a = std::fs::read(&first.report_path).unwrap();
    let report_b = std::fs::read(&second.report_path).unwrap();
    assert_eq!(report_a, report_b);

    // the manifest records the effective seed and config hash
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(&first.manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.seed, 9);
    assert_eq!(manifest.shots_per_point, 5);
    assert_eq!(manifest.config_sha256.len(), 64);
}

#[test]
fn resolve_prefers_files_over_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig3_quadrupole_product");
    let mut text = builtins::builtin("fig3_quadrupole_product").unwrap().to_string();
    text = text.replace("seed = 1", "seed = 77");
    std::fs::write(&path, text).unwrap();
    let resolved = resolve_input(path.to_str().unwrap()).unwrap();
    assert_eq!(resolved.scenario.seed, 77);

    assert!(matches!(
        resolve_input("definitely_not_a_scenario"),
        Err(CliError::Validation(_))
    ));
}

#[test]
fn custom_scenario_runs_end_to_end() {
    let text = r#"
name = "custom_ramsey"
kind = "custom"
seed = 5
shots_per_point = 40

[noise]
laser_fwhm_hz = 20.0

[custom]
preparation = "product"
policy = { fixed = { phi1 = 0.0, phi2 = 0.0 } }
scan = { wait_scan = [0.0, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007] }

[custom.pair1]
lower = { term = "s_half", m_twice = -1 }
upper = { term = "d_five_half", m_twice = -1 }
laser_coupled = true
static_detuning_hz = 200.0

[custom.pair2]
lower = { term = "s_half", m_twice = 1 }
upper = { term = "d_five_half", m_twice = 1 }
laser_coupled = true
"#;
    let scenario = Scenario::parse(text).unwrap();
    let artifacts = execute(&scenario, &RunOptions::default()).unwrap();
    assert!(artifacts.trace_bytes.lines().count() == 9);
    assert!(artifacts.report.custom.is_some());
}

#[test]
fn seed_and_shots_overrides_apply() {
    let opts = RunOptions {
        seed: Some(123),
        shots_override: Some(24),
        format: None,
    };
    let artifacts = execute(&fig3(), &opts).unwrap();
    assert_eq!(artifacts.report.seed, 123);
    assert_eq!(artifacts.report.shots_per_point, 24);
}

#[test]
fn starved_fit_exits_with_the_non_convergence_code() {
    // one shot per point leaves no significant oscillation to fit
    let opts = RunOptions {
        seed: Some(123),
        shots_override: Some(1),
        format: None,
    };
    let err = execute(&fig3(), &opts).unwrap_err();
    assert!(matches!(err, CliError::FitNonConvergence(_)), "got {err:?}");
    assert_eq!(err.exit_code(), 3);
}
