use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pairspec_cli::runner::{RunOptions, TraceFormat};
use pairspec_cli::{builtins, describe, run_to_dir, CliError};

#[derive(Parser)]
#[command(
    name = "pairspec",
    version,
    about = "Two-ion Ramsey/parity spectroscopy scenario runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, a run manifest, or a built-in scenario by name.
    Run {
        /// Path to a .scn scenario, a _manifest.json, or a built-in name.
        scenario: String,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Shots-per-point override.
        #[arg(long)]
        shots_override: Option<u32>,
        /// Output directory (defaults to the scenario's `outputs`, else "out").
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace table format.
        #[arg(long)]
        format: Option<TraceFormat>,
        /// Worker threads (defaults to all cores); results are identical
        /// for any thread count.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Print the configuration of a built-in scenario.
    Describe { name: String },
}

fn run_command(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            scenario,
            seed,
            shots_override,
            out,
            format,
            threads,
        } => {
            let opts = RunOptions {
                seed,
                shots_override,
                format,
            };
            let summary = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Validation(format!("--threads: {e}")))?
                    .install(|| run_to_dir(&scenario, &opts, out.as_deref())),
                None => run_to_dir(&scenario, &opts, out.as_deref()),
            }?;
            println!("trace:    {}", summary.trace_path.display());
            println!("report:   {}", summary.report_path.display());
            println!("manifest: {}", summary.manifest_path.display());
            print_highlights(&summary.artifacts.report);
            Ok(())
        }
        Command::ListScenarios => {
            for name in builtins::names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Describe { name } => {
            print!("{}", describe(&name)?);
            Ok(())
        }
    }
}

fn print_highlights(report: &pairspec_cli::runner::Report) {
    if let Some(quad) = &report.quadrupole {
        for point in &quad.per_gradient {
            println!(
                "gradient {:.4} V/mm²: freq = {:.4} ± {:.4} Hz (analytic {:.4} Hz)",
                point.gradient_v_per_mm2,
                point.fit.value("freq"),
                point.fit.stderr("freq"),
                point.analytic_frequency_hz
            );
        }
        if let Some(line) = &quad.line_fit {
            println!(
                "alpha = {:.4} ± {:.4} Hz/(V/mm²) (true {:.4}), offset = {:.4} ± {:.4} Hz",
                line.value("alpha"),
                line.stderr("alpha"),
                quad.alpha_true_hz_per_v_mm2,
                line.value("offset"),
                line.stderr("offset")
            );
        }
    }
    if let Some(grad) = &report.gradient {
        println!(
            "parity frequency = {:.4} ± {:.4} Hz (analytic {:.4} Hz, ΔB = {:.3e} G)",
            grad.fit.value("freq"),
            grad.fit.stderr("freq"),
            grad.analytic_frequency_hz,
            grad.delta_b_gauss
        );
    }
    if let Some(lw) = &report.linewidth {
        if let (Some(tau), Some(fwhm)) = (lw.tau_half_s, lw.fwhm_hz) {
            println!("tau_half = {:.4} ms, inferred laser FWHM = {:.2} Hz", tau * 1e3, fwhm);
        }
        println!(
            "largest single-ion deviation from DC: {:.4}",
            lw.single_ion_max_abs_deviation
        );
    }
    if let Some(custom) = &report.custom {
        if let Some(fit) = &custom.fit {
            let summary: Vec<String> = fit
                .params
                .iter()
                .map(|p| format!("{} = {:.5} ± {:.5}", p.name, p.value, p.stderr))
                .collect();
            println!("fit: {}", summary.join(", "));
        }
        if let Some(note) = &custom.note {
            println!("{note}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
