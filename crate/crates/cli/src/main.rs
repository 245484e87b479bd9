//! `qcal`: command-line entry point for the calibration framework.
//!
//! Exit codes: 0 on success, 1 on usage errors (including refusing to
//! overwrite an existing output directory), 2 on execution errors. Every
//! successful subcommand prints a final machine-readable line
//! `OUTPUT: <path>` for scripted pipelines.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qcal_core::executor::{
    fit_run, load_runcard, run, sub_seed, ExecutorError, RunMode, RunOptions, RunRecord, Runcard,
};
use qcal_core::platform::{resolve_platform_dir, PlatformError};
use qcal_core::report::{
    append_metrics, render_compare, render_report, utc_now_rfc3339, MetricsRecord,
};

#[derive(Parser)]
#[command(
    name = "qcal",
    version,
    about = "Calibration workflows for superconducting-qubit platforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment runcard (YAML).
    runcard: PathBuf,
    /// Output directory for the run.
    #[arg(long, short)]
    output: PathBuf,
    /// Overwrite an existing non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Global RNG seed; derived from entropy when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a runcard: acquisition, fits, config updates and report.
    Run(RunArgs),
    /// Execute only the acquisition phase of a runcard.
    Acquire(RunArgs),
    /// Fit a previously acquired run directory.
    Fit {
        /// Run directory produced by `qcal acquire`.
        dir: PathBuf,
        /// Write platform_final.json with the accumulated updates.
        #[arg(long)]
        update: bool,
    },
    /// Regenerate report.html for a run directory.
    Report {
        /// Run directory.
        dir: PathBuf,
    },
    /// Render a combined report comparing two runs.
    Compare {
        /// First run directory (run A).
        dir_a: PathBuf,
        /// Second run directory (run B).
        dir_b: PathBuf,
        /// Directory receiving compare.html (defaults to run A).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Install a run's final platform config, backing up the previous one.
    Update {
        /// Run directory containing platform_final.json.
        dir: PathBuf,
    },
    /// Execute a runcard repeatedly, appending qubit metrics to a log.
    Monitor {
        /// Experiment runcard (YAML).
        runcard: PathBuf,
        /// Seconds between iteration starts (0 runs back to back).
        #[arg(long, default_value_t = 1800.0)]
        interval: f64,
        /// Number of iterations.
        #[arg(long, default_value_t = 1)]
        repeat: u32,
        /// Output directory; one sub-directory per iteration.
        #[arg(long, short)]
        output: PathBuf,
        /// Global RNG seed; derived from entropy when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum CliError {
    Usage(String),
    Execution(String),
}

impl From<ExecutorError> for CliError {
    fn from(error: ExecutorError) -> Self {
        match error {
            ExecutorError::OutputExists(path) => CliError::Usage(format!(
                "output directory {} already exists (use --force to overwrite)",
                path.display()
            )),
            other => CliError::Execution(other.to_string()),
        }
    }
}

impl From<PlatformError> for CliError {
    fn from(error: PlatformError) -> Self {
        CliError::Execution(error.to_string())
    }
}

impl From<qcal_core::report::ReportError> for CliError {
    fn from(error: qcal_core::report::ReportError) -> Self {
        CliError::Execution(error.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args, RunMode::Full),
        Command::Acquire(args) => cmd_run(args, RunMode::AcquireOnly),
        Command::Fit { dir, update } => cmd_fit(&dir, update),
        Command::Report { dir } => cmd_report(&dir),
        Command::Compare {
            dir_a,
            dir_b,
            output,
        } => cmd_compare(&dir_a, &dir_b, output),
        Command::Update { dir } => cmd_update(&dir),
        Command::Monitor {
            runcard,
            interval,
            repeat,
            output,
            seed,
        } => cmd_monitor(&runcard, interval, repeat, &output, seed),
    };
    match outcome {
        Ok(output) => {
            println!("OUTPUT: {}", output.display());
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Execution(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn load_and_resolve(runcard_path: &Path) -> Result<(Runcard, PathBuf), CliError> {
    let runcard = load_runcard(runcard_path)?;
    let platform_dir = resolve_platform_dir(&runcard.platform)?;
    Ok((runcard, platform_dir))
}

fn cmd_run(args: RunArgs, mode: RunMode) -> Result<PathBuf, CliError> {
    let (runcard, platform_dir) = load_and_resolve(&args.runcard)?;
    let options = RunOptions {
        seed: args.seed.unwrap_or_else(rand::random),
        mode,
        force: args.force,
    };
    run(&platform_dir, &runcard, &args.output, &options)?;
    Ok(args.output)
}

fn cmd_fit(dir: &Path, update: bool) -> Result<PathBuf, CliError> {
    fit_run(dir, update)?;
    Ok(dir.to_path_buf())
}

fn cmd_report(dir: &Path) -> Result<PathBuf, CliError> {
    let record = RunRecord::load(dir)?;
    let html = render_report(&record)?;
    let path = dir.join("report.html");
    std::fs::write(&path, html).map_err(|e| CliError::Execution(e.to_string()))?;
    Ok(path)
}

fn cmd_compare(dir_a: &Path, dir_b: &Path, output: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let record_a = RunRecord::load(dir_a)?;
    let record_b = RunRecord::load(dir_b)?;
    let html = render_compare(&record_a, &record_b)?;
    let out_dir = output.unwrap_or_else(|| dir_a.to_path_buf());
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Execution(e.to_string()))?;
    let path = out_dir.join("compare.html");
    std::fs::write(&path, html).map_err(|e| CliError::Execution(e.to_string()))?;
    Ok(path)
}

fn cmd_update(dir: &Path) -> Result<PathBuf, CliError> {
    let final_path = dir.join("platform_final.json");
    if !final_path.is_file() {
        return Err(CliError::Execution(format!(
            "{} has no platform_final.json (run `qcal fit --update` first)",
            dir.display()
        )));
    }
    let record = RunRecord::load(dir)?;
    let platform_dir = resolve_platform_dir(&record.meta.platform)?;
    let installed = platform_dir.join("platform.json");
    if installed.is_file() {
        let stamp: String = utc_now_rfc3339()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        let backup = platform_dir.join(format!("platform.json.bak-{stamp}"));
        std::fs::copy(&installed, &backup).map_err(|e| CliError::Execution(e.to_string()))?;
    }
    std::fs::copy(&final_path, &installed).map_err(|e| CliError::Execution(e.to_string()))?;
    Ok(installed)
}

fn cmd_monitor(
    runcard_path: &Path,
    interval: f64,
    repeat: u32,
    output: &Path,
    seed: Option<u64>,
) -> Result<PathBuf, CliError> {
    let (runcard, platform_dir) = load_and_resolve(runcard_path)?;
    std::fs::create_dir_all(output).map_err(|e| CliError::Execution(e.to_string()))?;
    let global_seed = seed.unwrap_or_else(rand::random);
    let metrics_path = output.join("metrics.jsonl");

    for iteration in 0..repeat {
        if iteration > 0 && interval > 0.0 {
            std::thread::sleep(std::time::Duration::from_secs_f64(interval));
        }
        let iter_name = format!("iter-{iteration:03}");
        let iter_dir = output.join(&iter_name);
        let options = RunOptions {
            seed: sub_seed(global_seed, &iter_name),
            mode: RunMode::Full,
            force: true,
        };
        // A failed iteration is logged and the loop continues.
        let record = match run(&platform_dir, &runcard, &iter_dir, &options) {
            Ok(record) => record,
            Err(e) => {
                eprintln!("monitor: iteration {iteration} failed: {e}");
                continue;
            }
        };
        let mut records = Vec::new();
        let timestamp = utc_now_rfc3339();
        for action in &record.actions {
            let Some(results) = &action.results else {
                continue;
            };
            for (target, tr) in &results.per_target {
                if tr.quality == qcal_core::protocols::FitQuality::Failed {
                    continue;
                }
                for (metric, value) in &tr.values {
                    records.push(MetricsRecord {
                        timestamp: timestamp.clone(),
                        qubit: target.clone(),
                        metric: metric.clone(),
                        value: *value,
                        run_dir: iter_name.clone(),
                    });
                }
            }
        }
        if let Err(e) = append_metrics(&metrics_path, &records) {
            eprintln!("monitor: failed to append metrics: {e}");
        }
    }
    Ok(output.to_path_buf())
}
