//! Benchmark runner for CURL co-training experiments.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use curl_cotrain::experiment::{cell_run_reports, describe_dataset, run_experiment_with_threads};
use curl_cotrain::io::{generate_synthetic, save_run_report, write_dataset, MatrixFormat, SyntheticSpec};
use curl_cotrain::{Error, ExperimentConfig, MultiFeatureDataset};

#[derive(Parser)]
#[command(name = "curl-bench", version, about = "Co-training over early- and late-fused ensemble projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML or JSON config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for report.json, maps.csv and per-run reports
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Worker threads (defaults to one per core)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Summarize a dataset manifest
    Describe {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Write a synthetic multi-view dataset and its manifest
    GenSynthetic {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        e if e.is_data_error() => 2,
        _ => 3,
    }
}

fn run(config_path: &Path, out: &Path, threads: Option<usize>) -> Result<(), Error> {
    let config = ExperimentConfig::load(config_path)?;
    if threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let report = run_experiment_with_threads(&config, base, threads)?;

    let runs = out.join("runs");
    std::fs::create_dir_all(&runs).map_err(|e| Error::Io { path: runs.clone(), source: e })?;
    report.save(&out.join("report.json"))?;
    let csv = out.join("maps.csv");
    std::fs::write(&csv, report.summary_csv()).map_err(|e| Error::Io { path: csv, source: e })?;
    for (name, run) in cell_run_reports(&report) {
        save_run_report(&run, &runs.join(format!("{name}.json")))?;
    }

    println!("{:>6}  {:<14} {:>5}  {:>8}  {:>8}", "labels", "variant", "round", "mean", "std");
    for r in report.baseline.iter().chain(&report.summary) {
        println!(
            "{:>6}  {:<14} {:>5}  {:>8.4}  {:>8.4}",
            r.labels_per_class, r.variant, r.round, r.mean_map, r.std_map
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn gen_synthetic(spec_path: &Path, out: &Path, format: Format) -> Result<(), Error> {
    let spec = SyntheticSpec::load(spec_path)?;
    let d: MultiFeatureDataset<f64> = generate_synthetic(&spec)?;
    let name = spec_path.file_stem().map_or("synthetic".into(), |s| s.to_string_lossy().into_owned());
    let format = match format {
        Format::Csv => MatrixFormat::Csv,
        Format::Binary => MatrixFormat::Binary,
    };
    let manifest = write_dataset(&d, out, &name, format)?;
    println!("wrote {} ({} samples, {} views)", manifest.display(), d.n_samples(), d.n_features());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors count as configuration errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run { config, out, threads } => run(config, out, *threads),
        Command::Describe { manifest } => describe_dataset(manifest).map(|s| print!("{s}")),
        Command::GenSynthetic { spec, out, format } => gen_synthetic(spec, out, *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
