use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use framelab::cli::{self, CliError, OracleMode, RunOptions};

#[derive(Parser)]
#[command(name = "framelab", version, about = "Perturbation bounds for frames in finite-dimensional l^p spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analysis named in a job file.
    Run(RunArgs),
    /// Parse and validate a job file without running it.
    Validate { job: PathBuf },
    /// Run the job's sweep section.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    job: PathBuf,
    /// Output directory for report.json, report.txt and sweep artifacts.
    #[arg(long, default_value = "framelab-out")]
    out: PathBuf,
    #[arg(long)]
    max_delta: Option<f64>,
    #[arg(long)]
    tol_residual: Option<f64>,
    #[arg(long, default_value = "auto")]
    oracle: OracleMode,
}

fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var("FRAMELAB_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("FRAMELAB_SEED: '{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn run(args: RunArgs, force_sweep: bool) -> Result<(), CliError> {
    let opts = RunOptions {
        out_dir: Some(args.out),
        max_delta: args.max_delta,
        tol_residual: args.tol_residual,
        oracle: args.oracle,
        seed_override: seed_from_env()?,
        force_sweep,
        timestamp: None,
    };
    let out = cli::run_job(&args.job, &opts)?;
    print!("{}", cli::render_text(&out.document));
    println!("wrote {}", out.report_json.display());
    if let Some(csv) = &out.sweep_csv {
        println!("wrote {}", csv.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args, false),
        Command::Sweep(args) => run(args, true),
        Command::Validate { job } => cli::validate_job(&job).map(|j| {
            println!("ok: {} ({} matrices)", j.analysis.name(), j.matrices.len());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
