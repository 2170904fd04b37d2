use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tqolab::cache::Cache;
use tqolab::{run, AppError, Kind, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "tqolab", version, about = "Stability experiments for commuting-projector Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a model file: projector form, commutation, frustration freeness.
    Validate { model: PathBuf },
    /// Run the staged lemma suite on the scenario's model.
    Suite {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn set_threads(threads: Option<usize>) -> Result<(), AppError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(AppError::Config("--threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Config(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Run { scenario, out, threads, seed } => {
            set_threads(threads)?;
            let sc = Scenario::load(&scenario)?;
            let outcome = run(&sc, &RunOptions { out_dir: out, threads, seed, cache: Cache::from_env() })?;
            println!("{} -> {}", sc.experiment.kind.name(), outcome.out_dir.display());
            for st in &outcome.scoreboard.stages {
                println!("  {:<24} {:?}", st.name, st.status);
            }
            Ok(())
        }
        Command::Validate { model } => {
            let m = tqolab_core::models::load_model(&model)?;
            println!(
                "{}: {} qubits, {} terms, ground degeneracy {}",
                m.name,
                m.n_qubits(),
                m.terms.len(),
                m.ground_degeneracy
            );
            Ok(())
        }
        Command::Suite { scenario, out, threads } => {
            set_threads(threads)?;
            let mut sc = Scenario::load(&scenario)?;
            sc.experiment.kind = Kind::LemmaSuite;
            let outcome = run(&sc, &RunOptions { out_dir: out, threads, seed: None, cache: Cache::from_env() })?;
            for st in &outcome.scoreboard.stages {
                println!("{:<18} {:?}", st.name, st.status);
            }
            println!("{} passed, {} failed -> {}", outcome.scoreboard.passed, outcome.scoreboard.failed, outcome.out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
