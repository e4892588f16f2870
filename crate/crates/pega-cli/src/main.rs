//! Experiment runner for the encrypted-TSP genetic algorithm engine.
//!
//! Subcommands: `keygen` (threshold key set to files), `encrypt` (TSPLIB
//! instance to an encrypted container plus the user-held city map), `solve`
//! (plaintext or encrypted evolutionary run with CSV output), `bench`
//! (payload sizes, transcript volume and phase timings), and `stats`
//! (mean/std and the rank-sum significance test over two run collections).
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pega_core::Error;

#[derive(Parser)]
#[command(name = "pega", version, about = "privacy-preserving genetic algorithm runner")]
struct Cli {
    /// key=value file consulted for any flag not given on the command line
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a threshold key set and write it to a directory
    Keygen(KeygenArgs),
    /// Pseudonymize and encrypt a TSPLIB instance
    Encrypt(EncryptArgs),
    /// Run the plaintext or the encrypted solver over an instance
    Solve(SolveArgs),
    /// Report payload sizes, transcript volume and phase timings
    Bench(BenchArgs),
    /// Compare two collections of final costs
    Stats(StatsArgs),
}

#[derive(Args)]
struct KeygenArgs {
    /// modulus length ‖N‖ in bits
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// output directory for pk.bin, sk.bin, share1.bin, share2.bin
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncryptArgs {
    /// TSPLIB instance file
    #[arg(long)]
    tsp: Option<PathBuf>,
    /// public key file from `keygen`
    #[arg(long)]
    pk: Option<PathBuf>,
    /// fixed-point exponent ℓ
    #[arg(long)]
    scale: Option<u32>,
    /// seed of the pseudonymization and entry encryption streams
    #[arg(long)]
    perm_seed: Option<u64>,
    /// encrypted container output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// city-map output path (defaults to OUT with a .map suffix)
    #[arg(long)]
    map_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// TSPLIB instance file
    #[arg(long)]
    tsp: Option<PathBuf>,
    /// plain (reference GA) or pega (encrypted engine)
    #[arg(long)]
    mode: Option<String>,
    /// fps or tournament
    #[arg(long)]
    selection: Option<String>,
    /// tournament size
    #[arg(long)]
    k: Option<usize>,
    /// population size
    #[arg(long)]
    pop: Option<usize>,
    /// generation budget
    #[arg(long)]
    gens: Option<u32>,
    #[arg(long)]
    crossover_rate: Option<f64>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    /// fixed-point exponent ℓ
    #[arg(long)]
    scale: Option<u32>,
    /// modulus length ‖N‖ in bits (pega mode)
    #[arg(long)]
    bits: Option<u32>,
    /// blinding width cap σ in bits (pega mode)
    #[arg(long)]
    sigma: Option<u32>,
    /// master seed: the four stream seeds default to master..master+3
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    seed_pop: Option<u64>,
    #[arg(long)]
    seed_sel: Option<u64>,
    #[arg(long)]
    seed_cross: Option<u64>,
    #[arg(long)]
    seed_mut: Option<u64>,
    #[arg(long)]
    key_seed: Option<u64>,
    #[arg(long)]
    perm_seed: Option<u64>,
    #[arg(long)]
    protocol_seed: Option<u64>,
    /// inproc or tcp (pega mode)
    #[arg(long)]
    transport: Option<String>,
    /// CSV output path; stdout when omitted
    #[arg(long)]
    csv: Option<PathBuf>,
    /// append the final best cost to this file (one number per line)
    #[arg(long)]
    append_final: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TSPLIB instance files
    #[arg(long, num_args = 1.., required = true)]
    instances: Vec<PathBuf>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    scale: Option<u32>,
    /// timed repetitions per instance
    #[arg(long)]
    repeat: Option<u32>,
    /// population size of the timed encrypted generations
    #[arg(long)]
    pop: Option<usize>,
    /// encrypted generations to time
    #[arg(long)]
    gens: Option<u32>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    csv_a: Option<PathBuf>,
    #[arg(long)]
    csv_b: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap's own help/version output is a success path
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    let settings = match config::Settings::load(cli.config.as_deref()) {
        Ok(settings) => settings,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Keygen(args) => commands::keygen(&args, &settings),
        Command::Encrypt(args) => commands::encrypt(&args, &settings),
        Command::Solve(args) => commands::solve(&args, &settings),
        Command::Bench(args) => commands::bench(&args, &settings),
        Command::Stats(args) => commands::stats(&args, &settings),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Usage errors exit 1, data errors exit 2.
pub enum CliError {
    Usage(String),
    Data(String),
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::InvalidParams(_) => CliError::Usage(err.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<String> for CliError {
    fn from(msg: String) -> Self {
        CliError::Usage(msg)
    }
}
