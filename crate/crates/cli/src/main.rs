mod commands;
mod params;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use record::SeedRange;

#[derive(Parser, Debug)]
#[command(name = "hedgeron", version, about = "Hedge, Sparsitron and inverse-Ising experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON parameter file; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed or inclusive range `N..M`.
    #[arg(long, global = true, default_value = "0")]
    pub seed: SeedRange,
    /// Noise model of the simulated subroutines: exact, uniform or adversarial.
    #[arg(long, global = true)]
    pub noise: Option<String>,
    /// Directory for run records, outcome files and tables.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classical Hedge on a loss stream.
    Hedge(Common),
    /// Simulated quantum estimate of Hedge's total loss.
    QhedgeEstimate(Common),
    /// Simulated quantum active Hedge (one sampled bet per round).
    QhedgeBet(Common),
    /// Sparsitron, original or approximate.
    Sparsitron(Common),
    /// Simulated quantum Sparsitron.
    Qsparsitron(Common),
    /// Write an Ising model file.
    IsingGen(Common),
    /// Draw spin samples from a model file.
    IsingSample(Common),
    /// Learn couplings from spin samples.
    IsingLearn(Common),
    /// Compare a learned model with the truth.
    IsingEval(Common),
    /// Empirical check of the alias sampler.
    SampleCheck(Common),
    /// Run acceptance suites by name (or `all`).
    Verify {
        suites: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Query-count sweep over N with a fitted log-log slope.
    Scaling(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return report_error(&e);
    }
    let result = match cli.command {
        Command::Hedge(c) => commands::run_seeded("hedge", &c, commands::hedge),
        Command::QhedgeEstimate(c) => commands::run_seeded("qhedge-estimate", &c, commands::qhedge_estimate),
        Command::QhedgeBet(c) => commands::run_seeded("qhedge-bet", &c, commands::qhedge_bet),
        Command::Sparsitron(c) => commands::run_seeded("sparsitron", &c, commands::sparsitron),
        Command::Qsparsitron(c) => commands::run_seeded("qsparsitron", &c, commands::qsparsitron),
        Command::IsingGen(c) => commands::run_seeded("ising-gen", &c, commands::ising_gen),
        Command::IsingSample(c) => commands::run_seeded("ising-sample", &c, commands::ising_sample),
        Command::IsingLearn(c) => commands::run_seeded("ising-learn", &c, commands::ising_learn),
        Command::IsingEval(c) => commands::run_seeded("ising-eval", &c, commands::ising_eval),
        Command::SampleCheck(c) => commands::run_seeded("sample-check", &c, commands::sample_check),
        Command::Verify { suites, common } => commands::verify(&suites, &common),
        Command::Scaling(c) => commands::scaling(&c),
    };
    match result {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("HEDGERON_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("HEDGERON_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            anyhow::bail!("HEDGERON_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Machine-readable error on stderr, exit code 2.
fn report_error(e: &anyhow::Error) -> ExitCode {
    let kind = match e.downcast_ref::<hedgeron::Error>() {
        Some(hedgeron::Error::InvalidParameter { .. }) => "invalid-parameter",
        Some(hedgeron::Error::OutOfRange { .. }) => "out-of-range",
        Some(hedgeron::Error::Parse(_)) => "parse",
        Some(hedgeron::Error::Io(_)) => "io",
        Some(_) => "runtime",
        None if e.downcast_ref::<serde_json::Error>().is_some() => "schema",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "error",
    };
    let body = serde_json::json!({ "error": { "kind": kind, "message": format!("{e:#}") } });
    eprintln!("{body}");
    ExitCode::from(2)
}
