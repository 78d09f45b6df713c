use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use fraclap::config::parse_config;
use fraclap::run::{execute, Command};
use fraclap::Error;

#[derive(Parser)]
#[command(name = "fraclap", version, about = "Spectral solver for fractional Dirichlet-Laplace problems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true, env = "FRACLAP_OUT")]
    out: Option<PathBuf>,

    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress the stdout summary.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Compute the eigenbasis and write eigen.csv.
    Eig,
    /// Solve the linear problem w²(A) u = g.
    SolveLinear,
    /// Minimize the energy of the nonlinear problem.
    SolveNonlinear,
    /// Run the seeded invariant suite.
    Verify,
    /// Grid-refinement study of discrete eigenvalues.
    Convergence,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Eig => Command::Eig,
            Cmd::SolveLinear => Command::SolveLinear,
            Cmd::SolveNonlinear => Command::SolveNonlinear,
            Cmd::Verify => Command::Verify,
            Cmd::Convergence => Command::Convergence,
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&config.output));
    let base = path.parent().unwrap_or(Path::new("."));
    let outcome = execute(cli.command.into(), &config, base, &out)?;
    if !cli.quiet {
        print!("{}", outcome.summary);
        println!("results in {}", outcome.out_dir.display());
    }
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let pointer = match &e {
                Error::Config { pointer, .. } => Some(pointer.clone()),
                _ => None,
            };
            let body = json!({"error": {"kind": e.kind(), "message": e.to_string(), "pointer": pointer}});
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}
