use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magagmon::runner::{execute, Command, Invocation};

#[derive(Parser)]
#[command(name = "magagmon", version, about = "Magnetic Agmon metrics, Feynman-Kac-Ito heat kernels and Peierls spectra")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides MAGAGMON_OUT and `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `sampling.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Heat kernel estimates (bridge validation against the uniform-field kernel, or e^{-tH} psi).
    Heatkernel(Common),
    /// Lévy areas and line integrals of sampled paths.
    LevyArea(Common),
    /// Averaged flux weight by Gauss-Hermite and Monte Carlo.
    Betabar(Common),
    /// Agmon distance to the classically allowed region.
    AgmonDist(Common),
    /// Lowest eigenpairs of the Peierls operator.
    Eigs(Common),
    /// Fit and check the decay bound on an eigenfunction.
    VerifyBound(Common),
    /// Corollary bounds (confining, concave) and the Carmona-type bound.
    Bounds(Common),
    /// Local Kato-class screen for the vector potential.
    KatoCheck(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Sub::Heatkernel(c) => (Command::Heatkernel, c),
        Sub::LevyArea(c) => (Command::LevyArea, c),
        Sub::Betabar(c) => (Command::Betabar, c),
        Sub::AgmonDist(c) => (Command::AgmonDist, c),
        Sub::Eigs(c) => (Command::Eigs, c),
        Sub::VerifyBound(c) => (Command::VerifyBound, c),
        Sub::Bounds(c) => (Command::Bounds, c),
        Sub::KatoCheck(c) => (Command::KatoCheck, c),
    };
    let inv = Invocation { command, config: c.config, out: c.out, seed: c.seed, threads: c.threads };
    match execute(&inv) {
        Ok(outcome) => {
            for a in &outcome.manifest.artifacts {
                println!("{}\t{}", outcome.out_dir.join(&a.name).display(), a.sha256);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("magagmon {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
