mod config;
mod jobs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, Format, Overrides};

/// Stationary measures and critical noise levels of McKean-Vlasov SDEs.
///
/// Everything beyond the command is read from a strict JSON config.
#[derive(Parser, Debug)]
#[command(name = "mvsde", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON job configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output path prefix; `.csv` / `.json` are appended.
    #[arg(long)]
    output: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check the structural assumptions numerically.
    Audit(Common),
    /// All self-consistent means at one noise level.
    Roots {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Root counts over a noise grid with located transitions.
    PhaseDiagram(Common),
    /// Critical noise of a bistable model.
    Critical(Common),
    /// Critical noise as a function of the coupling.
    CriticalCurve(Common),
    /// Noise above which the series coefficients are ordered.
    SigmaR(Common),
    /// Construction and inequality checks for a multi-well drift.
    MultiwellCheck(Common),
    /// Interacting particle simulation of the stationary mean.
    Simulate(Common),
}

impl Cmd {
    fn split(self) -> (Command, Common, Option<f64>) {
        match self {
            Cmd::Audit(c) => (Command::Audit, c, None),
            Cmd::Roots { common, sigma } => (Command::Roots, common, sigma),
            Cmd::PhaseDiagram(c) => (Command::PhaseDiagram, c, None),
            Cmd::Critical(c) => (Command::Critical, c, None),
            Cmd::CriticalCurve(c) => (Command::CriticalCurve, c, None),
            Cmd::SigmaR(c) => (Command::SigmaR, c, None),
            Cmd::MultiwellCheck(c) => (Command::MultiwellCheck, c, None),
            Cmd::Simulate(c) => (Command::Simulate, c, None),
        }
    }
}

const CONFIG_ERROR: u8 = 1;
const NUMERICAL_FAILURE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common, sigma) = cli.command.split();

    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(CONFIG_ERROR);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }

    let overrides = Overrides {
        output: common.output,
        format: common.format,
        sigma,
    };
    let cfg = match config::load(&common.config, command, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let artifact = match jobs::run(&cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("numerical failure in {}: {e}", command.name());
            eprintln!("{e:?}");
            return ExitCode::from(NUMERICAL_FAILURE);
        }
    };
    match output::emit(&cfg, &artifact) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cannot write output: {e}");
            ExitCode::from(NUMERICAL_FAILURE)
        }
    }
}
