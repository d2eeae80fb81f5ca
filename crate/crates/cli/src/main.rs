use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use riskconc_cli::jobs::Section;
use riskconc_cli::{report, run_accept, run_section, Format, Outcome, RunOptions};

/// Risk-curve simulations, concentration checks and the acceptance suite.
#[derive(Parser)]
#[command(name = "riskconc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normal sequence tail reports (`[[direct]]` entries).
    Direct(RunArgs),
    /// Monte Carlo mean risk curves (`[[curve]]` entries).
    Curve(RunArgs),
    /// r₀ and δ(t) evaluations (`[[margin]]` entries).
    Margin(RunArgs),
    /// Taylor-ratio tables (`[[expfam]]` entries).
    Expfam(RunArgs),
    /// Scenario runs (`[[scenario]]` entries).
    Scenario(RunArgs),
    /// Summarize a manifest or an output directory.
    Report { manifest: PathBuf },
    /// Run the acceptance suite.
    Accept(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl From<RunArgs> for RunOptions {
    fn from(a: RunArgs) -> Self {
        RunOptions { config: a.config, seed: a.seed, out: a.out, workers: a.workers, format: a.format }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Direct(a) => run_section(Section::Direct, &a.into()).map(|r| r.1),
        Command::Curve(a) => run_section(Section::Curve, &a.into()).map(|r| r.1),
        Command::Margin(a) => run_section(Section::Margin, &a.into()).map(|r| r.1),
        Command::Expfam(a) => run_section(Section::Expfam, &a.into()).map(|r| r.1),
        Command::Scenario(a) => run_section(Section::Scenario, &a.into()).map(|r| r.1),
        Command::Accept(a) => run_accept(&a.into()).map(|r| r.1),
        Command::Report { manifest } => report::summarize(&manifest).map(|(text, o)| {
            print!("{text}");
            o
        }),
    };
    match result {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(o) => ExitCode::from(o.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
