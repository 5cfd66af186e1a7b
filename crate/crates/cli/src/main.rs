use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use auctionlab::commands::combine;
use auctionlab::error::{CliError, EXIT_VERIFICATION};
use auctionlab::output::write_csv;
use auctionlab::scenario::load_scenario;
use auctionlab::{corpus, execute, CommandOutput, Directive, Options};
use auctionlab_core::rational::parse_rational;
use clap::{Args, Parser, Subcommand};

/// Draft auction lab: simulate, search for equilibria, check smoothness.
#[derive(Parser)]
#[command(name = "auctionlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play the scenario's profile through the mechanism.
    Run(Common),
    /// Check the profile, or enumerate every pure equilibrium of the plan space.
    Nash(Common),
    /// Solve for subgame-perfect equilibria by backward induction.
    Spe(Common),
    /// Check the smoothness inequality over the plan space.
    Smoothness(Common),
    /// Approximate each valuation by constraint-homogeneous ones.
    Approx(Common),
    /// Reproduce a golden instance; with no name or scenario, all of them.
    Reproduce(ReproduceArgs),
    /// Generate instances from the scenario's [sweep] section.
    Sweep(Common),
}

#[derive(Args)]
struct Flags {
    /// Override the grid step, e.g. `1/8`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write result rows as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Search cap (profiles for equilibrium enumeration, states for the solver).
    #[arg(long)]
    cap: Option<u64>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Corpus instance name.
    name: Option<String>,
    #[arg(long, conflicts_with = "name")]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
}

fn options(flags: &Flags) -> Result<Options, CliError> {
    let grid = flags
        .grid
        .as_deref()
        .map(|g| parse_rational(g).map_err(|e| CliError::Usage(format!("--grid: {e}"))))
        .transpose()?;
    Ok(Options {
        grid,
        seed: flags.seed,
        cap: flags.cap,
    })
}

fn dispatch(command: &Command) -> Result<(CommandOutput, Option<PathBuf>), CliError> {
    let (directive, common) = match command {
        Command::Run(c) => (Directive::Run, c),
        Command::Nash(c) => (Directive::Nash, c),
        Command::Spe(c) => (Directive::Spe, c),
        Command::Smoothness(c) => (Directive::Smoothness, c),
        Command::Approx(c) => (Directive::Approx, c),
        Command::Sweep(c) => (Directive::Sweep, c),
        Command::Reproduce(r) => {
            let opts = options(&r.flags)?;
            let out = match (&r.name, &r.scenario) {
                (Some(name), _) => corpus::reproduce(name, &opts)?,
                (None, Some(path)) => execute(Directive::Reproduce, &load_scenario(path)?, &opts)?,
                (None, None) => combine(
                    corpus::NAMES
                        .iter()
                        .map(|name| corpus::reproduce(name, &opts))
                        .collect::<Result<_, _>>()?,
                ),
            };
            return Ok((out, r.flags.out.clone()));
        }
    };
    let opts = options(&common.flags)?;
    let scenario = load_scenario(&common.scenario)?;
    Ok((execute(directive, &scenario, &opts)?, common.flags.out.clone()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = dispatch(&cli.command).and_then(|(out, path)| {
        if let Some(path) = path {
            write_csv(File::create(&path)?, &out.rows)?;
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            print!("{}", out.report);
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFICATION as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
