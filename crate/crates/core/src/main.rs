use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nest_migration::cli::{self, parse_int_list, parse_list};
use nest_migration::Result;

#[derive(Parser)]
#[command(name = "nest-migration", version, about = "Ant-colony nest migration on segmented pathway graphs")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one migration and write its artifacts.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "NEST_MIGRATION_OUT")]
        out: Option<PathBuf>,
    },
    /// Run a radius × resolution × scale-factor × seed grid.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "NEST_MIGRATION_OUT")]
        out: Option<PathBuf>,
        /// e.g. 20,30,40
        #[arg(long)]
        radii: Option<String>,
        /// e.g. 0,5,10 or 0..10
        #[arg(long)]
        resolutions: Option<String>,
        #[arg(long)]
        lambdas: Option<String>,
        /// e.g. 1..10
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Resume a snapshot for a number of ticks.
    Replay {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        ticks: u64,
        #[arg(long, env = "NEST_MIGRATION_OUT", default_value = "out")]
        out: PathBuf,
    },
}

fn execute(cmd: Command) -> Result<String> {
    match cmd {
        Command::Run { config, seed, out } => {
            let cfg = cli::resolve_config(config.as_deref(), seed, out.as_deref())?;
            Ok(cli::cmd_run(&cfg)?.line())
        }
        Command::Sweep {
            config,
            seed,
            out,
            radii,
            resolutions,
            lambdas,
            seeds,
        } => {
            let cfg = cli::resolve_config(config.as_deref(), seed, out.as_deref())?;
            let mut grid = cli::default_grid(&cfg);
            if let Some(s) = radii {
                grid.radii = parse_list(&s, "radii")?;
            }
            if let Some(s) = resolutions {
                grid.resolutions = parse_int_list(&s, "resolutions")?
                    .into_iter()
                    .map(|v| v as usize)
                    .collect();
            }
            if let Some(s) = lambdas {
                grid.lambdas = parse_list(&s, "lambdas")?;
            }
            if let Some(s) = seeds {
                grid.seeds = parse_int_list(&s, "seeds")?;
            }
            Ok(cli::cmd_sweep(&cfg, &grid)?.line())
        }
        Command::Replay { snapshot, ticks, out } => Ok(cli::cmd_replay(&snapshot, ticks, &out)?.line()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
