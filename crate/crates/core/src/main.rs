use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bvpen::cli::{self, checks, exit, report, CommandError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "bvpen", version, about = "Box-constrained BV optimization by smoothing and penalty continuation")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the continuation and write records, fields and a summary.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the same experiment on several meshes and print one row per mesh.
    Sweep {
        config: PathBuf,
        /// Cells per side, e.g. `16,32,64`.
        #[arg(long, value_delimiter = ',', required = true)]
        mesh_list: Vec<usize>,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite on the configured problem.
    Check { config: PathBuf },
}

fn run(args: Args) -> Result<(), CommandError> {
    match args.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let s = cli::cmd_run(&cfg, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
            if s.status != "converged" {
                eprintln!("warning: {}", s.status);
            }
        }
        Command::Sweep { config, mesh_list, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = cli::cmd_sweep(&cfg, &mesh_list)?;
            let table = report::sweep_table(&rows);
            print!("{table}");
            if let Some(path) = out {
                std::fs::write(&path, table).map_err(|e| CommandError {
                    code: exit::CONFIG,
                    message: format!("cannot write {}: {e}", path.display()),
                })?;
            }
            if rows.iter().any(|r| r.partial) {
                return Err(CommandError {
                    code: exit::SOLVER,
                    message: "some meshes aborted".into(),
                });
            }
        }
        Command::Check { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let results = cli::cmd_check(&cfg)?;
            for r in &results {
                println!("{r}");
            }
            if !checks::all_passed(&results) {
                return Err(CommandError {
                    code: exit::INVARIANT,
                    message: "invariant checks failed".into(),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
