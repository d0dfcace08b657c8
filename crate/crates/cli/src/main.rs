use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paramop_cli::config::{problem_keys, problem_names};
use paramop_cli::{parse_config, resolve_output_dir, run_sweep, write_outputs, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "paramop", version, about = "Continuity and sensitivity sweeps for parameter-dependent operator equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a config and write CSV and text outputs
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List problem names and their parameters
    ListProblems,
    /// Parse and validate a config without running it
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<paramop_cli::RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListProblems => {
            for name in problem_names() {
                let keys = problem_keys(&name).unwrap_or_default();
                println!("{name}: {}", keys.join(", "));
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config).and_then(|cfg| {
            paramop_cli::run::build_problem(&cfg).map_err(|e| e.to_string())?;
            Ok(cfg)
        }) {
            Ok(cfg) => {
                println!(
                    "ok: {} ({})",
                    cfg.problem.name,
                    cfg.tasks.iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Run { config, output_dir, seed } => {
            let mut cfg = match load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let env = std::env::var(OUTPUT_DIR_ENV).ok();
            let dir = resolve_output_dir(output_dir.as_deref(), env.as_deref(), &cfg);
            let outcome = run_sweep(&cfg).and_then(|res| write_outputs(&res, &dir).map(|report| (report, res.exit_code())));
            match outcome {
                Ok((report, code)) => {
                    print!("{report}");
                    ExitCode::from(code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
