use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use degenlab::config::{parse_config, RunConfig};
use degenlab::pipeline::{run_pipeline, StageSelect};

#[derive(Parser)]
#[command(
    name = "degenlab",
    about = "Numerical laboratory for very degenerate convex energies",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<String>,

    /// Override the solver and lemma seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread budget; execution is sequential and deterministic, the
    /// flag is accepted for interface stability.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the ε-continuation solve and write solution + checkpoint.
    Solve,
    /// Solve, then write excess, Hölder, and rate reports.
    Diagnose,
    /// Solve, then write the traffic-flow and duality reports.
    Duality,
    /// Run the inequality sweep only.
    VerifyLemmas,
    /// Run every stage whose config section is present.
    Run,
}

fn load_config(cli: &Cli) -> Result<RunConfig, (i32, String)> {
    let Some(path) = &cli.config else {
        return Err((2, "missing required --config <FILE>".into()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| (2, format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| (2, e.to_string()))?;
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
        cfg.lemmas.seed = seed;
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err((2, "--threads must be positive".into()));
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(code as u8);
        }
    };
    let select = match cli.cmd {
        Cmd::Solve => StageSelect {
            solve: true,
            ..Default::default()
        },
        Cmd::Diagnose => StageSelect {
            solve: true,
            diagnose: true,
            ..Default::default()
        },
        Cmd::Duality => StageSelect {
            solve: true,
            duality: true,
            ..Default::default()
        },
        Cmd::VerifyLemmas => StageSelect {
            lemmas: true,
            ..Default::default()
        },
        Cmd::Run => StageSelect::from_sections(&cfg),
    };
    match run_pipeline(&cfg, select) {
        Ok(files) => {
            for f in &files {
                println!("wrote {}/{f}", cfg.output.directory);
            }
            println!("wrote {}/manifest.txt", cfg.output.directory);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
