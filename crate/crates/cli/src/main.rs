//! `fsc`: train agents, measure cross-play, select partners and benchmark
//! few-shot coordination from one TOML run spec.

mod commands;
mod plot;
mod report;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::RunContext;
use crate::report::ConsistencyError;
use crate::spec::{Overrides, SpecError};

/// Values are resolved as: command-line flag, then spec file, then default.
#[derive(Parser, Debug)]
#[command(name = "fsc", version, about)]
struct Cli {
    /// TOML run spec.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Print the fully resolved spec, defaults included, and exit.
    #[arg(long, global = true)]
    explain: bool,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    replay_buffer_size: Option<usize>,
    #[arg(long, global = true)]
    num_threads: Option<usize>,
    #[arg(long, global = true)]
    num_games_per_thread: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Cap on concurrent workers; never changes results.
    #[arg(long, global = true, env = "FSC_MAX_WORKERS")]
    max_workers: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Self-play training; writes a checkpoint and a training log.
    Train,
    /// Cross-play matrix over the pool.
    Crossplay,
    /// Partner selection from the cross-play matrix.
    Select,
    /// Few-shot adaptation benchmark of the learner against its partners.
    Adapt,
    /// Adaptation benchmark over a hyper-parameter grid.
    Sweep,
    /// Render charts and CSV tables from JSON artifacts.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let overrides = Overrides {
        lr: cli.lr,
        batch_size: cli.batch_size,
        replay_buffer_size: cli.replay_buffer_size,
        num_threads: cli.num_threads,
        num_games_per_thread: cli.num_games_per_thread,
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        max_workers: cli.max_workers,
    };
    if cli.explain {
        let ctx = RunContext::new(cli.spec.as_deref(), &overrides)?;
        println!("# precedence: command-line flag > spec file > default");
        if let Some(cap) = ctx.max_workers {
            println!("# worker cap: {cap}");
        }
        print!("{}", ctx.spec.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        anyhow::bail!(SpecError("no command given (see --help)".into()));
    };
    let written = match command {
        Command::Report { paths } => report::cmd_report(&paths, cli.out_dir.as_deref())?,
        other => {
            let ctx = RunContext::new(cli.spec.as_deref(), &overrides)?;
            match other {
                Command::Train => commands::cmd_train(&ctx)?,
                Command::Crossplay => commands::cmd_crossplay(&ctx)?,
                Command::Select => commands::cmd_select(&ctx)?,
                Command::Adapt => commands::cmd_adapt(&ctx)?,
                Command::Sweep => commands::cmd_sweep(&ctx)?,
                Command::Report { .. } => unreachable!(),
            }
        }
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// 2: bad spec or input document, 3: I/O, 4: failed self-consistency check.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<SpecError>() || cause.is::<toml::de::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
        if cause.is::<ConsistencyError>() {
            return 4;
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
