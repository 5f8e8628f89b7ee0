use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use deskmer::pipeline::{
    cmd_assemble, cmd_evaluate, cmd_scaffold, cmd_simulate, write_timings, PipelineConfig,
    PipelineError, RunDir, Timings,
};
use deskmer::workers::Workers;

#[derive(Parser)]
#[command(
    name = "deskmer",
    version,
    about = "Iterative de Bruijn metagenome assembler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (overrides the config)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for simulation and scaffold traversal
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write per-stage timing to timing.tsv
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Simulate a community and its read pairs
    Simulate,
    /// Iterative contig generation
    Assemble,
    /// Scaffold contigs.fa with the reads
    Scaffold,
    /// Compare the assembly with the references
    Evaluate,
    /// simulate, assemble, scaffold and evaluate
    All,
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(t) = cli.threads {
        config.threads = t;
    }
    if let Some(s) = cli.seed {
        config.set_seed(s);
    }
    config.validate()?;
    let workers = Workers::new(config.worker_count());
    let dir = RunDir::new(&cli.out)?;
    let mut timings = Timings::default();
    let c = cli.command;
    if matches!(c, Command::Simulate | Command::All) {
        cmd_simulate(&config, &workers, &dir)?;
    }
    if matches!(c, Command::Assemble | Command::All) {
        cmd_assemble(&config, &workers, &dir, &mut timings)?;
    }
    if matches!(c, Command::Scaffold | Command::All) {
        cmd_scaffold(&config, &workers, &dir, &mut timings)?;
    }
    if matches!(c, Command::Evaluate | Command::All) {
        let report = cmd_evaluate(&config, &workers, &dir)?;
        print!("{}", report.to_text());
    }
    if cli.timing {
        write_timings(&dir, &timings)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deskmer: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
