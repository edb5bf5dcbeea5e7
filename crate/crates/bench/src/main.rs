use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use evofarm_bench::experiment::log_dir;
use evofarm_bench::report::{summary, write_outputs};
use evofarm_bench::{run_plan, ExperimentKind, ExperimentPlan};

#[derive(Debug, Parser)]
#[command(name = "bench", version, about = "Throughput experiments against a local server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Files {
    /// JSON experiment plan.
    #[arg(long)]
    plan: PathBuf,
    /// Directory for results.csv, fit.json and summary.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate against packet size, with a linear fit.
    PacketSweep(Files),
    /// Aggregate rate against the number of concurrent clients.
    Scaling(Files),
    /// Quiet against debug request logging.
    LoggingAb(Files),
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let (expected, files) = match Cli::parse().command {
        Command::PacketSweep(f) => (ExperimentKind::PacketSweep, f),
        Command::Scaling(f) => (ExperimentKind::ScalingSweep, f),
        Command::LoggingAb(f) => (ExperimentKind::LoggingAb, f),
    };
    let plan = ExperimentPlan::from_file(&files.plan).with_context(|| files.plan.display().to_string())?;
    anyhow::ensure!(
        plan.kind == expected,
        "plan kind {:?} does not match the {:?} command",
        plan.kind,
        expected
    );
    let outcome = run_plan(&plan, &log_dir(&files.out)).await?;
    write_outputs(&files.out, &plan, &outcome)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", summary(&plan, &outcome));
    Ok(())
}
