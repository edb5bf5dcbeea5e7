use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use evofarm_simclient::{run_client, run_swarm, write_csv, ClientProfile};

#[derive(Debug, Parser)]
#[command(name = "simclient", version, about = "Simulated evaluating clients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one client until the algorithm finishes.
    Run {
        #[arg(long, default_value = "http://127.0.0.1:3000")]
        server: String,
        #[arg(long)]
        algorithm: String,
        /// Chromosomes per second; unconstrained when omitted.
        #[arg(long)]
        eval_rate: Option<f64>,
        /// Extra milliseconds before every request.
        #[arg(long, default_value_t = 0)]
        latency: u64,
        #[arg(long, default_value = "simclient")]
        label: String,
    },
    /// Run several clients concurrently from a profiles file (one JSON object per line).
    Swarm {
        #[arg(long, default_value = "http://127.0.0.1:3000")]
        server: String,
        #[arg(long)]
        algorithm: String,
        #[arg(long)]
        profiles: PathBuf,
        /// Seconds between client launches.
        #[arg(long, default_value_t = 0.0)]
        stagger: f64,
    },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            server,
            algorithm,
            eval_rate,
            latency,
            label,
        } => {
            let profile = ClientProfile {
                label,
                eval_rate,
                extra_latency_ms: latency,
                rate_jitter: 0.0,
            };
            let report = run_client(&server, &algorithm, profile).await?;
            write_csv(std::io::stdout().lock(), &[report])?;
        }
        Command::Swarm {
            server,
            algorithm,
            profiles,
            stagger,
        } => {
            let text = std::fs::read_to_string(&profiles).with_context(|| profiles.display().to_string())?;
            let profiles = ClientProfile::parse_lines(&text).map_err(anyhow::Error::msg)?;
            anyhow::ensure!(stagger >= 0.0 && stagger.is_finite(), "stagger must be non-negative");
            let swarm = run_swarm(&server, &algorithm, &profiles, Duration::from_secs_f64(stagger)).await?;
            let mut reports = Vec::new();
            for result in &swarm.clients {
                match result {
                    Ok(report) => reports.push(report.clone()),
                    Err(e) => {
                        eprintln!("{e}");
                        reports.extend(e.partial_report().cloned());
                    }
                }
            }
            write_csv(std::io::stdout().lock(), &reports)?;
            eprintln!(
                "aggregate_rate={:.3} total_evaluated={} span_seconds={:.3}",
                swarm.aggregate_rate, swarm.total_evaluated, swarm.span_seconds
            );
        }
    }
    Ok(())
}
