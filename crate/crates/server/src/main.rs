use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use evofarm_server::{spawn, Allowlist, FarmOptions, LogMode, LogSink, RequestLog, ServerConfig};

#[derive(Debug, Parser)]
#[command(name = "evofarm-server", version, about = "Serve evolutionary runs to evaluating clients")]
struct Args {
    #[arg(long, default_value = "0.0.0.0:3000")]
    listen: SocketAddr,

    /// Address patterns allowed to fetch and submit; loopback only when omitted.
    #[arg(long)]
    allowlist: Option<PathBuf>,

    #[arg(long, default_value = "quiet")]
    log_mode: LogMode,

    /// Request log destination; standard error when omitted.
    #[arg(long)]
    log_file: Option<PathBuf>,

    /// Directory for per-algorithm journals; runs are not persisted when omitted.
    #[arg(long)]
    journal_dir: Option<PathBuf>,

    #[arg(long, default_value_t = 120)]
    lease_seconds: u64,

    /// Artificial delay inside every lease/submit critical section.
    #[arg(long, default_value_t = 0)]
    service_delay_ms: u64,

    /// Seconds a request may wait for work before getting 503.
    #[arg(long, default_value_t = 30)]
    wait_seconds: u64,

    /// Directory holding worker.html and its scripts.
    #[arg(long)]
    assets_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let allowlist = match &args.allowlist {
        Some(path) => Allowlist::from_file(path).map_err(anyhow::Error::msg)?,
        None => Allowlist::loopback_only(),
    };
    let sink = match &args.log_file {
        Some(path) => LogSink::File(path.clone()),
        None => LogSink::Stderr,
    };
    let log = RequestLog::open(args.log_mode, sink).context("opening request log")?;
    let config = ServerConfig {
        listen: args.listen,
        farm: FarmOptions {
            lease_seconds: args.lease_seconds,
            journal_dir: args.journal_dir.clone(),
            allowlist,
            service_delay: Duration::from_millis(args.service_delay_ms),
            wait_deadline: Duration::from_secs(args.wait_seconds),
            log: Arc::new(log),
        },
        assets_dir: args.assets_dir,
        recover: args.journal_dir.is_some(),
        reaper_interval: Duration::from_secs(1),
    };
    let server = spawn(config).await.context("starting server")?;
    println!("listening on {}", server.url());
    tokio::signal::ctrl_c().await?;
    server.stop().await?;
    Ok(())
}
