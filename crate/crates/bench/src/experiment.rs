//! Runs plans against an in-process server over loopback HTTP.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use evofarm_core::{AlgorithmConfig, Chromosome, ConfigPatch, ProblemSpec};
use evofarm_server::{spawn, FarmOptions, LogMode, LogSink, RequestLog, RunningServer, ServerConfig};
use evofarm_simclient::{run_swarm, ClientProfile};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::plan::{ExperimentKind, ExperimentPlan, SinkKind};
use crate::stats::{fit_linear, median, rank_sum, LinearFit, RankSum};

/// One measured run; the first six columns match the server's CSV status export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub algorithm_id: String,
    pub clients: usize,
    pub packet_size: usize,
    pub evaluated: u64,
    pub seconds: f64,
    /// Server-side rate: evaluated over first packet issue to last submission.
    pub rate: f64,
    pub repetition: usize,
    pub requests: u64,
    pub mode: String,
    /// Client-side aggregate rate, for cross-checking.
    pub client_rate: f64,
    /// `ok`, or the reason the run is excluded from analysis.
    pub outcome: String,
}

impl RunRow {
    pub fn ok(&self) -> bool {
        self.outcome == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub label: String,
    pub target_rate: f64,
    /// Packet size at which the fitted line reaches `target_rate`.
    pub packet_size: Option<f64>,
}

pub const EXTRAPOLATION_LABEL: &str = "model extrapolation, not a measurement";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSweepAnalysis {
    pub model: String,
    pub fit: Option<LinearFit>,
    pub fit_refused: Option<String>,
    /// Rate of evaluating locally without any server round trips.
    pub standalone_rate: f64,
    pub extrapolations: Vec<Extrapolation>,
    /// Median request count per packet size.
    pub median_requests: BTreeMap<usize, f64>,
    pub median_rate: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingAnalysis {
    pub best_rate: BTreeMap<usize, f64>,
    pub median_rate: BTreeMap<usize, f64>,
    pub best_case_non_decreasing: bool,
    /// Best rate at the largest count over best rate at the smallest.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggingAnalysis {
    pub quiet_rates: Vec<f64>,
    pub debug_rates: Vec<f64>,
    pub quiet_median: Option<f64>,
    pub debug_median: Option<f64>,
    /// (quiet median - debug median) / debug median.
    pub relative_difference: Option<f64>,
    pub rank_sum: Option<RankSum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Analysis {
    PacketSweep(PacketSweepAnalysis),
    ScalingSweep(ScalingAnalysis),
    LoggingAb(LoggingAnalysis),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub rows: Vec<RunRow>,
    pub analysis: Analysis,
    pub warnings: Vec<String>,
}

fn mode_name(mode: LogMode) -> &'static str {
    match mode {
        LogMode::Quiet => "quiet",
        LogMode::Debug => "debug",
    }
}

async fn start_server(plan: &ExperimentPlan, mode: LogMode, log_dir: &Path) -> anyhow::Result<RunningServer> {
    let sink = match plan.server.log_sink {
        SinkKind::Null => LogSink::Null,
        SinkKind::File => {
            std::fs::create_dir_all(log_dir)?;
            LogSink::File(log_dir.join(format!("server-{}.log", mode_name(mode))))
        }
    };
    let mut config = ServerConfig::local();
    config.farm = FarmOptions {
        lease_seconds: plan.server.lease_seconds,
        service_delay: Duration::from_millis(plan.server.service_delay_ms),
        log: Arc::new(RequestLog::open(mode, sink)?),
        ..FarmOptions::default()
    };
    Ok(spawn(config).await?)
}

/// An algorithm reused across repetitions via restart.
struct Subject {
    id: String,
    runs: usize,
}

impl Subject {
    fn create(server: &RunningServer, plan: &ExperimentPlan, id: String, packet_size: usize) -> anyhow::Result<Self> {
        let config = AlgorithmConfig {
            algorithm_id: Some(id.clone()),
            packet_size,
            seed: Some(plan.seed_for(0)),
            ..plan.base_config.clone()
        };
        server.farm.create(config)?;
        Ok(Subject { id, runs: 0 })
    }

    async fn run(
        &mut self,
        server: &RunningServer,
        plan: &ExperimentPlan,
        profiles: &[ClientProfile],
        repetition: usize,
        mode: LogMode,
    ) -> anyhow::Result<RunRow> {
        if self.runs > 0 {
            let patch = ConfigPatch {
                seed: Some(plan.seed_for(repetition)),
                ..ConfigPatch::default()
            };
            server.farm.restart(&self.id, &patch).await?;
        }
        self.runs += 1;
        let stagger = Duration::from_secs_f64(plan.stagger_seconds);
        let swarm = run_swarm(&server.url(), &self.id, profiles, stagger).await?;
        let status = server.farm.status(&self.id).await?;
        let failures: Vec<String> = swarm
            .clients
            .iter()
            .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
            .collect();
        Ok(RunRow {
            algorithm_id: self.id.clone(),
            clients: profiles.len(),
            packet_size: status.config.packet_size,
            evaluated: status.stats.evaluated_count,
            seconds: status.stats.elapsed_seconds,
            rate: status.rate,
            repetition,
            requests: status.stats.request_count,
            mode: mode_name(mode).to_string(),
            client_rate: swarm.aggregate_rate,
            outcome: if failures.is_empty() {
                "ok".into()
            } else {
                format!("failed: {}", failures.join("; "))
            },
        })
    }
}

fn failed_row(id: &str, clients: usize, packet_size: usize, repetition: usize, mode: LogMode, e: anyhow::Error) -> RunRow {
    RunRow {
        algorithm_id: id.to_string(),
        clients,
        packet_size,
        evaluated: 0,
        seconds: 0.0,
        rate: 0.0,
        repetition,
        requests: 0,
        mode: mode_name(mode).to_string(),
        client_rate: 0.0,
        outcome: format!("failed: {e:#}"),
    }
}

fn warn_failures(rows: &[RunRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| !r.ok())
        .map(|r| {
            format!(
                "run {} repetition {} excluded from analysis: {}",
                r.algorithm_id, r.repetition, r.outcome
            )
        })
        .collect()
}

fn group_median<K: Ord + Copy>(rows: &[RunRow], key: impl Fn(&RunRow) -> K, value: impl Fn(&RunRow) -> f64) -> BTreeMap<K, f64> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.ok()) {
        groups.entry(key(r)).or_default().push(value(r));
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| median(&v).map(|m| (k, m)))
        .collect()
}

/// Chromosomes per second evaluated in a tight local loop.
pub fn standalone_rate(problem: &ProblemSpec, duration: Duration) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let pool: Vec<Chromosome> = (0..256)
        .map(|_| Chromosome::random(problem.chromosome_len(), &mut rng))
        .collect();
    let start = Instant::now();
    let mut n = 0usize;
    let mut sink = 0.0;
    while start.elapsed() < duration {
        for c in &pool {
            sink += problem.evaluate(c).unwrap_or(0.0);
        }
        n += pool.len();
    }
    std::hint::black_box(sink);
    n as f64 / start.elapsed().as_secs_f64()
}

pub fn analyse_packet_sweep(plan: &ExperimentPlan, rows: &[RunRow], standalone: f64) -> PacketSweepAnalysis {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.ok())
        .map(|r| (r.packet_size as f64, r.rate))
        .collect();
    let (fit, fit_refused) = match fit_linear(&points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut targets = plan.extrapolate_rates.clone();
    targets.push(standalone);
    let extrapolations = match &fit {
        Some(f) => targets
            .into_iter()
            .map(|target_rate| Extrapolation {
                label: EXTRAPOLATION_LABEL.into(),
                target_rate,
                packet_size: f.solve_for(target_rate).filter(|s| *s > 0.0),
            })
            .collect(),
        None => Vec::new(),
    };
    PacketSweepAnalysis {
        model: "rate = intercept + slope * packet_size".into(),
        fit,
        fit_refused,
        standalone_rate: standalone,
        extrapolations,
        median_requests: group_median(rows, |r| r.packet_size, |r| r.requests as f64),
        median_rate: group_median(rows, |r| r.packet_size, |r| r.rate),
    }
}

pub fn analyse_scaling(rows: &[RunRow]) -> ScalingAnalysis {
    let mut best_rate: BTreeMap<usize, f64> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.ok()) {
        let best = best_rate.entry(r.clients).or_insert(f64::NEG_INFINITY);
        *best = best.max(r.rate);
    }
    let bests: Vec<f64> = best_rate.values().copied().collect();
    let speedup = match (bests.first(), bests.last()) {
        (Some(first), Some(last)) if *first > 0.0 => Some(last / first),
        _ => None,
    };
    ScalingAnalysis {
        best_case_non_decreasing: bests.windows(2).all(|w| w[1] >= w[0]),
        median_rate: group_median(rows, |r| r.clients, |r| r.rate),
        best_rate,
        speedup,
    }
}

pub fn analyse_logging(rows: &[RunRow]) -> LoggingAnalysis {
    let rates = |mode: &str| -> Vec<f64> { rows.iter().filter(|r| r.ok() && r.mode == mode).map(|r| r.rate).collect() };
    let quiet_rates = rates("quiet");
    let debug_rates = rates("debug");
    let quiet_median = median(&quiet_rates);
    let debug_median = median(&debug_rates);
    LoggingAnalysis {
        relative_difference: match (quiet_median, debug_median) {
            (Some(q), Some(d)) if d > 0.0 => Some((q - d) / d),
            _ => None,
        },
        rank_sum: rank_sum(&quiet_rates, &debug_rates),
        quiet_rates,
        debug_rates,
        quiet_median,
        debug_median,
    }
}

async fn packet_sweep(plan: &ExperimentPlan, log_dir: &Path) -> anyhow::Result<Outcome> {
    let mode = plan.server.log_mode;
    let server = start_server(plan, mode, log_dir).await?;
    let profiles = plan.profiles_for(1);
    let mut subjects = Vec::new();
    for &size in &plan.packet_sizes {
        subjects.push(Subject::create(&server, plan, format!("sweep-s{size}"), size)?);
    }
    let mut rows = Vec::new();
    // repetition-major order spreads slow drift evenly over packet sizes
    for rep in 0..plan.repetitions {
        for (subject, &size) in subjects.iter_mut().zip(&plan.packet_sizes) {
            let row = match subject.run(&server, plan, &profiles, rep, mode).await {
                Ok(row) => row,
                Err(e) => failed_row(&subject.id, 1, size, rep, mode, e),
            };
            rows.push(row);
        }
    }
    server.stop().await?;
    let standalone = standalone_rate(&plan.base_config.problem, Duration::from_millis(200));
    Ok(Outcome {
        warnings: warn_failures(&rows),
        analysis: Analysis::PacketSweep(analyse_packet_sweep(plan, &rows, standalone)),
        rows,
    })
}

async fn scaling_sweep(plan: &ExperimentPlan, log_dir: &Path) -> anyhow::Result<Outcome> {
    let mode = plan.server.log_mode;
    let server = start_server(plan, mode, log_dir).await?;
    let packet_size = plan.base_config.packet_size;
    let mut subjects = Vec::new();
    for &count in &plan.client_counts {
        subjects.push(Subject::create(&server, plan, format!("scale-c{count}"), packet_size)?);
    }
    let mut rows = Vec::new();
    for rep in 0..plan.repetitions {
        for (subject, &count) in subjects.iter_mut().zip(&plan.client_counts) {
            let profiles = plan.profiles_for(count);
            let row = match subject.run(&server, plan, &profiles, rep, mode).await {
                Ok(row) => row,
                Err(e) => failed_row(&subject.id, count, packet_size, rep, mode, e),
            };
            rows.push(row);
        }
    }
    server.stop().await?;
    Ok(Outcome {
        warnings: warn_failures(&rows),
        analysis: Analysis::ScalingSweep(analyse_scaling(&rows)),
        rows,
    })
}

async fn logging_ab(plan: &ExperimentPlan, log_dir: &Path) -> anyhow::Result<Outcome> {
    let packet_size = plan.base_config.packet_size;
    let profiles = plan.profiles_for(1);
    let mut arms = Vec::new();
    for mode in [LogMode::Quiet, LogMode::Debug] {
        let server = start_server(plan, mode, log_dir).await?;
        let subject = Subject::create(&server, plan, format!("logging-{}", mode_name(mode)), packet_size)?;
        arms.push((mode, server, subject));
    }
    let mut rows = Vec::new();
    for rep in 0..plan.repetitions {
        // alternate which arm goes first so drift does not favour one mode
        let order: [usize; 2] = if rep % 2 == 0 { [0, 1] } else { [1, 0] };
        for i in order {
            let (mode, server, subject) = &mut arms[i];
            let row = match subject.run(server, plan, &profiles, rep, *mode).await {
                Ok(row) => row,
                Err(e) => failed_row(&subject.id, 1, packet_size, rep, *mode, e),
            };
            rows.push(row);
        }
    }
    for (_, server, _) in arms {
        server.stop().await?;
    }
    Ok(Outcome {
        warnings: warn_failures(&rows),
        analysis: Analysis::LoggingAb(analyse_logging(&rows)),
        rows,
    })
}

/// Executes a validated plan. Server logs, if any, go to `log_dir`.
pub async fn run_plan(plan: &ExperimentPlan, log_dir: &Path) -> anyhow::Result<Outcome> {
    plan.validate()?;
    match plan.kind {
        ExperimentKind::PacketSweep => packet_sweep(plan, log_dir).await,
        ExperimentKind::ScalingSweep => scaling_sweep(plan, log_dir).await,
        ExperimentKind::LoggingAb => logging_ab(plan, log_dir).await,
    }
}

/// Default directory for server logs of a run writing to `out`.
pub fn log_dir(out: &Path) -> PathBuf {
    out.join("logs")
}
