//! Native stand-in for browser clients.
//!
//! A client loops fetch, evaluate, submit until the server says the run is
//! finished. Evaluation is real; a profile can slow it down to a nominal
//! rate and add latency to every request, so slow or distant machines can be
//! simulated on one host.

use std::time::{Duration, Instant};

use evofarm_core::protocol::{
    decode_reply, encode_submission, ErrorBody, FitnessResult, LoopReply, Packet, ReplyStatus, ResultSubmission,
};
use rand::Rng;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Header the server uses to attribute evaluations to a client.
pub const CLIENT_HEADER: &str = "x-evofarm-client";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientProfile {
    pub label: String,
    /// Chromosomes per second; `None` evaluates as fast as the host allows.
    #[serde(default)]
    pub eval_rate: Option<f64>,
    /// Added before every request.
    #[serde(default)]
    pub extra_latency_ms: u64,
    /// Each packet's rate is scaled by a uniform factor in `[1 - j, 1 + j]`.
    #[serde(default)]
    pub rate_jitter: f64,
}

impl ClientProfile {
    pub fn unconstrained(label: impl Into<String>) -> Self {
        ClientProfile {
            label: label.into(),
            eval_rate: None,
            extra_latency_ms: 0,
            rate_jitter: 0.0,
        }
    }

    pub fn paced(label: impl Into<String>, eval_rate: f64) -> Self {
        ClientProfile {
            eval_rate: Some(eval_rate),
            ..ClientProfile::unconstrained(label)
        }
    }

    pub fn with_latency(mut self, ms: u64) -> Self {
        self.extra_latency_ms = ms;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(rate) = self.eval_rate {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(format!("{}: eval_rate must be positive, got {rate}", self.label));
            }
        }
        if !(0.0..1.0).contains(&self.rate_jitter) {
            return Err(format!("{}: rate_jitter must be in [0, 1), got {}", self.label, self.rate_jitter));
        }
        Ok(())
    }

    /// Parses one profile per non-empty line.
    pub fn parse_lines(text: &str) -> Result<Vec<ClientProfile>, String> {
        text.lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(n, line)| {
                let profile: ClientProfile =
                    serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
                profile.validate()?;
                Ok(profile)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientReport {
    pub label: String,
    pub packets_completed: u64,
    pub chromosomes_evaluated: u64,
    pub wall_seconds: f64,
    pub observed_rate: f64,
    #[serde(skip)]
    pub started: Instant,
    #[serde(skip)]
    pub finished: Instant,
}

impl ClientReport {
    fn new(label: &str, started: Instant) -> Self {
        ClientReport {
            label: label.to_string(),
            packets_completed: 0,
            chromosomes_evaluated: 0,
            wall_seconds: 0.0,
            observed_rate: 0.0,
            started,
            finished: started,
        }
    }

    fn close(mut self) -> Self {
        self.finished = Instant::now();
        self.wall_seconds = self.finished.duration_since(self.started).as_secs_f64();
        self.observed_rate = if self.wall_seconds > 0.0 {
            self.chromosomes_evaluated as f64 / self.wall_seconds
        } else {
            0.0
        };
        self
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("client {label} gave up after {attempts} attempts: {cause}")]
    Abort {
        label: String,
        attempts: u32,
        cause: String,
        /// Totals up to the failure.
        report: Box<ClientReport>,
    },

    #[error("server rejected request ({status}): {kind}: {message}")]
    Rejected {
        status: u16,
        kind: String,
        message: String,
        report: Box<ClientReport>,
    },

    #[error("invalid profile: {0}")]
    Profile(String),
}

impl ClientError {
    pub fn partial_report(&self) -> Option<&ClientReport> {
        match self {
            ClientError::Abort { report, .. } | ClientError::Rejected { report, .. } => Some(report),
            ClientError::Profile(_) => None,
        }
    }
}

enum Failure {
    /// Transport error or 5xx; worth retrying.
    Transient(String),
    LeaseExpired,
    Busy,
    Rejected { status: u16, body: ErrorBody },
}

async fn read_reply(response: reqwest::Response) -> Result<LoopReply, Failure> {
    let status = response.status();
    let bytes = response
        .bytes()
        .await
        .map_err(|e| Failure::Transient(e.to_string()))?;
    if status.is_success() {
        return decode_reply(&bytes).map_err(|e| Failure::Rejected {
            status: status.as_u16(),
            body: ErrorBody {
                kind: "parse".into(),
                error: e.to_string(),
            },
        });
    }
    match status {
        StatusCode::GONE => Err(Failure::LeaseExpired),
        StatusCode::SERVICE_UNAVAILABLE => Err(Failure::Busy),
        s if s.is_server_error() => Err(Failure::Transient(format!("HTTP {s}"))),
        s => Err(Failure::Rejected {
            status: s.as_u16(),
            body: serde_json::from_slice(&bytes).unwrap_or(ErrorBody {
                kind: "unknown".into(),
                error: String::from_utf8_lossy(&bytes).into_owned(),
            }),
        }),
    }
}

/// One simulated evaluating client.
pub struct SimClient {
    http: reqwest::Client,
    base: String,
    algorithm: String,
    profile: ClientProfile,
    retry: RetryPolicy,
}

impl SimClient {
    pub fn new(server: &str, algorithm: &str, profile: ClientProfile) -> Result<Self, ClientError> {
        profile.validate().map_err(ClientError::Profile)?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ClientError::Profile(e.to_string()))?;
        Ok(SimClient {
            http,
            base: server.trim_end_matches('/').to_string(),
            algorithm: algorithm.to_string(),
            profile,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    async fn once(&self, submission: Option<&[u8]>) -> Result<LoopReply, Failure> {
        if self.profile.extra_latency_ms > 0 {
            tokio::time::sleep(Duration::from_millis(self.profile.extra_latency_ms)).await;
        }
        let request = match submission {
            None => self.http.get(format!("{}/algorithm/{}/packet", self.base, self.algorithm)),
            Some(body) => self
                .http
                .post(format!("{}/algorithm/{}/results", self.base, self.algorithm))
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body.to_vec()),
        };
        let response = request
            .header(CLIENT_HEADER, &self.profile.label)
            .send()
            .await
            .map_err(|e| Failure::Transient(e.to_string()))?;
        read_reply(response).await
    }

    /// Sends with bounded retries. `Busy` answers are waited out without
    /// spending attempts; a resent submission is safe because the server
    /// acknowledges repeats without recounting them.
    async fn request(&self, submission: Option<&[u8]>, report: &ClientReport) -> Result<Option<LoopReply>, ClientError> {
        let mut failures = 0;
        let mut backoff = self.retry.initial_backoff;
        loop {
            match self.once(submission).await {
                Ok(reply) => return Ok(Some(reply)),
                Err(Failure::LeaseExpired) => return Ok(None),
                Err(Failure::Busy) => tokio::time::sleep(Duration::from_millis(200)).await,
                Err(Failure::Rejected { status, body }) => {
                    return Err(ClientError::Rejected {
                        status,
                        kind: body.kind,
                        message: body.error,
                        report: Box::new(report.clone().close()),
                    })
                }
                Err(Failure::Transient(cause)) => {
                    failures += 1;
                    if failures >= self.retry.attempts {
                        return Err(ClientError::Abort {
                            label: self.profile.label.clone(),
                            attempts: failures,
                            cause,
                            report: Box::new(report.clone().close()),
                        });
                    }
                    tokio::time::sleep(backoff).await;
                    backoff *= 2;
                }
            }
        }
    }

    async fn fetch(&self, report: &ClientReport) -> Result<LoopReply, ClientError> {
        loop {
            if let Some(reply) = self.request(None, report).await? {
                return Ok(reply);
            }
        }
    }

    /// Evaluates a packet, sleeping as needed to respect the profile's rate.
    async fn evaluate(&self, packet: &Packet, report: &ClientReport) -> Result<ResultSubmission, ClientError> {
        let began = Instant::now();
        let mut results = Vec::with_capacity(packet.individuals.len());
        for entry in &packet.individuals {
            let rejected = |message: String| ClientError::Rejected {
                status: 200,
                kind: "validation".into(),
                message,
                report: Box::new(report.clone().close()),
            };
            let id = entry
                .id
                .parse()
                .map_err(|_| rejected(format!("individual id {:?} is not an integer", entry.id)))?;
            let fitness = packet
                .problem
                .evaluate(&entry.chromosome)
                .map_err(|e| rejected(e.to_string()))?;
            results.push(FitnessResult { id, fitness });
        }
        if let Some(rate) = self.profile.eval_rate {
            let rate = if self.profile.rate_jitter > 0.0 {
                let j = self.profile.rate_jitter;
                rate * rand::rng().random_range(1.0 - j..=1.0 + j)
            } else {
                rate
            };
            let nominal = Duration::from_secs_f64(results.len() as f64 / rate);
            if let Some(deficit) = nominal.checked_sub(began.elapsed()) {
                tokio::time::sleep(deficit).await;
            }
        }
        Ok(ResultSubmission {
            packet_id: packet.packet_id.clone(),
            results,
        })
    }

    /// Runs until the server reports the algorithm finished.
    pub async fn run(&self) -> Result<ClientReport, ClientError> {
        let mut report = ClientReport::new(&self.profile.label, Instant::now());
        let mut reply = self.fetch(&report).await?;
        while reply.status == ReplyStatus::Continue {
            let packet = reply.next_packet.take().expect("continue replies carry a packet");
            let submission = self.evaluate(&packet, &report).await?;
            let body = encode_submission(&submission).expect("finite fitness values");
            reply = match self.request(Some(&body), &report).await? {
                Some(next) => {
                    report.packets_completed += 1;
                    report.chromosomes_evaluated += submission.results.len() as u64;
                    next
                }
                None => self.fetch(&report).await?,
            };
        }
        Ok(report.close())
    }
}

pub async fn run_client(server: &str, algorithm: &str, profile: ClientProfile) -> Result<ClientReport, ClientError> {
    SimClient::new(server, algorithm, profile)?.run().await
}

#[derive(Debug)]
pub struct SwarmReport {
    pub clients: Vec<Result<ClientReport, ClientError>>,
    /// Total evaluated over the span from the first start to the last finish.
    pub aggregate_rate: f64,
    pub total_evaluated: u64,
    pub span_seconds: f64,
}

/// Launches one client per profile, the i-th after `i * stagger`.
pub async fn run_swarm(
    server: &str,
    algorithm: &str,
    profiles: &[ClientProfile],
    stagger: Duration,
) -> Result<SwarmReport, ClientError> {
    if profiles.is_empty() {
        return Err(ClientError::Profile("a swarm needs at least one profile".into()));
    }
    let mut clients = Vec::with_capacity(profiles.len());
    for profile in profiles {
        clients.push(SimClient::new(server, algorithm, profile.clone())?);
    }
    let mut tasks = Vec::with_capacity(clients.len());
    for (i, client) in clients.into_iter().enumerate() {
        let delay = stagger * i as u32;
        tasks.push(tokio::spawn(async move {
            tokio::time::sleep(delay).await;
            client.run().await
        }));
    }
    let mut results = Vec::with_capacity(tasks.len());
    for task in tasks {
        results.push(task.await.expect("client task panicked"));
    }
    let reports: Vec<&ClientReport> = results
        .iter()
        .filter_map(|r| match r {
            Ok(report) => Some(report),
            Err(e) => e.partial_report(),
        })
        .collect();
    let total_evaluated = reports.iter().map(|r| r.chromosomes_evaluated).sum();
    let first = reports.iter().map(|r| r.started).min();
    let last = reports.iter().map(|r| r.finished).max();
    let span_seconds = match (first, last) {
        (Some(a), Some(b)) => b.duration_since(a).as_secs_f64(),
        _ => 0.0,
    };
    let aggregate_rate = if span_seconds > 0.0 {
        total_evaluated as f64 / span_seconds
    } else {
        0.0
    };
    Ok(SwarmReport {
        clients: results,
        aggregate_rate,
        total_evaluated,
        span_seconds,
    })
}

/// Writes reports as CSV with a header row.
pub fn write_csv<W: std::io::Write>(out: W, reports: &[ClientReport]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for report in reports {
        writer.serialize(report)?;
    }
    writer.flush()?;
    Ok(())
}
