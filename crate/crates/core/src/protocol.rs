//! JSON messages exchanged between the server and evaluating clients.
//!
//! The loop is: the client fetches a [`Packet`], evaluates every chromosome,
//! and posts a [`ResultSubmission`] carrying only `(id, fitness)` pairs. The
//! reply to a submission is a [`LoopReply`] that already holds the next
//! packet, so a steady-state client makes one request per packet.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::Chromosome;
use crate::problem::ProblemSpec;
use crate::run::{AlgorithmConfig, ConfigPatch, RunState, RunStats};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("packet has no individuals")]
    EmptyPacket,
}

impl ProtocolError {
    /// The offending field (or JSON path) the error refers to.
    pub fn field(&self) -> Option<&str> {
        match self {
            ProtocolError::Parse { path, .. } => Some(path),
            ProtocolError::Validation { field, .. } => Some(field),
            ProtocolError::EmptyPacket => Some("individuals"),
        }
    }

    fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ProtocolError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

type Result<T> = std::result::Result<T, ProtocolError>;

fn parse<'a, T: Deserialize<'a>>(bytes: &'a [u8]) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        ProtocolError::Parse {
            path,
            message: err.into_inner().to_string(),
        }
    })
}

fn to_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("protocol types always serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketEntry {
    pub id: String,
    pub chromosome: Chromosome,
}

/// A batch of individuals leased to one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub packet_id: String,
    pub algorithm_id: String,
    pub individuals: Vec<PacketEntry>,
    pub problem: ProblemSpec,
    pub lease_seconds: u64,
}

pub fn encode_packet(packet: &Packet) -> Result<Vec<u8>> {
    if packet.individuals.is_empty() {
        return Err(ProtocolError::EmptyPacket);
    }
    Ok(to_bytes(packet))
}

pub fn decode_packet(bytes: &[u8]) -> Result<Packet> {
    let packet: Packet = parse(bytes)?;
    if packet.individuals.is_empty() {
        return Err(ProtocolError::EmptyPacket);
    }
    Ok(packet)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessResult {
    pub id: u64,
    pub fitness: f64,
}

/// Evaluated fitness values for (a subset of) one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSubmission {
    pub packet_id: String,
    pub results: Vec<FitnessResult>,
}

#[derive(Serialize)]
struct WireSubmission<'a> {
    packet_id: &'a str,
    results: Vec<WireResult>,
}

#[derive(Serialize)]
struct WireResult {
    id: String,
    fitness: f64,
}

#[derive(Deserialize)]
struct RawSubmission {
    packet_id: String,
    results: Vec<RawResult>,
}

#[derive(Deserialize)]
struct RawResult {
    id: String,
    fitness: serde_json::Value,
}

pub fn encode_submission(submission: &ResultSubmission) -> Result<Vec<u8>> {
    let wire = WireSubmission {
        packet_id: &submission.packet_id,
        results: submission
            .results
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.fitness.is_finite() {
                    Ok(WireResult {
                        id: r.id.to_string(),
                        fitness: r.fitness,
                    })
                } else {
                    Err(ProtocolError::validation(
                        format!("results[{i}].fitness"),
                        format!("non-finite value {}", r.fitness),
                    ))
                }
            })
            .collect::<Result<_>>()?,
    };
    Ok(to_bytes(&wire))
}

/// Parses and validates a submission body.
///
/// Identifiers must be decimal strings and every fitness a finite JSON
/// number. Whether the ids belong to the packet is checked by the server.
pub fn decode_submission(bytes: &[u8]) -> Result<ResultSubmission> {
    let raw: RawSubmission = parse(bytes)?;
    let results = raw
        .results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r.id.parse::<u64>().map_err(|_| {
                ProtocolError::validation(format!("results[{i}].id"), format!("unknown individual id {:?}", r.id))
            })?;
            let fitness = fitness_value(&r.fitness).ok_or_else(|| {
                ProtocolError::validation(
                    format!("results[{i}].fitness"),
                    format!("expected a finite number, got {}", r.fitness),
                )
            })?;
            Ok(FitnessResult { id, fitness })
        })
        .collect::<Result<_>>()?;
    Ok(ResultSubmission {
        packet_id: raw.packet_id,
        results,
    })
}

fn fitness_value(value: &serde_json::Value) -> Option<f64> {
    value.as_f64().filter(|f| f.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyStatus {
    Continue,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub evaluated_count: u64,
    pub best_fitness: Option<f64>,
}

/// Answer to a packet request or a submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopReply {
    pub status: ReplyStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_packet: Option<Packet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_summary: Option<RunSummary>,
    /// Set when the submission was a repeat of one already accepted.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub duplicate: bool,
}

impl LoopReply {
    pub fn proceed(packet: Packet) -> Self {
        LoopReply {
            status: ReplyStatus::Continue,
            next_packet: Some(packet),
            run_summary: None,
            duplicate: false,
        }
    }

    pub fn finished(summary: RunSummary) -> Self {
        LoopReply {
            status: ReplyStatus::Finished,
            next_packet: None,
            run_summary: Some(summary),
            duplicate: false,
        }
    }

    fn check(&self) -> Result<()> {
        match (self.status, &self.next_packet) {
            (ReplyStatus::Continue, None) => Err(ProtocolError::validation(
                "next_packet",
                "status continue requires a packet",
            )),
            (ReplyStatus::Finished, Some(_)) => Err(ProtocolError::validation(
                "next_packet",
                "status finished forbids a packet",
            )),
            (_, Some(p)) if p.individuals.is_empty() => Err(ProtocolError::EmptyPacket),
            _ => Ok(()),
        }
    }
}

pub fn encode_reply(reply: &LoopReply) -> Result<Vec<u8>> {
    reply.check()?;
    Ok(to_bytes(reply))
}

pub fn decode_reply(bytes: &[u8]) -> Result<LoopReply> {
    let reply: LoopReply = parse(bytes)?;
    reply.check()?;
    Ok(reply)
}

/// Parses the body of a create request.
pub fn decode_config(bytes: &[u8]) -> Result<AlgorithmConfig> {
    parse(bytes)
}

/// Parses the body of a restart request; an empty body is an empty patch.
pub fn decode_patch(bytes: &[u8]) -> Result<ConfigPatch> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(ConfigPatch::default());
    }
    parse(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PopulationCounts {
    pub fresh: u64,
    pub leased: u64,
    pub evaluated: u64,
    pub total_created: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluated_count: u64,
    pub best_fitness: f64,
}

/// Snapshot served by the status endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub algorithm_id: String,
    pub state: RunState,
    pub config: AlgorithmConfig,
    pub stats: RunStats,
    pub rate: f64,
    pub population: PopulationCounts,
    /// Best fitness after each accepted submission.
    pub best_trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateReply {
    pub algorithm_id: String,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub error: String,
}
