//! Core types for farming fitness evaluations out to remote clients.
//!
//! The server owns a population of bit-string [`Chromosome`]s, ships
//! unevaluated ones to clients in [`protocol::Packet`]s and breeds new ones
//! with [`tournament_replace`] once enough fitness values have come back.

pub mod error;
pub mod genome;
pub mod operators;
pub mod problem;
pub mod protocol;
pub mod run;
pub mod selection;

pub use error::{EvoError, Result};
pub use genome::{Chromosome, GeneCodec};
pub use operators::{crossover, crossover_at, mutate, OperatorConfig};
pub use problem::{griewank, griewank_as_printed, ObjectiveSense, ProblemKind, ProblemSpec};
pub use run::{is_terminated, AlgorithmConfig, ConfigPatch, RunState, RunStats};
pub use selection::{
    tournament_replace, tournament_replace_traced, Individual, IndividualState, TournamentRecord,
};
