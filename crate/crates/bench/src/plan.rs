//! Experiment plans, read from JSON files.

use std::path::Path;

use evofarm_core::AlgorithmConfig;
use evofarm_server::LogMode;
use evofarm_simclient::ClientProfile;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PacketSweep,
    ScalingSweep,
    LoggingAb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkKind {
    #[default]
    Null,
    /// One log file per server inside the output directory.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerPlan {
    #[serde(default)]
    pub service_delay_ms: u64,
    #[serde(default = "quiet")]
    pub log_mode: LogMode,
    #[serde(default)]
    pub log_sink: SinkKind,
    #[serde(default = "default_lease")]
    pub lease_seconds: u64,
}

fn quiet() -> LogMode {
    LogMode::Quiet
}

fn default_lease() -> u64 {
    120
}

impl Default for ServerPlan {
    fn default() -> Self {
        ServerPlan {
            service_delay_ms: 0,
            log_mode: LogMode::Quiet,
            log_sink: SinkKind::Null,
            lease_seconds: default_lease(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub packet_sizes: Vec<usize>,
    #[serde(default)]
    pub client_counts: Vec<usize>,
    pub repetitions: usize,
    pub base_config: AlgorithmConfig,
    /// Client `i` of a run uses `profiles[i % len]`.
    pub profiles: Vec<ClientProfile>,
    #[serde(default)]
    pub server: ServerPlan,
    #[serde(default)]
    pub stagger_seconds: f64,
    /// Rates for which the fitted packet-size model is solved.
    #[serde(default)]
    pub extrapolate_rates: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("{0}")]
    Invalid(String),
    #[error("reading plan: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing plan: {0}")]
    Json(#[from] serde_json::Error),
}

impl ExperimentPlan {
    pub fn from_file(path: &Path) -> Result<Self, PlanError> {
        let plan: ExperimentPlan = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::Invalid(m));
        let needs_three = matches!(self.kind, ExperimentKind::PacketSweep | ExperimentKind::LoggingAb);
        if self.repetitions == 0 || (needs_three && self.repetitions < 3) {
            return bad(format!(
                "repetitions must be at least {} for this plan, got {}",
                if needs_three { 3 } else { 1 },
                self.repetitions
            ));
        }
        if self.profiles.is_empty() {
            return bad("at least one client profile is required".into());
        }
        for p in &self.profiles {
            p.validate().map_err(PlanError::Invalid)?;
        }
        if let Err(e) = self.base_config.validate() {
            return bad(format!("base_config: {e}"));
        }
        if !(self.stagger_seconds.is_finite() && self.stagger_seconds >= 0.0) {
            return bad("stagger_seconds must be non-negative".into());
        }
        match self.kind {
            ExperimentKind::PacketSweep if self.packet_sizes.is_empty() || self.packet_sizes.contains(&0) => {
                bad("packet_sweep needs non-empty, positive packet_sizes".into())
            }
            ExperimentKind::ScalingSweep if self.client_counts.is_empty() || self.client_counts.contains(&0) => {
                bad("scaling_sweep needs non-empty, positive client_counts".into())
            }
            _ => Ok(()),
        }
    }

    /// Profiles for a run with `count` clients, labels made unique.
    pub fn profiles_for(&self, count: usize) -> Vec<ClientProfile> {
        (0..count)
            .map(|i| {
                let mut p = self.profiles[i % self.profiles.len()].clone();
                p.label = format!("{}-{i}", p.label);
                p
            })
            .collect()
    }

    pub fn seed_for(&self, repetition: usize) -> u64 {
        self.base_config.seed.unwrap_or(1).wrapping_add(repetition as u64)
    }
}
