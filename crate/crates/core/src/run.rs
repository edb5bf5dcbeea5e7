//! Experiment definition, run counters and the termination rule.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{EvoError, Result};
use crate::operators::OperatorConfig;
use crate::problem::{ObjectiveSense, ProblemSpec};

/// Full definition of one evolutionary run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    /// Assigned by the server when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm_id: Option<String>,
    pub problem: ProblemSpec,
    pub population_size: usize,
    /// Parents are drawn only from this many best evaluated individuals.
    pub elite_size: usize,
    pub packet_size: usize,
    #[serde(default)]
    pub operators: OperatorConfig,
    #[serde(default)]
    pub max_evaluations: Option<u64>,
    #[serde(default)]
    pub fitness_threshold: Option<f64>,
    /// Seed for the server-side random source; chosen at creation when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl AlgorithmConfig {
    /// Griewank-10, population 512, elite 256, 80/20 operator shares, 5000 evaluations.
    pub fn griewank_benchmark(packet_size: usize) -> Self {
        AlgorithmConfig {
            algorithm_id: None,
            problem: ProblemSpec::griewank(10).expect("valid problem"),
            population_size: 512,
            elite_size: 256,
            packet_size,
            operators: OperatorConfig::default(),
            max_evaluations: Some(5000),
            fitness_threshold: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(id) = &self.algorithm_id {
            if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(EvoError::config(format!(
                    "algorithm_id {id:?} must be non-empty and use only [A-Za-z0-9_-]"
                )));
            }
        }
        if self.population_size == 0 {
            return Err(EvoError::config("population_size must be at least 1"));
        }
        if self.elite_size == 0 || self.elite_size > self.population_size {
            return Err(EvoError::config(format!(
                "elite_size must be in 1..={}, got {}",
                self.population_size, self.elite_size
            )));
        }
        if self.packet_size == 0 {
            return Err(EvoError::config("packet_size must be at least 1"));
        }
        self.operators.validate()?;
        if self.elite_size < self.operators.tournament_size {
            return Err(EvoError::config(format!(
                "elite_size {} is smaller than tournament_size {}",
                self.elite_size, self.operators.tournament_size
            )));
        }
        if self.max_evaluations.is_none() && self.fitness_threshold.is_none() {
            return Err(EvoError::config(
                "at least one of max_evaluations / fitness_threshold must be set",
            ));
        }
        if self.max_evaluations == Some(0) {
            return Err(EvoError::config("max_evaluations must be positive"));
        }
        if let Some(t) = self.fitness_threshold {
            if !t.is_finite() {
                return Err(EvoError::config("fitness_threshold must be finite"));
            }
        }
        Ok(())
    }

    pub fn sense(&self) -> ObjectiveSense {
        self.problem.sense()
    }
}

/// Parameter edits applied when an algorithm is restarted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub population_size: Option<usize>,
    pub elite_size: Option<usize>,
    pub packet_size: Option<usize>,
    pub operators: Option<OperatorConfig>,
    pub max_evaluations: Option<u64>,
    pub fitness_threshold: Option<f64>,
    pub seed: Option<u64>,
}

impl ConfigPatch {
    pub fn is_empty(&self) -> bool {
        *self == ConfigPatch::default()
    }

    pub fn apply(&self, base: &AlgorithmConfig) -> Result<AlgorithmConfig> {
        let mut next = base.clone();
        if let Some(v) = self.population_size {
            next.population_size = v;
        }
        if let Some(v) = self.elite_size {
            next.elite_size = v;
        }
        if let Some(v) = self.packet_size {
            next.packet_size = v;
        }
        if let Some(v) = self.operators {
            next.operators = v;
        }
        if let Some(v) = self.max_evaluations {
            next.max_evaluations = Some(v);
        }
        if let Some(v) = self.fitness_threshold {
            next.fitness_threshold = Some(v);
        }
        if let Some(v) = self.seed {
            next.seed = Some(v);
        }
        next.validate()?;
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Created,
    Running,
    Finished,
}

/// Counters and timings for one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub evaluated_count: u64,
    /// Individuals handed out in packets, re-dispatches included.
    pub dispatched_count: u64,
    pub best_fitness: Option<f64>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    /// First packet issue to last submission, or to now while running.
    pub elapsed_seconds: f64,
    pub per_client: BTreeMap<String, u64>,
    pub request_count: u64,
}

impl RunStats {
    /// Chromosomes evaluated per second; zero before any time has elapsed.
    pub fn rate(&self) -> f64 {
        if self.elapsed_seconds > 0.0 {
            self.evaluated_count as f64 / self.elapsed_seconds
        } else {
            0.0
        }
    }
}

/// Budget exhausted, or best fitness at or beyond the threshold.
pub fn is_terminated(stats: &RunStats, config: &AlgorithmConfig) -> bool {
    if let Some(max) = config.max_evaluations {
        if stats.evaluated_count >= max {
            return true;
        }
    }
    match (config.fitness_threshold, stats.best_fitness) {
        (Some(threshold), Some(best)) => match config.sense() {
            ObjectiveSense::Minimize => best <= threshold,
            ObjectiveSense::Maximize => best >= threshold,
        },
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(evaluated: u64, best: Option<f64>) -> RunStats {
        RunStats {
            evaluated_count: evaluated,
            best_fitness: best,
            ..Default::default()
        }
    }

    #[test]
    fn budget_boundary() {
        let config = AlgorithmConfig::griewank_benchmark(100);
        assert!(is_terminated(&stats(5000, None), &config));
        assert!(!is_terminated(&stats(4999, None), &config));
    }

    #[test]
    fn threshold_by_sense() {
        let mut config = AlgorithmConfig::griewank_benchmark(100);
        config.fitness_threshold = Some(0.1);
        assert!(is_terminated(&stats(10, Some(0.05)), &config));
        assert!(!is_terminated(&stats(10, Some(0.5)), &config));

        config.problem = ProblemSpec::onemax(20).unwrap();
        config.fitness_threshold = Some(20.0);
        assert!(is_terminated(&stats(10, Some(20.0)), &config));
        assert!(!is_terminated(&stats(10, Some(19.0)), &config));
    }

    #[test]
    fn validation() {
        let mut c = AlgorithmConfig::griewank_benchmark(100);
        assert!(c.validate().is_ok());
        c.elite_size = 513;
        assert!(c.validate().is_err());
        let mut c = AlgorithmConfig::griewank_benchmark(0);
        assert!(c.validate().is_err());
        c.packet_size = 10;
        c.max_evaluations = None;
        assert!(c.validate().is_err());
        c.fitness_threshold = Some(0.0);
        assert!(c.validate().is_ok());
        c.algorithm_id = Some("../etc".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn patch_applies_and_revalidates() {
        let base = AlgorithmConfig::griewank_benchmark(100);
        let patch = ConfigPatch {
            packet_size: Some(64),
            ..Default::default()
        };
        assert_eq!(patch.apply(&base).unwrap().packet_size, 64);
        let bad = ConfigPatch {
            elite_size: Some(10_000),
            ..Default::default()
        };
        assert!(bad.apply(&base).is_err());
        assert!(serde_json::from_str::<ConfigPatch>(r#"{"packet":1}"#).is_err());
    }

    #[test]
    fn rate_is_zero_before_start() {
        assert_eq!(RunStats::default().rate(), 0.0);
        let s = RunStats {
            evaluated_count: 500,
            elapsed_seconds: 2.0,
            ..Default::default()
        };
        assert_eq!(s.rate(), 250.0);
    }
}
