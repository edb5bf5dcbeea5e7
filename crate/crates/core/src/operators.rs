//! Variation operators: one-point crossover and per-bit flip mutation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EvoError, Result};
use crate::genome::Chromosome;

/// Operator shares and tournament shape.
///
/// `crossover_share` / `mutation_share` are the probabilities of picking each
/// operator for a new individual; exactly one operator produces each child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorConfig {
    pub crossover_share: f64,
    pub mutation_share: f64,
    /// `None` means `1 / chromosome length`.
    pub per_bit_mutation_prob: Option<f64>,
    pub tournament_size: usize,
    pub losers_per_tournament: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            crossover_share: 0.8,
            mutation_share: 0.2,
            per_bit_mutation_prob: None,
            tournament_size: 4,
            losers_per_tournament: 2,
        }
    }
}

impl OperatorConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.crossover_share) || !unit.contains(&self.mutation_share) {
            return Err(EvoError::config("operator shares must lie in [0, 1]"));
        }
        if (self.crossover_share + self.mutation_share - 1.0).abs() > 1e-9 {
            return Err(EvoError::config(format!(
                "crossover_share + mutation_share must be 1, got {}",
                self.crossover_share + self.mutation_share
            )));
        }
        if let Some(p) = self.per_bit_mutation_prob {
            if !(p > 0.0 && p < 1.0) {
                return Err(EvoError::config(format!(
                    "per_bit_mutation_prob must lie in (0, 1), got {p}"
                )));
            }
        }
        if self.tournament_size < 2 {
            return Err(EvoError::config("tournament_size must be at least 2"));
        }
        if self.losers_per_tournament < 1 || self.losers_per_tournament >= self.tournament_size {
            return Err(EvoError::config(format!(
                "losers_per_tournament must satisfy 1 <= p < {}, got {}",
                self.tournament_size, self.losers_per_tournament
            )));
        }
        Ok(())
    }

    pub fn mutation_rate(&self, chromosome_len: usize) -> f64 {
        match self.per_bit_mutation_prob {
            Some(p) => p,
            None if chromosome_len >= 2 => 1.0 / chromosome_len as f64,
            None => 0.5,
        }
    }
}

/// One-point crossover with a uniform cut in `[1, len - 1]`.
///
/// Chromosomes shorter than two bits have no interior cut point and are
/// returned unchanged.
pub fn crossover<R: Rng + ?Sized>(
    parent_a: &Chromosome,
    parent_b: &Chromosome,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome)> {
    check_same_len(parent_a, parent_b)?;
    if parent_a.len() < 2 {
        return Ok((parent_a.clone(), parent_b.clone()));
    }
    let cut = rng.random_range(1..parent_a.len());
    crossover_at(parent_a, parent_b, cut)
}

/// Children `a[..cut] + b[cut..]` and `b[..cut] + a[cut..]`.
pub fn crossover_at(
    parent_a: &Chromosome,
    parent_b: &Chromosome,
    cut: usize,
) -> Result<(Chromosome, Chromosome)> {
    check_same_len(parent_a, parent_b)?;
    if cut > parent_a.len() {
        return Err(EvoError::encoding(format!(
            "cut point {cut} beyond chromosome length {}",
            parent_a.len()
        )));
    }
    let (a, b) = (parent_a.bits(), parent_b.bits());
    let first = a[..cut].iter().chain(&b[cut..]).copied().collect();
    let second = b[..cut].iter().chain(&a[cut..]).copied().collect();
    Ok((Chromosome::from_bits(first), Chromosome::from_bits(second)))
}

fn check_same_len(a: &Chromosome, b: &Chromosome) -> Result<()> {
    if a.len() != b.len() {
        return Err(EvoError::encoding(format!(
            "crossover parents differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Flips each bit independently with probability `per_bit_prob`.
///
/// # Panics
///
/// If `per_bit_prob` is outside `[0, 1]`.
pub fn mutate<R: Rng + ?Sized>(parent: &Chromosome, per_bit_prob: f64, rng: &mut R) -> Chromosome {
    assert!(
        (0.0..=1.0).contains(&per_bit_prob),
        "per-bit mutation probability {per_bit_prob} outside [0, 1]"
    );
    Chromosome::from_bits(
        parent
            .bits()
            .iter()
            .map(|&b| b ^ rng.random_bool(per_bit_prob))
            .collect(),
    )
}
