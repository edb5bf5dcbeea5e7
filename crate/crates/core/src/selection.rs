//! Population members and tournament-based replacement.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EvoError, Result};
use crate::genome::Chromosome;
use crate::operators::{crossover, mutate, OperatorConfig};
use crate::problem::ObjectiveSense;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndividualState {
    Fresh,
    Leased,
    Evaluated,
}

/// A chromosome and its lifecycle. `fitness` is present exactly when the
/// individual is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    id: u64,
    chromosome: Chromosome,
    fitness: Option<f64>,
    state: IndividualState,
}

impl Individual {
    pub fn fresh(id: u64, chromosome: Chromosome) -> Self {
        Individual {
            id,
            chromosome,
            fitness: None,
            state: IndividualState::Fresh,
        }
    }

    pub fn evaluated(id: u64, chromosome: Chromosome, fitness: f64) -> Result<Self> {
        let mut ind = Individual::fresh(id, chromosome);
        ind.record_fitness(fitness)?;
        Ok(ind)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn chromosome(&self) -> &Chromosome {
        &self.chromosome
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    pub fn state(&self) -> IndividualState {
        self.state
    }

    pub fn lease(&mut self) {
        debug_assert_eq!(self.state, IndividualState::Fresh);
        self.state = IndividualState::Leased;
    }

    /// Returns a leased individual to the fresh pool.
    pub fn release(&mut self) {
        debug_assert_eq!(self.state, IndividualState::Leased);
        self.state = IndividualState::Fresh;
    }

    pub fn record_fitness(&mut self, fitness: f64) -> Result<()> {
        if !fitness.is_finite() {
            return Err(EvoError::Precondition(format!(
                "fitness for individual {} is not finite: {fitness}",
                self.id
            )));
        }
        self.fitness = Some(fitness);
        self.state = IndividualState::Evaluated;
        Ok(())
    }
}

/// One tournament as seen from the inside, by index into the population slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TournamentRecord {
    pub members: Vec<usize>,
    pub discarded: Vec<usize>,
    pub parents: Vec<usize>,
}

/// Breeds `count` new chromosomes by repeated tournaments over `population`.
///
/// Each child comes from its own tournament: `tournament_size` distinct
/// individuals are drawn, the `losers_per_tournament` worst are dropped, and
/// the survivors breed by crossover (two parents, first child kept) or by
/// mutation (one parent).
pub fn tournament_replace<R: Rng + ?Sized>(
    population: &[Individual],
    ops: &OperatorConfig,
    count: usize,
    sense: ObjectiveSense,
    rng: &mut R,
) -> Result<Vec<Chromosome>> {
    run_tournaments(population, ops, count, sense, rng, |_| {})
}

/// Same as [`tournament_replace`], also returning every tournament's record.
pub fn tournament_replace_traced<R: Rng + ?Sized>(
    population: &[Individual],
    ops: &OperatorConfig,
    count: usize,
    sense: ObjectiveSense,
    rng: &mut R,
) -> Result<(Vec<Chromosome>, Vec<TournamentRecord>)> {
    let mut records = Vec::with_capacity(count);
    let children = run_tournaments(population, ops, count, sense, rng, |r| records.push(r))?;
    Ok((children, records))
}

fn run_tournaments<R, F>(
    population: &[Individual],
    ops: &OperatorConfig,
    count: usize,
    sense: ObjectiveSense,
    rng: &mut R,
    mut observe: F,
) -> Result<Vec<Chromosome>>
where
    R: Rng + ?Sized,
    F: FnMut(TournamentRecord),
{
    ops.validate()?;
    if count == 0 {
        return Err(EvoError::Precondition("count must be at least 1".into()));
    }
    if population.len() < ops.tournament_size {
        return Err(EvoError::InsufficientPopulation {
            needed: ops.tournament_size,
            available: population.len(),
        });
    }
    let fitness: Vec<f64> = population
        .iter()
        .map(|ind| {
            ind.fitness().ok_or_else(|| {
                EvoError::Precondition(format!("individual {} is not evaluated", ind.id()))
            })
        })
        .collect::<Result<_>>()?;
    let survivors_per_round = ops.tournament_size - ops.losers_per_tournament;
    let mutation_rate = ops.mutation_rate(population[0].chromosome().len());

    let mut children = Vec::with_capacity(count);
    for _ in 0..count {
        let members = index::sample(rng, population.len(), ops.tournament_size).into_vec();
        let mut ranked = members.clone();
        ranked.sort_by(|&a, &b| sense.cmp_best_first(fitness[a], fitness[b]));
        let discarded = ranked.split_off(survivors_per_round);
        let survivors = ranked;

        let (child, parents) = if rng.random_bool(ops.crossover_share) {
            let (a, b) = if survivors.len() >= 2 {
                let pick = index::sample(rng, survivors.len(), 2);
                (survivors[pick.index(0)], survivors[pick.index(1)])
            } else {
                (survivors[0], survivors[0])
            };
            let (first, _) =
                crossover(population[a].chromosome(), population[b].chromosome(), rng)?;
            (first, vec![a, b])
        } else {
            let a = survivors[rng.random_range(0..survivors.len())];
            (mutate(population[a].chromosome(), mutation_rate, rng), vec![a])
        };
        observe(TournamentRecord {
            members,
            discarded,
            parents,
        });
        children.push(child);
    }
    Ok(children)
}
