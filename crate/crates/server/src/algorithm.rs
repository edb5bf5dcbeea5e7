//! State of one evolutionary run.
//!
//! Every individual is in exactly one of three places: the fresh queue, a
//! live packet, or the fitness ranking. All methods are synchronous and take
//! the current instant explicitly; the caller provides mutual exclusion.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use evofarm_core::protocol::{
    Packet, PacketEntry, PopulationCounts, ResultSubmission, RunSummary, StatusReport, TracePoint,
};
use evofarm_core::{
    is_terminated, tournament_replace, AlgorithmConfig, Chromosome, ConfigPatch, Individual,
    ObjectiveSense, RunState, RunStats,
};
use ordered_float::OrderedFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FarmError, Result};
use crate::journal::{Journal, JournalEntry, JournalRecord, Replay};
use crate::logging::RequestLog;

/// Outcome of asking for work.
#[derive(Debug, Clone, PartialEq)]
pub enum Dispatch {
    Packet(Packet),
    Finished(RunSummary),
    /// Budget is fully covered by outstanding leases; ask again later.
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted { evaluated: usize, released: usize },
    /// The packet was already consumed; nothing changed.
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PacketState {
    Live,
    Consumed,
    Expired,
}

#[derive(Debug)]
struct PacketRecord {
    state: PacketState,
    ids: Vec<u64>,
    issued_at: Instant,
}

type RankKey = (OrderedFloat<f64>, u64);

#[derive(Debug, Default)]
struct Counters {
    evaluated: u64,
    dispatched: u64,
    requests: u64,
    best: Option<f64>,
    per_client: BTreeMap<String, u64>,
    started: Option<(Instant, DateTime<Utc>)>,
    last_submission: Option<(Instant, DateTime<Utc>)>,
}

pub struct AlgorithmRun {
    id: String,
    config: AlgorithmConfig,
    lease: Duration,
    state: RunState,
    epoch: u64,
    nonce: u32,
    rng: ChaCha8Rng,
    next_individual: u64,
    next_packet: u64,
    individuals: HashMap<u64, Individual>,
    fresh: VecDeque<u64>,
    ranking: BTreeSet<RankKey>,
    leased: u64,
    packets: HashMap<String, PacketRecord>,
    counters: Counters,
    trace: Vec<TracePoint>,
    journal: Option<Journal>,
    log: Arc<RequestLog>,
}

fn seeded_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    rng
}

impl AlgorithmRun {
    /// Validates `config`, fills in id and seed, and creates the initial random population.
    pub fn new(
        id: String,
        mut config: AlgorithmConfig,
        lease_seconds: u64,
        journal: Option<Journal>,
        log: Arc<RequestLog>,
    ) -> Result<Self> {
        config.algorithm_id = Some(id.clone());
        let seed = *config.seed.get_or_insert_with(rand::random);
        config.validate()?;
        let mut run = AlgorithmRun {
            id,
            lease: Duration::from_secs(lease_seconds.max(1)),
            state: RunState::Created,
            epoch: 0,
            nonce: rand::random(),
            rng: seeded_rng(seed, 0),
            next_individual: 0,
            next_packet: 0,
            individuals: HashMap::new(),
            fresh: VecDeque::new(),
            ranking: BTreeSet::new(),
            leased: 0,
            packets: HashMap::new(),
            counters: Counters::default(),
            trace: Vec::new(),
            journal,
            log,
            config,
        };
        run.populate();
        run.log.lifecycle(|| {
            format!(
                "created algorithm={} population={} packet_size={} seed={seed}",
                run.id, run.config.population_size, run.config.packet_size
            )
        });
        Ok(run)
    }

    /// Rebuilds a run from its journal. Evaluated individuals, counters and
    /// the best-fitness trace are restored; unevaluated ones are not, and are
    /// bred afresh on demand.
    pub fn recover(replay: Replay, lease_seconds: u64, journal: Option<Journal>, log: Arc<RequestLog>) -> Result<Self> {
        let config = replay.config;
        config.validate()?;
        let seed = config.seed.unwrap_or_default();
        let mut run = AlgorithmRun {
            id: replay.algorithm_id,
            lease: Duration::from_secs(lease_seconds.max(1)),
            state: RunState::Created,
            epoch: replay.epoch,
            nonce: rand::random(),
            rng: seeded_rng(seed.wrapping_add(replay.batches.len() as u64), replay.epoch),
            next_individual: 0,
            next_packet: 0,
            individuals: HashMap::new(),
            fresh: VecDeque::new(),
            ranking: BTreeSet::new(),
            leased: 0,
            packets: HashMap::new(),
            counters: Counters::default(),
            trace: Vec::new(),
            journal,
            log,
            config,
        };
        let now = (Instant::now(), Utc::now());
        for (_, client, entries) in replay.batches {
            let n = entries.len() as u64;
            for e in entries {
                let ind = Individual::evaluated(e.id, e.chromosome, e.fitness)?;
                run.insert_evaluated(ind);
                run.next_individual = run.next_individual.max(e.id + 1);
            }
            *run.counters.per_client.entry(client).or_default() += n;
            run.record_trace();
        }
        run.counters.dispatched = run.counters.evaluated;
        if run.counters.evaluated > 0 {
            run.state = RunState::Running;
            run.counters.started = Some(now);
            run.counters.last_submission = Some(now);
        }
        if is_terminated(&run.stats(now.0), &run.config) {
            run.state = RunState::Finished;
        }
        Ok(run)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.config
    }

    pub fn state(&self) -> RunState {
        self.state
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    fn sense(&self) -> ObjectiveSense {
        self.config.sense()
    }

    fn rank_key(&self, fitness: f64, id: u64) -> RankKey {
        match self.sense() {
            ObjectiveSense::Minimize => (OrderedFloat(fitness), id),
            ObjectiveSense::Maximize => (OrderedFloat(-fitness), id),
        }
    }

    fn add_fresh(&mut self, chromosome: Chromosome) {
        let id = self.next_individual;
        self.next_individual += 1;
        self.individuals.insert(id, Individual::fresh(id, chromosome));
        self.fresh.push_back(id);
    }

    fn populate(&mut self) {
        let len = self.config.problem.chromosome_len();
        for _ in 0..self.config.population_size {
            let c = Chromosome::random(len, &mut self.rng);
            self.add_fresh(c);
        }
    }

    fn insert_evaluated(&mut self, ind: Individual) {
        let fitness = ind.fitness().expect("evaluated individual has fitness");
        let key = self.rank_key(fitness, ind.id());
        self.ranking.insert(key);
        self.individuals.insert(ind.id(), ind);
        self.counters.evaluated += 1;
        let sense = self.sense();
        self.counters.best = Some(match self.counters.best {
            Some(best) => sense.best(best, fitness),
            None => fitness,
        });
    }

    fn record_trace(&mut self) {
        if let Some(best) = self.counters.best {
            self.trace.push(TracePoint {
                evaluated_count: self.counters.evaluated,
                best_fitness: best,
            });
        }
    }

    pub fn counts(&self) -> PopulationCounts {
        PopulationCounts {
            fresh: self.fresh.len() as u64,
            leased: self.leased,
            evaluated: self.ranking.len() as u64,
            total_created: self.individuals.len() as u64,
        }
    }

    pub fn stats(&self, now: Instant) -> RunStats {
        let c = &self.counters;
        let end = match (self.state, c.last_submission) {
            (RunState::Finished, Some((at, _))) => at,
            _ => now,
        };
        RunStats {
            evaluated_count: c.evaluated,
            dispatched_count: c.dispatched,
            best_fitness: c.best,
            started_at: c.started.map(|(_, wall)| wall),
            finished_at: match self.state {
                RunState::Finished => c.last_submission.map(|(_, wall)| wall),
                _ => None,
            },
            elapsed_seconds: c
                .started
                .map(|(at, _)| end.saturating_duration_since(at).as_secs_f64())
                .unwrap_or(0.0),
            per_client: c.per_client.clone(),
            request_count: c.requests,
        }
    }

    pub fn status(&self, now: Instant) -> StatusReport {
        let stats = self.stats(now);
        StatusReport {
            algorithm_id: self.id.clone(),
            state: self.state,
            config: self.config.clone(),
            rate: stats.rate(),
            stats,
            population: self.counts(),
            best_trace: self.trace.clone(),
        }
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            evaluated_count: self.counters.evaluated,
            best_fitness: self.counters.best,
        }
    }

    fn check_termination(&mut self, now: Instant) -> bool {
        if self.state == RunState::Finished {
            return true;
        }
        if is_terminated(&self.stats(now), &self.config) {
            self.state = RunState::Finished;
            let s = self.stats(now);
            self.log.lifecycle(|| {
                format!(
                    "finished algorithm={} evaluated={} best={:?} seconds={:.6} rate={:.3}",
                    self.id,
                    s.evaluated_count,
                    s.best_fitness,
                    s.elapsed_seconds,
                    s.rate()
                )
            });
            return true;
        }
        false
    }

    /// Tops the fresh pool up to `packet_size`: bred from the elite when the
    /// ranking can host a tournament, random otherwise.
    fn replenish(&mut self) -> Result<usize> {
        let want = self.config.packet_size;
        if self.fresh.len() >= want {
            return Ok(0);
        }
        let deficit = want - self.fresh.len();
        let children = if self.ranking.len() >= self.config.operators.tournament_size {
            let elite: Vec<Individual> = self
                .ranking
                .iter()
                .take(self.config.elite_size)
                .map(|(_, id)| self.individuals[id].clone())
                .collect();
            tournament_replace(&elite, &self.config.operators, deficit, self.sense(), &mut self.rng)?
        } else {
            let len = self.config.problem.chromosome_len();
            (0..deficit).map(|_| Chromosome::random(len, &mut self.rng)).collect()
        };
        for child in children {
            self.add_fresh(child);
        }
        Ok(deficit)
    }

    /// Leases up to `packet_size` fresh individuals to `client`.
    pub fn next_packet(&mut self, client: &str, now: Instant) -> Result<Dispatch> {
        if self.check_termination(now) {
            return Ok(Dispatch::Finished(self.summary()));
        }
        if let Some(max) = self.config.max_evaluations {
            if self.counters.evaluated + self.leased >= max {
                return Ok(Dispatch::Wait);
            }
        }
        if self.state == RunState::Created {
            self.state = RunState::Running;
            self.counters.started = Some((now, Utc::now()));
        }
        let generated = self.replenish()?;
        let take = self.config.packet_size.min(self.fresh.len());
        let ids: Vec<u64> = self.fresh.drain(..take).collect();
        let mut individuals = Vec::with_capacity(ids.len());
        for id in &ids {
            let ind = self.individuals.get_mut(id).expect("fresh id is known");
            ind.lease();
            individuals.push(PacketEntry {
                id: id.to_string(),
                chromosome: ind.chromosome().clone(),
            });
        }
        let packet_id = format!("{:08x}-{}-{}", self.nonce, self.epoch, self.next_packet);
        self.next_packet += 1;
        self.leased += ids.len() as u64;
        self.counters.dispatched += ids.len() as u64;
        self.counters.requests += 1;
        self.packets.insert(
            packet_id.clone(),
            PacketRecord {
                state: PacketState::Live,
                ids,
                issued_at: now,
            },
        );
        let packet = Packet {
            packet_id,
            algorithm_id: self.id.clone(),
            individuals,
            problem: self.config.problem,
            lease_seconds: self.lease.as_secs(),
        };
        self.log.request_lines(|| {
            let head = format!(
                "dispatch algorithm={} client={client} packet={} size={} generated={generated}",
                self.id,
                packet.packet_id,
                packet.individuals.len()
            );
            let rows = packet
                .individuals
                .iter()
                .map(|e| format!("  lease algorithm={} id={} chromosome={}", self.id, e.id, e.chromosome));
            std::iter::once(head).chain(rows).collect::<Vec<_>>()
        });
        Ok(Dispatch::Packet(packet))
    }

    fn expire_packet(&mut self, packet_id: &str) -> usize {
        let Some(record) = self.packets.get_mut(packet_id) else {
            return 0;
        };
        if record.state != PacketState::Live {
            return 0;
        }
        record.state = PacketState::Expired;
        let ids = std::mem::take(&mut record.ids);
        for &id in ids.iter().rev() {
            if let Some(ind) = self.individuals.get_mut(&id) {
                ind.release();
                self.fresh.push_front(id);
            }
        }
        self.leased -= ids.len() as u64;
        ids.len()
    }

    fn lease_expired(&self, record: &PacketRecord, now: Instant) -> bool {
        now.saturating_duration_since(record.issued_at) > self.lease
    }

    /// Returns individuals of every lease older than `lease_seconds` to the fresh pool.
    pub fn expire_leases(&mut self, now: Instant) -> usize {
        let expired: Vec<String> = self
            .packets
            .iter()
            .filter(|(_, r)| r.state == PacketState::Live && self.lease_expired(r, now))
            .map(|(id, _)| id.clone())
            .collect();
        let reclaimed: usize = expired.iter().map(|id| self.expire_packet(id)).sum();
        if reclaimed > 0 {
            self.log.request(|| {
                format!("expired algorithm={} packets={} individuals={reclaimed}", self.id, expired.len())
            });
        }
        reclaimed
    }

    /// Records fitness values for a live packet.
    ///
    /// Individuals of the packet missing from `submission` go back to the
    /// fresh pool. The submission is rejected as a whole if any id is foreign
    /// or repeated.
    pub fn submit(&mut self, submission: &ResultSubmission, client: &str, now: Instant) -> Result<SubmitOutcome> {
        let packet_id = submission.packet_id.as_str();
        let record = match self.packets.get(packet_id) {
            None => return Err(FarmError::LeaseExpired(packet_id.to_string())),
            Some(r) => r,
        };
        match record.state {
            PacketState::Consumed => {
                self.log.request(|| format!("duplicate algorithm={} client={client} packet={packet_id}", self.id));
                return Ok(SubmitOutcome::Duplicate);
            }
            PacketState::Expired => return Err(FarmError::LeaseExpired(packet_id.to_string())),
            PacketState::Live if self.lease_expired(record, now) => {
                self.expire_packet(packet_id);
                return Err(FarmError::LeaseExpired(packet_id.to_string()));
            }
            PacketState::Live => {}
        }

        let leased: HashSet<u64> = record.ids.iter().copied().collect();
        let mut seen = HashSet::with_capacity(submission.results.len());
        for (i, r) in submission.results.iter().enumerate() {
            if !leased.contains(&r.id) {
                return Err(FarmError::Invalid(format!(
                    "results[{i}]: individual {} is not part of packet {packet_id}",
                    r.id
                )));
            }
            if !seen.insert(r.id) {
                return Err(FarmError::Invalid(format!("results[{i}]: individual {} repeated", r.id)));
            }
            if !r.fitness.is_finite() {
                return Err(FarmError::Invalid(format!("results[{i}]: fitness is not finite")));
            }
        }

        if let Some(journal) = self.journal.as_mut() {
            let entries = submission
                .results
                .iter()
                .map(|r| JournalEntry {
                    id: r.id,
                    chromosome: self.individuals[&r.id].chromosome().clone(),
                    fitness: r.fitness,
                })
                .collect();
            journal.append(&JournalRecord::Batch {
                packet_id: packet_id.to_string(),
                client: client.to_string(),
                results: entries,
            })?;
        }

        let record = self.packets.get_mut(packet_id).expect("checked above");
        record.state = PacketState::Consumed;
        let ids = std::mem::take(&mut record.ids);
        for r in &submission.results {
            let mut ind = self.individuals.remove(&r.id).expect("leased id is known");
            ind.record_fitness(r.fitness)?;
            self.insert_evaluated(ind);
        }
        let mut released = 0;
        for id in ids.iter().filter(|id| !seen.contains(id)) {
            self.individuals.get_mut(id).expect("leased id is known").release();
            self.fresh.push_front(*id);
            released += 1;
        }
        self.leased -= ids.len() as u64;
        *self.counters.per_client.entry(client.to_string()).or_default() += submission.results.len() as u64;
        self.counters.last_submission = Some((now, Utc::now()));
        self.record_trace();
        self.log.request_lines(|| {
            let head = format!(
                "results algorithm={} client={client} packet={packet_id} evaluated={} best={:?}",
                self.id, self.counters.evaluated, self.counters.best
            );
            let rows = submission.results.iter().map(|r| {
                format!(
                    "  update algorithm={} id={} fitness={:e} chromosome={}",
                    self.id,
                    r.id,
                    r.fitness,
                    self.individuals[&r.id].chromosome()
                )
            });
            std::iter::once(head).chain(rows).collect::<Vec<_>>()
        });
        self.check_termination(now);
        Ok(SubmitOutcome::Accepted {
            evaluated: submission.results.len(),
            released,
        })
    }

    /// Fresh random population, zeroed counters, new epoch. Live leases die.
    pub fn restart(&mut self, patch: &ConfigPatch) -> Result<()> {
        let mut config = patch.apply(&self.config)?;
        let seed = *config.seed.get_or_insert_with(|| self.rng.random());
        let old_epoch = self.epoch;
        self.epoch += 1;
        if let Some(journal) = self.journal.as_mut() {
            journal.rotate(old_epoch, self.epoch, &config)?;
        }
        for record in self.packets.values_mut() {
            if record.state == PacketState::Live {
                record.state = PacketState::Expired;
                record.ids.clear();
            }
        }
        self.config = config;
        self.rng = seeded_rng(seed, self.epoch);
        self.individuals.clear();
        self.fresh.clear();
        self.ranking.clear();
        self.leased = 0;
        self.counters = Counters::default();
        self.trace.clear();
        self.state = RunState::Created;
        self.populate();
        self.log.lifecycle(|| {
            format!(
                "restarted algorithm={} epoch={} packet_size={}",
                self.id, self.epoch, self.config.packet_size
            )
        });
        Ok(())
    }
}
