//! Registry of algorithms shared by all request handlers.
//!
//! Each algorithm sits behind its own async mutex, so handlers for different
//! algorithms never contend. No fitness work happens inside a critical
//! section.

use std::collections::HashMap;
use std::net::IpAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock, Weak};
use std::time::{Duration, Instant};

use evofarm_core::protocol::{LoopReply, ResultSubmission, StatusReport};
use evofarm_core::{AlgorithmConfig, ConfigPatch};
use tokio::sync::{Mutex, MutexGuard, Notify};
use tokio::task::JoinHandle;

use crate::algorithm::{AlgorithmRun, Dispatch, SubmitOutcome};
use crate::allowlist::Allowlist;
use crate::error::{FarmError, Result};
use crate::journal::{self, Journal};
use crate::logging::RequestLog;

#[derive(Clone)]
pub struct FarmOptions {
    pub lease_seconds: u64,
    /// One journal per algorithm is kept here when set.
    pub journal_dir: Option<PathBuf>,
    pub allowlist: Allowlist,
    /// Artificial service time added to every lease/submit critical section.
    pub service_delay: Duration,
    /// How long a request may wait for work before it is answered with `Busy`.
    pub wait_deadline: Duration,
    pub log: Arc<RequestLog>,
}

impl Default for FarmOptions {
    fn default() -> Self {
        FarmOptions {
            lease_seconds: 120,
            journal_dir: None,
            allowlist: Allowlist::loopback_only(),
            service_delay: Duration::ZERO,
            wait_deadline: Duration::from_secs(30),
            log: Arc::new(RequestLog::disabled()),
        }
    }
}

struct Slot {
    run: Mutex<AlgorithmRun>,
    /// Signalled whenever leases are freed or the run finishes.
    changed: Notify,
}

pub struct Farm {
    options: FarmOptions,
    algorithms: RwLock<HashMap<String, Arc<Slot>>>,
}

const WAIT_TICK: Duration = Duration::from_millis(200);

impl Farm {
    pub fn new(options: FarmOptions) -> Self {
        Farm {
            options,
            algorithms: RwLock::new(HashMap::new()),
        }
    }

    /// Builds a farm and reloads every current-epoch journal in the journal directory.
    pub fn recover(options: FarmOptions) -> Result<Self> {
        let farm = Farm::new(options);
        let Some(dir) = farm.options.journal_dir.clone() else {
            return Ok(farm);
        };
        if !dir.exists() {
            return Ok(farm);
        }
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            let is_current = path.extension().is_some_and(|e| e == "journal")
                && path.file_stem().and_then(|s| s.to_str()).is_some_and(|s| !s.contains('.'));
            if !is_current {
                continue;
            }
            let replay = journal::replay(&path)?;
            let id = replay.algorithm_id.clone();
            let evaluated = replay.evaluated_count();
            let run = AlgorithmRun::recover(
                replay,
                farm.options.lease_seconds,
                Some(Journal::reopen(&path)?),
                farm.options.log.clone(),
            )?;
            farm.options
                .log
                .lifecycle(|| format!("recovered algorithm={id} evaluated={evaluated}"));
            farm.insert(id, run)?;
        }
        Ok(farm)
    }

    pub fn options(&self) -> &FarmOptions {
        &self.options
    }

    pub fn admit(&self, addr: IpAddr) -> Result<()> {
        if self.options.allowlist.permits(addr) {
            Ok(())
        } else {
            Err(FarmError::Forbidden(addr))
        }
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.algorithms.read().expect("registry lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn insert(&self, id: String, run: AlgorithmRun) -> Result<()> {
        let mut map = self.algorithms.write().expect("registry lock");
        if map.contains_key(&id) {
            return Err(FarmError::Conflict(id));
        }
        map.insert(
            id,
            Arc::new(Slot {
                run: Mutex::new(run),
                changed: Notify::new(),
            }),
        );
        Ok(())
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        self.algorithms
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| FarmError::NotFound(id.to_string()))
    }

    /// Registers a new algorithm; the id is generated when the config has none.
    pub fn create(&self, mut config: AlgorithmConfig) -> Result<String> {
        let id = config
            .algorithm_id
            .clone()
            .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
        config.algorithm_id = Some(id.clone());
        config.seed.get_or_insert_with(rand::random);
        config.validate()?;
        if self.algorithms.read().expect("registry lock").contains_key(&id) {
            return Err(FarmError::Conflict(id));
        }
        let journal = match &self.options.journal_dir {
            Some(dir) => Some(Journal::create(dir, &id, 0, &config)?),
            None => None,
        };
        let run = AlgorithmRun::new(id.clone(), config, self.options.lease_seconds, journal, self.options.log.clone())?;
        self.insert(id.clone(), run)?;
        Ok(id)
    }

    async fn enter<'a>(&self, slot: &'a Slot) -> MutexGuard<'a, AlgorithmRun> {
        let guard = slot.run.lock().await;
        if !self.options.service_delay.is_zero() {
            tokio::time::sleep(self.options.service_delay).await;
        }
        guard
    }

    /// Leases the next packet, waiting while the budget is covered by live leases.
    async fn dispatch<'a>(
        &self,
        slot: &'a Slot,
        mut guard: MutexGuard<'a, AlgorithmRun>,
        client: &str,
        duplicate: bool,
    ) -> Result<LoopReply> {
        let deadline = Instant::now() + self.options.wait_deadline;
        loop {
            match guard.next_packet(client, Instant::now())? {
                Dispatch::Packet(packet) => {
                    let mut reply = LoopReply::proceed(packet);
                    reply.duplicate = duplicate;
                    return Ok(reply);
                }
                Dispatch::Finished(summary) => {
                    slot.changed.notify_waiters();
                    let mut reply = LoopReply::finished(summary);
                    reply.duplicate = duplicate;
                    return Ok(reply);
                }
                Dispatch::Wait => {}
            }
            let notified = slot.changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            drop(guard);
            let now = Instant::now();
            if now >= deadline {
                return Err(FarmError::Busy);
            }
            let _ = tokio::time::timeout(WAIT_TICK.min(deadline - now), notified).await;
            guard = slot.run.lock().await;
            if guard.expire_leases(Instant::now()) > 0 {
                slot.changed.notify_waiters();
            }
        }
    }

    pub async fn next_packet(&self, id: &str, client: &str) -> Result<LoopReply> {
        let slot = self.slot(id)?;
        let guard = self.enter(&slot).await;
        self.dispatch(&slot, guard, client, false).await
    }

    /// Records a submission and returns the reply carrying the next packet.
    pub async fn submit(&self, id: &str, submission: &ResultSubmission, client: &str) -> Result<LoopReply> {
        let slot = self.slot(id)?;
        let mut guard = self.enter(&slot).await;
        let outcome = guard.submit(submission, client, Instant::now())?;
        if matches!(outcome, SubmitOutcome::Accepted { .. }) {
            slot.changed.notify_waiters();
        }
        self.dispatch(&slot, guard, client, outcome == SubmitOutcome::Duplicate)
            .await
    }

    pub async fn status(&self, id: &str) -> Result<StatusReport> {
        let slot = self.slot(id)?;
        let guard = slot.run.lock().await;
        Ok(guard.status(Instant::now()))
    }

    pub async fn restart(&self, id: &str, patch: &ConfigPatch) -> Result<()> {
        let slot = self.slot(id)?;
        let mut guard = slot.run.lock().await;
        guard.restart(patch)?;
        slot.changed.notify_waiters();
        Ok(())
    }

    /// Reclaims expired leases across all algorithms.
    pub async fn expire_leases(&self) -> usize {
        let slots: Vec<Arc<Slot>> = self.algorithms.read().expect("registry lock").values().cloned().collect();
        let mut total = 0;
        for slot in slots {
            let n = slot.run.lock().await.expire_leases(Instant::now());
            if n > 0 {
                slot.changed.notify_waiters();
            }
            total += n;
        }
        total
    }

    /// Periodically expires leases until the farm is dropped.
    pub fn spawn_reaper(self: &Arc<Self>, every: Duration) -> JoinHandle<()> {
        let farm: Weak<Farm> = Arc::downgrade(self);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tick.tick().await;
                let Some(farm) = farm.upgrade() else { break };
                farm.expire_leases().await;
            }
        })
    }
}
