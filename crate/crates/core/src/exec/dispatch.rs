//! Shared result cache and the non-blocking dispatch pool.

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Sender, TrySendError};

use super::{execute, fingerprint, Backend, ExecutionOutcome, ExecutorConfig, TransportError};

#[derive(Debug, Clone)]
enum Slot {
    Pending,
    Done(ExecutionOutcome),
    /// Transport failure; the next claim retries.
    Failed(String),
}

enum Claim {
    Hit(ExecutionOutcome),
    InFlight,
    Claimed,
}

/// Map from query fingerprint to outcome. Each fingerprint is executed at
/// most once; completed entries never change.
#[derive(Debug, Default)]
pub struct ResultCache {
    slots: Mutex<HashMap<u64, Slot>>,
    ready: Condvar,
}

impl ResultCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, fp: u64) -> Option<ExecutionOutcome> {
        match self.slots.lock().expect("cache lock").get(&fp) {
            Some(Slot::Done(o)) => Some(o.clone()),
            _ => None,
        }
    }

    /// Number of completed entries.
    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock").values().filter(|s| matches!(s, Slot::Done(_))).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn claim(&self, fp: u64) -> Claim {
        let mut slots = self.slots.lock().expect("cache lock");
        match slots.get(&fp) {
            Some(Slot::Done(o)) => Claim::Hit(o.clone()),
            Some(Slot::Pending) => Claim::InFlight,
            Some(Slot::Failed(_)) | None => {
                slots.insert(fp, Slot::Pending);
                Claim::Claimed
            }
        }
    }

    /// Stores the outcome for `fp` unless one is already present.
    pub fn complete(&self, fp: u64, outcome: ExecutionOutcome) {
        let mut slots = self.slots.lock().expect("cache lock");
        if !matches!(slots.get(&fp), Some(Slot::Done(_))) {
            slots.insert(fp, Slot::Done(outcome));
        }
        self.ready.notify_all();
    }

    fn fail(&self, fp: u64, message: String) {
        let mut slots = self.slots.lock().expect("cache lock");
        if matches!(slots.get(&fp), Some(Slot::Pending)) {
            slots.insert(fp, Slot::Failed(message));
        }
        self.ready.notify_all();
    }

    fn release(&self, fp: u64) {
        let mut slots = self.slots.lock().expect("cache lock");
        if matches!(slots.get(&fp), Some(Slot::Pending)) {
            slots.remove(&fp);
        }
        self.ready.notify_all();
    }

    /// Blocks until `fp` completes or `timeout` elapses.
    pub fn wait(&self, fp: u64, timeout: Duration) -> Result<ExecutionOutcome, WaitError> {
        let deadline = Instant::now() + timeout;
        let mut slots = self.slots.lock().expect("cache lock");
        loop {
            match slots.get(&fp) {
                Some(Slot::Done(o)) => return Ok(o.clone()),
                Some(Slot::Failed(m)) => return Err(WaitError::Transport(m.clone())),
                None => return Err(WaitError::Unknown),
                Some(Slot::Pending) => {}
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(WaitError::TimedOut);
            }
            slots = self.ready.wait_timeout(slots, deadline - now).expect("cache lock").0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaitError {
    #[error("outcome not ready before the wait deadline")]
    TimedOut,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("fingerprint was never dispatched")]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DispatchError {
    /// The queue is full; execute synchronously instead.
    #[error("dispatch queue is full")]
    QueueFull,
    #[error("dispatcher is shut down")]
    Closed,
}

/// Handle for a dispatched query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ticket {
    pub fingerprint: u64,
}

struct Job {
    fp: u64,
    sql: String,
}

/// Worker pool executing queries in the background and publishing outcomes
/// to a shared [`ResultCache`].
pub struct Dispatcher {
    backend: Arc<dyn Backend>,
    cache: Arc<ResultCache>,
    cfg: ExecutorConfig,
    tx: Option<Sender<Job>>,
    workers: Vec<JoinHandle<()>>,
}

impl Dispatcher {
    /// Starts `backend.max_parallelism()` workers behind a queue holding at
    /// most `queue_capacity` jobs.
    pub fn new(backend: Arc<dyn Backend>, cache: Arc<ResultCache>, cfg: ExecutorConfig, queue_capacity: usize) -> Self {
        let (tx, rx) = bounded::<Job>(queue_capacity);
        let workers = (0..backend.max_parallelism().max(1))
            .map(|_| {
                let rx = rx.clone();
                let backend = backend.clone();
                let cache = cache.clone();
                std::thread::spawn(move || {
                    for job in rx {
                        match execute(&job.sql, backend.as_ref(), &cfg) {
                            Ok(o) => cache.complete(job.fp, o),
                            Err(TransportError(m)) => cache.fail(job.fp, m),
                        }
                    }
                })
            })
            .collect();
        Dispatcher { backend, cache, cfg, tx: Some(tx), workers }
    }

    pub fn cache(&self) -> &Arc<ResultCache> {
        &self.cache
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.cfg
    }

    pub fn fingerprint(&self, sql: &str) -> u64 {
        fingerprint(sql, &self.backend.id(), self.backend.dialect())
    }

    /// Queues `sql` and returns immediately. Duplicate fingerprints share
    /// one execution.
    pub fn dispatch(&self, sql: &str) -> Result<Ticket, DispatchError> {
        let fp = self.fingerprint(sql);
        let ticket = Ticket { fingerprint: fp };
        match self.cache.claim(fp) {
            Claim::Hit(_) | Claim::InFlight => Ok(ticket),
            Claim::Claimed => {
                let tx = self.tx.as_ref().ok_or(DispatchError::Closed)?;
                match tx.try_send(Job { fp, sql: sql.to_string() }) {
                    Ok(()) => Ok(ticket),
                    Err(TrySendError::Full(_)) => {
                        self.cache.release(fp);
                        Err(DispatchError::QueueFull)
                    }
                    Err(TrySendError::Disconnected(_)) => {
                        self.cache.release(fp);
                        Err(DispatchError::Closed)
                    }
                }
            }
        }
    }

    pub fn wait(&self, ticket: Ticket, timeout: Duration) -> Result<ExecutionOutcome, WaitError> {
        self.cache.wait(ticket.fingerprint, timeout)
    }

    /// Blocking execution through the cache.
    pub fn execute(&self, sql: &str) -> Result<ExecutionOutcome, TransportError> {
        let fp = self.fingerprint(sql);
        loop {
            match self.cache.claim(fp) {
                Claim::Hit(o) => return Ok(o),
                Claim::InFlight => match self.cache.wait(fp, Duration::from_secs(3600)) {
                    Ok(o) => return Ok(o),
                    Err(WaitError::Transport(m)) => return Err(TransportError(m)),
                    Err(_) => continue,
                },
                Claim::Claimed => {
                    return match execute(sql, self.backend.as_ref(), &self.cfg) {
                        Ok(o) => {
                            self.cache.complete(fp, o.clone());
                            Ok(o)
                        }
                        Err(e) => {
                            self.cache.fail(fp, e.0.clone());
                            Err(e)
                        }
                    };
                }
            }
        }
    }
}

impl Drop for Dispatcher {
    fn drop(&mut self) {
        self.tx.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}
