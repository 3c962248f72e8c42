//! Trace-driven replay of sessions through a shared cache with prefetching.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictor::PagePredictor;
use crate::session::Session;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("cache capacity must be at least 1")]
    Capacity,
    #[error("context length must be at least 1")]
    ContextLen,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
    #[error("need at least 2 sessions to split, got {0}")]
    TooFewSessions(usize),
}

/// Replacement policy seen by the simulator.
pub trait Cache {
    fn capacity(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn contains(&self, page: &str) -> bool;
    /// Mark `page` as used; no-op when absent.
    fn touch(&mut self, page: &str);
    /// Insert an absent page, evicting if full. `pinned` is never chosen as
    /// victim. Returns `Err(())` when no victim is available, otherwise the
    /// evicted page, if any.
    #[allow(clippy::result_unit_err)]
    fn insert(&mut self, page: &str, pinned: Option<&str>) -> Result<Option<String>, ()>;
    /// Resident pages, most recently used first.
    fn resident(&self) -> Vec<String>;
}

#[derive(Debug, Clone)]
pub struct LruCache {
    capacity: usize,
    clock: u64,
    stamp: HashMap<String, u64>,
    by_stamp: BTreeMap<u64, String>,
}

impl LruCache {
    pub fn new(capacity: usize) -> Self {
        LruCache {
            capacity,
            clock: 0,
            stamp: HashMap::new(),
            by_stamp: BTreeMap::new(),
        }
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }
}

impl Cache for LruCache {
    fn capacity(&self) -> usize {
        self.capacity
    }

    fn len(&self) -> usize {
        self.stamp.len()
    }

    fn contains(&self, page: &str) -> bool {
        self.stamp.contains_key(page)
    }

    fn touch(&mut self, page: &str) {
        let now = self.tick();
        if let Some(old) = self.stamp.get_mut(page) {
            self.by_stamp.remove(old);
            *old = now;
            self.by_stamp.insert(now, page.to_string());
        }
    }

    fn insert(&mut self, page: &str, pinned: Option<&str>) -> Result<Option<String>, ()> {
        debug_assert!(!self.contains(page));
        let mut evicted = None;
        if self.stamp.len() >= self.capacity {
            let (&victim_stamp, victim) = self
                .by_stamp
                .iter()
                .find(|(_, p)| Some(p.as_str()) != pinned)
                .ok_or(())?;
            let victim = victim.clone();
            self.by_stamp.remove(&victim_stamp);
            self.stamp.remove(&victim);
            evicted = Some(victim);
        }
        let now = self.tick();
        self.stamp.insert(page.to_string(), now);
        self.by_stamp.insert(now, page.to_string());
        Ok(evicted)
    }

    fn resident(&self) -> Vec<String> {
        self.by_stamp.values().rev().cloned().collect()
    }
}

/// Snapshot of cache contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheState {
    pub capacity: usize,
    pub resident: Vec<String>,
    pub prefetch_tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub capacity: usize,
    pub prefetch_k: usize,
    pub context_len: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            capacity: 10,
            prefetch_k: 1,
            context_len: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimReport {
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub hit_ratio: f64,
    pub prefetches_issued: u64,
    pub useful_prefetches: u64,
    pub prefetch_precision: f64,
    /// Wasted prefetches per request.
    pub extra_fetch_overhead: f64,
}

impl SimReport {
    pub const CSV_HEADER: &'static str = "requests,hits,misses,hit_ratio,prefetches_issued,useful_prefetches,prefetch_precision,extra_fetch_overhead";

    fn finish(mut self) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        self.hit_ratio = ratio(self.hits, self.requests);
        self.prefetch_precision = ratio(self.useful_prefetches, self.prefetches_issued);
        self.extra_fetch_overhead = ratio(self.prefetches_issued - self.useful_prefetches, self.requests);
        self
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.requests,
            self.hits,
            self.misses,
            self.hit_ratio,
            self.prefetches_issued,
            self.useful_prefetches,
            self.prefetch_precision,
            self.extra_fetch_overhead
        )
    }
}

/// Global replay order: `(session index, position)` sorted by arrival, then
/// session index, then position.
pub fn replay_order(sessions: &[Session]) -> Vec<(usize, usize)> {
    let mut events: Vec<_> = sessions
        .iter()
        .enumerate()
        .flat_map(|(s, session)| {
            session
                .visits
                .iter()
                .enumerate()
                .map(move |(i, v)| (v.arrival, s, i))
        })
        .collect();
    events.sort();
    events.into_iter().map(|(_, s, i)| (s, i)).collect()
}

pub struct Simulator<C: Cache> {
    cache: C,
    tags: HashSet<String>,
    config: SimConfig,
    report: SimReport,
}

impl Simulator<LruCache> {
    pub fn lru(config: SimConfig) -> Result<Self, SimError> {
        Simulator::new(LruCache::new(config.capacity), config)
    }
}

impl<C: Cache> Simulator<C> {
    pub fn new(cache: C, config: SimConfig) -> Result<Self, SimError> {
        if config.capacity == 0 || cache.capacity() == 0 {
            return Err(SimError::Capacity);
        }
        if config.context_len == 0 {
            return Err(SimError::ContextLen);
        }
        Ok(Simulator {
            cache,
            tags: HashSet::new(),
            config,
            report: SimReport::default(),
        })
    }

    pub fn state(&self) -> CacheState {
        let mut tags: Vec<String> = self.tags.iter().cloned().collect();
        tags.sort();
        CacheState {
            capacity: self.cache.capacity(),
            resident: self.cache.resident(),
            prefetch_tags: tags,
        }
    }

    fn drop_tag(&mut self, evicted: Option<String>) {
        if let Some(page) = evicted {
            self.tags.remove(&page);
        }
    }

    /// Serve one request. `history` is the session so far, ending with `page`.
    pub fn request(&mut self, page: &str, history: &[String], predictor: &dyn PagePredictor) {
        self.report.requests += 1;
        if self.cache.contains(page) {
            self.report.hits += 1;
            if self.tags.remove(page) {
                self.report.useful_prefetches += 1;
            }
            self.cache.touch(page);
        } else {
            self.report.misses += 1;
            let evicted = self
                .cache
                .insert(page, None)
                .expect("capacity >= 1 always leaves a victim");
            self.drop_tag(evicted);
        }

        if self.config.prefetch_k == 0 {
            return;
        }
        let start = history.len().saturating_sub(self.config.context_len);
        for candidate in predictor.predict_pages(&history[start..], self.config.prefetch_k) {
            if self.cache.contains(&candidate) {
                continue;
            }
            if let Ok(evicted) = self.cache.insert(&candidate, Some(page)) {
                self.drop_tag(evicted);
                self.tags.insert(candidate);
                self.report.prefetches_issued += 1;
            }
        }
    }

    pub fn report(&self) -> SimReport {
        self.report.clone().finish()
    }
}

/// Replay `sessions` through one shared LRU cache.
pub fn simulate(
    sessions: &[Session],
    predictor: &dyn PagePredictor,
    config: SimConfig,
) -> Result<SimReport, SimError> {
    let mut sim = Simulator::lru(config)?;
    let pages: Vec<Vec<String>> = sessions.iter().map(Session::pages).collect();
    for (s, i) in replay_order(sessions) {
        sim.request(&pages[s][i], &pages[s][..=i], predictor);
    }
    Ok(sim.report())
}

/// Chronological split by session start time.
pub fn split_sessions(
    sessions: &[Session],
    train_fraction: f64,
) -> Result<(Vec<Session>, Vec<Session>), SimError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SimError::Fraction(train_fraction));
    }
    if sessions.len() < 2 {
        return Err(SimError::TooFewSessions(sessions.len()));
    }
    let mut ordered = sessions.to_vec();
    ordered.sort_by_key(Session::start);
    let n = ordered.len();
    let cut = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let test = ordered.split_off(cut);
    Ok((ordered, test))
}
