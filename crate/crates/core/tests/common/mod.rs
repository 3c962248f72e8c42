//! Reference implementations used as test oracles. They share only data
//! types with the library and recompute everything from first principles.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use chrono::{DateTime, TimeZone, Utc};
use vaguemarkov::session::compute_dwell;
use vaguemarkov::{MiningParams, PageVisit, Session};

pub fn strs(pages: &[&str]) -> Vec<String> {
    pages.iter().map(|p| p.to_string()).collect()
}

/// A session starting at `start` (unix seconds) with one request per `(page, offset)`.
pub fn session(user: &str, start: i64, steps: &[(&str, i64)]) -> Session {
    compute_dwell(Session {
        user_key: user.to_string(),
        visits: steps
            .iter()
            .map(|&(page, offset)| PageVisit {
                page: page.to_string(),
                arrival: Utc.timestamp_opt(start + offset, 0).unwrap(),
                dwell: None,
            })
            .collect(),
    })
}

/// P(x1) times the per-step conditional probabilities, each recounted by
/// scanning the corpus for the longest observed context of length <= order.
pub fn brute_sequence_probability(corpus: &[Vec<String>], order: usize, seq: &[String]) -> f64 {
    if seq.is_empty() || corpus.is_empty() {
        return 0.0;
    }
    let starts = corpus.iter().filter(|s| s.first() == Some(&seq[0])).count();
    let mut p = starts as f64 / corpus.len() as f64;
    for i in 1..seq.len() {
        let mut factor = 0.0;
        for len in (1..=order.min(i)).rev() {
            let ctx = &seq[i - len..i];
            let (mut seen, mut followed) = (0u64, 0u64);
            for s in corpus {
                for j in 0..s.len().saturating_sub(len) {
                    if &s[j..j + len] == ctx {
                        seen += 1;
                        if s[j + len] == seq[i] {
                            followed += 1;
                        }
                    }
                }
            }
            if seen > 0 {
                factor = followed as f64 / seen as f64;
                break;
            }
        }
        p *= factor;
    }
    p
}

/// Raw (truth, falsity) pairs per session.
pub type RawDb = Vec<BTreeMap<String, (f64, f64)>>;

fn median(t: f64, f: f64) -> f64 {
    t + (1.0 - t - f).max(0.0) / 2.0
}

fn imprecision(t: f64, f: f64) -> f64 {
    (1.0 - t - f).max(0.0)
}

#[derive(Debug, Clone)]
pub struct OracleRule {
    pub antecedent: Vec<String>,
    pub consequent: String,
    pub support: f64,
    pub confidence: f64,
    pub attractiveness: f64,
    pub hesitation: f64,
}

/// Every itemset by bitmask, every single-consequent split.
pub fn exhaustive_rules(db: &RawDb, params: &MiningParams) -> Vec<OracleRule> {
    let n = db.len() as f64;
    let items: Vec<String> = db
        .iter()
        .flat_map(|s| s.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let m = |s: &BTreeMap<String, (f64, f64)>, x: &str| s.get(x).map_or(0.0, |&(t, f)| median(t, f));
    let min_sum = |set: &[&str]| -> f64 {
        db.iter()
            .map(|s| set.iter().map(|x| m(s, x)).fold(f64::INFINITY, f64::min))
            .sum()
    };
    let attr = |x: &str| db.iter().map(|s| m(s, x)).sum::<f64>() / n;
    let hes = |x: &str| {
        db.iter()
            .map(|s| s.get(x).map_or(0.0, |&(t, f)| imprecision(t, f)))
            .sum::<f64>()
            / n
    };

    let mut out = Vec::new();
    for mask in 1u32..(1 << items.len()) {
        let z: Vec<&str> = (0..items.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| items[i].as_str())
            .collect();
        if z.len() < 2 || z.len() > params.max_antecedent + 1 {
            continue;
        }
        let z_sum = min_sum(&z);
        if z_sum / n < params.min_support {
            continue;
        }
        if z.iter().any(|x| attr(x) < params.min_attractiveness) {
            continue;
        }
        let rule_hes = z.iter().map(|x| hes(x)).sum::<f64>() / z.len() as f64;
        if params.max_hesitation.is_some_and(|h| rule_hes > h) {
            continue;
        }
        let rule_attr = z.iter().map(|x| attr(x)).fold(f64::INFINITY, f64::min);
        for y in &z {
            let x: Vec<&str> = z.iter().copied().filter(|i| i != y).collect();
            let x_sum = min_sum(&x);
            if x_sum <= 0.0 {
                continue;
            }
            let confidence = z_sum / x_sum;
            if confidence < params.min_confidence {
                continue;
            }
            out.push(OracleRule {
                antecedent: x.iter().map(|s| s.to_string()).collect(),
                consequent: y.to_string(),
                support: z_sum / n,
                confidence,
                attractiveness: rule_attr,
                hesitation: rule_hes,
            });
        }
    }
    out
}

/// Every request of every session as `(page, history)` in
/// arrival order; ties go to the lower session index, then earlier position.
fn request_stream(sessions: &[Session]) -> Vec<(String, Vec<String>)> {
    let mut events = Vec::new();
    for (s, session) in sessions.iter().enumerate() {
        for (i, v) in session.visits.iter().enumerate() {
            events.push((v.arrival.timestamp(), v.arrival.timestamp_subsec_nanos(), s, i));
        }
    }
    events.sort();
    events
        .into_iter()
        .map(|(_, _, s, i)| {
            let pages: Vec<String> = sessions[s].visits[..=i].iter().map(|v| v.page.clone()).collect();
            (pages[i].clone(), pages)
        })
        .collect()
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct OracleCounts {
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub issued: u64,
    pub useful: u64,
}

impl OracleCounts {
    pub fn hit_ratio(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.hits as f64 / self.requests as f64
        }
    }
}

/// Plain LRU with a recency queue, no prediction at all.
pub fn lru_oracle(sessions: &[Session], capacity: usize) -> OracleCounts {
    let mut queue: VecDeque<String> = VecDeque::new();
    let mut c = OracleCounts::default();
    for (page, _) in request_stream(sessions) {
        c.requests += 1;
        if let Some(pos) = queue.iter().position(|p| *p == page) {
            c.hits += 1;
            queue.remove(pos);
        } else {
            c.misses += 1;
            if queue.len() == capacity {
                queue.pop_front();
            }
        }
        queue.push_back(page);
    }
    c
}

/// Step-by-step prefetching replay. `predict` receives the last
/// `context_len` pages of the session and the number of pages wanted.
pub fn prefetch_oracle(
    sessions: &[Session],
    capacity: usize,
    prefetch_k: usize,
    context_len: usize,
    predict: &dyn Fn(&[String], usize) -> Vec<String>,
) -> OracleCounts {
    // Front is least recently used.
    let mut queue: Vec<String> = Vec::new();
    let mut tagged: HashSet<String> = HashSet::new();
    let mut c = OracleCounts::default();
    for (page, history) in request_stream(sessions) {
        c.requests += 1;
        if let Some(pos) = queue.iter().position(|p| *p == page) {
            c.hits += 1;
            if tagged.remove(&page) {
                c.useful += 1;
            }
            queue.remove(pos);
        } else {
            c.misses += 1;
            if queue.len() == capacity {
                let victim = queue.remove(0);
                tagged.remove(&victim);
            }
        }
        queue.push(page.clone());
        if prefetch_k == 0 {
            continue;
        }
        let ctx = &history[history.len().saturating_sub(context_len)..];
        for candidate in predict(ctx, prefetch_k) {
            if queue.contains(&candidate) {
                continue;
            }
            if queue.len() == capacity {
                match queue.iter().position(|p| *p != page) {
                    Some(pos) => {
                        let victim = queue.remove(pos);
                        tagged.remove(&victim);
                    }
                    None => continue,
                }
            }
            queue.push(candidate.clone());
            tagged.insert(candidate);
            c.issued += 1;
        }
    }
    c
}

/// Transition counts recovered from raw CLF text: group by host, order by
/// time, cut where the gap exceeds `timeout_s`, count adjacent page pairs.
pub fn recount_transitions(lines: &[String], timeout_s: i64) -> (HashMap<(String, String), u64>, usize) {
    let mut by_host: BTreeMap<String, Vec<(i64, usize, String)>> = BTreeMap::new();
    for (n, line) in lines.iter().enumerate() {
        let host = line.split(' ').next().unwrap().to_string();
        let open = line.find('[').unwrap();
        let close = line.find(']').unwrap();
        let ts = DateTime::parse_from_str(&line[open + 1..close], "%d/%b/%Y:%H:%M:%S %z")
            .unwrap()
            .timestamp();
        let request = line[close..].split('"').nth(1).unwrap();
        let page = request.split(' ').nth(1).unwrap().to_string();
        by_host.entry(host).or_default().push((ts, n, page));
    }
    let mut counts = HashMap::new();
    let mut sessions = 0;
    for mut hits in by_host.into_values() {
        hits.sort();
        sessions += 1;
        for w in hits.windows(2) {
            if w[1].0 - w[0].0 > timeout_s {
                sessions += 1;
                continue;
            }
            *counts.entry((w[0].2.clone(), w[1].2.clone())).or_insert(0) += 1;
        }
    }
    (counts, sessions)
}
