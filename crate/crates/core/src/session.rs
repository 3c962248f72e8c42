//! Session identification by inactivity timeout, and dwell-time extraction.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::log_ingest::LogEntry;

pub const DEFAULT_TIMEOUT_S: i64 = 1800;

/// Separates host from user agent inside a user key.
pub const USER_KEY_SEPARATOR: char = '\x1f';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageVisit {
    pub page: String,
    #[serde(rename = "arrival_iso8601")]
    pub arrival: DateTime<Utc>,
    /// Seconds until the next request of the same session; absent on the last visit.
    #[serde(rename = "dwell_s")]
    pub dwell: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub user_key: String,
    pub visits: Vec<PageVisit>,
}

impl Session {
    pub fn pages(&self) -> Vec<String> {
        self.visits.iter().map(|v| v.page.clone()).collect()
    }

    pub fn start(&self) -> Option<DateTime<Utc>> {
        self.visits.first().map(|v| v.arrival)
    }
}

pub fn user_key(entry: &LogEntry) -> String {
    format!(
        "{}{}{}",
        entry.remote_host,
        USER_KEY_SEPARATOR,
        entry.user_agent.as_deref().unwrap_or("-")
    )
}

/// Group entries into sessions. Entries are expected to be filtered already;
/// every entry lands in exactly one session. Sessions come out ordered by
/// first arrival (then user key), with dwell times filled in.
///
/// A non-positive timeout puts every request in its own session.
pub fn sessionize(entries: &[LogEntry], timeout_s: i64) -> Vec<Session> {
    let mut by_user: BTreeMap<String, Vec<PageVisit>> = BTreeMap::new();
    for entry in entries {
        by_user.entry(user_key(entry)).or_default().push(PageVisit {
            page: entry.path.clone(),
            arrival: entry.utc(),
            dwell: None,
        });
    }

    let mut sessions = Vec::new();
    for (key, mut visits) in by_user {
        visits.sort_by_key(|v| v.arrival);
        let mut current: Vec<PageVisit> = Vec::new();
        for visit in visits {
            if let Some(last) = current.last() {
                if (visit.arrival - last.arrival).num_seconds() > timeout_s {
                    sessions.push(Session {
                        user_key: key.clone(),
                        visits: std::mem::take(&mut current),
                    });
                }
            }
            current.push(visit);
        }
        if !current.is_empty() {
            sessions.push(Session {
                user_key: key,
                visits: current,
            });
        }
    }

    sessions.sort_by(|a, b| a.start().cmp(&b.start()).then_with(|| a.user_key.cmp(&b.user_key)));
    sessions.into_iter().map(compute_dwell).collect()
}

/// Fill dwell times from consecutive arrivals. Visits are stably sorted by
/// arrival first; the last visit gets no dwell.
pub fn compute_dwell(mut session: Session) -> Session {
    session.visits.sort_by_key(|v| v.arrival);
    let n = session.visits.len();
    for i in 0..n {
        session.visits[i].dwell = if i + 1 < n {
            let gap = (session.visits[i + 1].arrival - session.visits[i].arrival).num_seconds();
            Some(gap.max(0) as u64)
        } else {
            None
        };
    }
    session
}
