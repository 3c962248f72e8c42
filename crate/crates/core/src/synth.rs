//! Seeded synthetic access logs from a known Markov chain.

use chrono::DateTime;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::DEFAULT_MAX_TD_S;
use crate::session::DEFAULT_TIMEOUT_S;

/// 2020-01-01T00:00:00Z
pub const DEFAULT_START_UNIX: i64 = 1_577_836_800;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid generator spec: {0}")]
pub struct SpecError(pub String);

/// Which fuzzy core a page's dwell times are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellProfile {
    ShortBiased,
    MediumBiased,
    LongBiased,
}

impl DwellProfile {
    /// Inclusive integer-second range inside the plateau of the matching
    /// default trapezoid for `max_td`.
    pub fn range(self, max_td: f64) -> (u64, u64) {
        let (lo, hi) = match self {
            DwellProfile::ShortBiased => (0.0, 0.05 * max_td),
            DwellProfile::MediumBiased => (0.15 * max_td, 0.35 * max_td),
            DwellProfile::LongBiased => (0.55 * max_td, max_td),
        };
        (lo.ceil() as u64, hi.floor() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub pages: usize,
    pub start: Vec<f64>,
    /// Row-stochastic `pages x pages` transition matrix.
    pub chain: Vec<Vec<f64>>,
    pub dwell_profiles: Vec<DwellProfile>,
    pub session_count: usize,
    pub session_length_range: [usize; 2],
    pub seed: u64,
    pub hosts: usize,
    #[serde(default = "default_max_td")]
    pub max_td_s: f64,
    #[serde(default = "default_timeout")]
    pub timeout_s: i64,
    #[serde(default = "default_start")]
    pub start_unix: i64,
}

fn default_max_td() -> f64 {
    DEFAULT_MAX_TD_S
}

fn default_timeout() -> i64 {
    DEFAULT_TIMEOUT_S
}

fn default_start() -> i64 {
    DEFAULT_START_UNIX
}

fn cycle_profiles(pages: usize) -> Vec<DwellProfile> {
    const ALL: [DwellProfile; 3] = [
        DwellProfile::ShortBiased,
        DwellProfile::MediumBiased,
        DwellProfile::LongBiased,
    ];
    (0..pages).map(|i| ALL[i % 3]).collect()
}

impl GeneratorSpec {
    /// Each page moves to its successor `(i + 1) mod pages` with probability
    /// `dominant`, and uniformly to any other page otherwise.
    pub fn dominant(pages: usize, dominant: f64, session_count: usize, seed: u64) -> Self {
        let chain = (0..pages)
            .map(|i| {
                (0..pages)
                    .map(|j| {
                        if pages == 1 {
                            1.0
                        } else if j == (i + 1) % pages {
                            dominant
                        } else {
                            (1.0 - dominant) / (pages - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        GeneratorSpec {
            pages,
            start: vec![1.0 / pages as f64; pages],
            chain,
            dwell_profiles: cycle_profiles(pages),
            session_count,
            session_length_range: [2, 8],
            seed,
            hosts: 100,
            max_td_s: DEFAULT_MAX_TD_S,
            timeout_s: DEFAULT_TIMEOUT_S,
            start_unix: DEFAULT_START_UNIX,
        }
    }

    /// Random dense chain and start distribution drawn from `seed`.
    pub fn random(pages: usize, session_count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c4a1);
        let mut row = || {
            let w: Vec<f64> = (0..pages).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect::<Vec<f64>>()
        };
        let start = row();
        let chain = (0..pages).map(|_| row()).collect();
        GeneratorSpec {
            start,
            chain,
            ..GeneratorSpec::dominant(pages, 1.0, session_count, seed)
        }
    }

    pub fn page_name(index: usize) -> String {
        format!("/page{index}.html")
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let err = |m: String| Err(SpecError(m));
        let stochastic = |row: &[f64]| {
            row.iter().all(|p| p.is_finite() && *p >= 0.0)
                && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        if self.pages == 0 {
            return err("need at least one page".into());
        }
        if self.start.len() != self.pages || !stochastic(&self.start) {
            return err("start distribution must have one entry per page and sum to 1".into());
        }
        if self.chain.len() != self.pages
            || self
                .chain
                .iter()
                .any(|r| r.len() != self.pages || !stochastic(r))
        {
            return err("chain must be a row-stochastic pages x pages matrix".into());
        }
        if self.dwell_profiles.len() != self.pages {
            return err("need one dwell profile per page".into());
        }
        let [lo, hi] = self.session_length_range;
        if lo < 2 || lo > hi {
            return err(format!("session length range [{lo}, {hi}] needs 2 <= min <= max"));
        }
        if self.hosts == 0 {
            return err("need at least one host".into());
        }
        if !(self.max_td_s > 0.0 && self.max_td_s.is_finite()) {
            return err("max_td_s must be positive".into());
        }
        if self.timeout_s <= 0 || self.max_td_s > self.timeout_s as f64 {
            return err("dwell ceiling max_td_s must not exceed the session timeout".into());
        }
        Ok(())
    }
}

/// One generated request, before rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticRequest {
    pub unix: i64,
    pub host: usize,
    pub session: usize,
    pub page: usize,
}

fn host_name(host: usize) -> String {
    format!("10.{}.{}.{}", host >> 16 & 0xff, host >> 8 & 0xff, host & 0xff)
}

/// Sample the request stream, ordered by time (then host, then session).
pub fn generate_requests(spec: &GeneratorSpec) -> Result<Vec<SyntheticRequest>, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights = |w: &[f64]| WeightedIndex::new(w).map_err(|e| SpecError(e.to_string()));
    let start = weights(&spec.start)?;
    let rows = spec
        .chain
        .iter()
        .map(|r| weights(r))
        .collect::<Result<Vec<_>, _>>()?;

    let mut clocks = vec![spec.start_unix; spec.hosts];
    let mut out = Vec::new();
    for session in 0..spec.session_count {
        let host = session % spec.hosts;
        let [lo, hi] = spec.session_length_range;
        let len = rng.gen_range(lo..=hi);
        let mut page = start.sample(&mut rng);
        let mut t = clocks[host];
        for step in 0..len {
            out.push(SyntheticRequest {
                unix: t,
                host,
                session,
                page,
            });
            if step + 1 < len {
                let (dlo, dhi) = spec.dwell_profiles[page].range(spec.max_td_s);
                t += rng.gen_range(dlo..=dhi) as i64;
                page = rows[page].sample(&mut rng);
            }
        }
        clocks[host] = t + spec.timeout_s + 60;
    }
    out.sort_by_key(|r| (r.unix, r.host, r.session));
    Ok(out)
}

/// Render the generated requests as Common Log Format lines.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<String>, SpecError> {
    Ok(generate_requests(spec)?
        .into_iter()
        .map(|r| {
            let ts = DateTime::from_timestamp(r.unix, 0).expect("timestamp in range");
            format!(
                "{} - - [{}] \"GET {} HTTP/1.1\" 200 {}",
                host_name(r.host),
                ts.format("%d/%b/%Y:%H:%M:%S +0000"),
                GeneratorSpec::page_name(r.page),
                1024 + 17 * r.page
            )
        })
        .collect())
}
