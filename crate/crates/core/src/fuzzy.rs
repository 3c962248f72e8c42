//! Fuzzy categorisation of dwell times into short / medium / long.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_TD_S: f64 = 1800.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("invalid partition: {0}")]
    Config(String),
    #[error("dwell time must be non-negative, got {0}")]
    NegativeDuration(f64),
    #[error("cannot normalise an all-zero membership vector")]
    ZeroMembership,
}

/// Trapezoid with feet at `a`, `d` and a plateau of height 1 on `[b, c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trapezoid {
    pub label: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Trapezoid {
    pub fn new(label: &str, a: f64, b: f64, c: f64, d: f64) -> Self {
        Trapezoid {
            label: label.to_string(),
            a,
            b,
            c,
            d,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.b && x <= self.c {
            1.0
        } else if x > self.a && x < self.b {
            (x - self.a) / (self.b - self.a)
        } else if x > self.c && x < self.d {
            (self.d - x) / (self.d - self.c)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyTimePartition {
    #[serde(rename = "max_td_s")]
    pub max_td: f64,
    pub sets: Vec<Trapezoid>,
}

/// Raw memberships of one dwell time, one value per fuzzy set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMembership(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl FuzzyTimePartition {
    /// Short / medium / long with breakpoints at 5%, 15%, 35% and 55% of `max_td`.
    pub fn default_partition(max_td: f64) -> Result<Self, FuzzyError> {
        if !(max_td > 0.0 && max_td.is_finite()) {
            return Err(FuzzyError::Config(format!(
                "max_td must be positive, got {max_td}"
            )));
        }
        let m = max_td;
        Self::new(
            m,
            vec![
                Trapezoid::new("short", 0.0, 0.0, 0.05 * m, 0.15 * m),
                Trapezoid::new("medium", 0.05 * m, 0.15 * m, 0.35 * m, 0.55 * m),
                Trapezoid::new("long", 0.35 * m, 0.55 * m, m, m),
            ],
        )
    }

    pub fn new(max_td: f64, sets: Vec<Trapezoid>) -> Result<Self, FuzzyError> {
        let partition = FuzzyTimePartition { max_td, sets };
        partition.validate()?;
        Ok(partition)
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        let bad = |msg: String| Err(FuzzyError::Config(msg));
        if !(self.max_td > 0.0 && self.max_td.is_finite()) {
            return bad(format!("max_td must be positive, got {}", self.max_td));
        }
        if self.sets.len() < 2 {
            return bad(format!("need at least 2 fuzzy sets, got {}", self.sets.len()));
        }
        for t in &self.sets {
            let pts = [t.a, t.b, t.c, t.d];
            if pts.iter().any(|p| !p.is_finite()) || !(t.a <= t.b && t.b <= t.c && t.c <= t.d) {
                return bad(format!("set '{}' needs finite a <= b <= c <= d", t.label));
            }
        }
        if self.sets[0].eval(0.0) != 1.0 {
            return bad("first set must have membership 1 at zero".into());
        }
        if self.sets[self.sets.len() - 1].eval(self.max_td) != 1.0 {
            return bad("last set must have membership 1 at max_td".into());
        }
        // The sum of memberships is piecewise linear between breakpoints, so
        // checking it at every breakpoint proves coverage of the whole range.
        let mut points: Vec<f64> = self
            .sets
            .iter()
            .flat_map(|t| [t.a, t.b, t.c, t.d])
            .chain([0.0, self.max_td])
            .filter(|p| (0.0..=self.max_td).contains(p))
            .collect();
        points.sort_by(f64::total_cmp);
        for p in points {
            if self.sets.iter().map(|t| t.eval(p)).sum::<f64>() <= 0.0 {
                return bad(format!("no fuzzy set covers dwell time {p}"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.sets.iter().map(|t| t.label.as_str()).collect()
    }

    /// Raw memberships. Beyond `max_td` only the last set is active.
    pub fn eval_raw(&self, tau: f64) -> Result<RawMembership, FuzzyError> {
        if tau.is_nan() || tau < 0.0 {
            return Err(FuzzyError::NegativeDuration(tau));
        }
        if tau > self.max_td {
            let mut raw = vec![0.0; self.sets.len()];
            if let Some(last) = raw.last_mut() {
                *last = 1.0;
            }
            return Ok(RawMembership(raw));
        }
        Ok(RawMembership(self.sets.iter().map(|t| t.eval(tau)).collect()))
    }

    pub fn memberships(&self, tau: f64) -> Result<MembershipVector, FuzzyError> {
        self.eval_raw(tau)?.normalize()
    }
}

impl RawMembership {
    pub fn normalize(&self) -> Result<MembershipVector, FuzzyError> {
        normalize(&self.0)
    }
}

/// Scale memberships so they sum to one.
pub fn normalize(raw: &[f64]) -> Result<MembershipVector, FuzzyError> {
    let total: f64 = raw.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(FuzzyError::ZeroMembership);
    }
    Ok(MembershipVector {
        raw: raw.to_vec(),
        normalized: raw.iter().map(|r| r / total).collect(),
    })
}
