//! Vague values: a truth membership `t` and a false membership `f` with
//! `t + f <= 1`, bounding an unknown membership grade to `[t, 1 - f]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::MembershipVector;

/// Slack allowed on `t + f <= 1` for floating point round-off.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VagueError {
    #[error("t={t}, f={f} is not a vague value (need t, f in [0, 1] and t + f <= 1)")]
    Domain { t: f64, f: f64 },
    #[error("expected {expected} memberships, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("cannot combine an empty list of vague values")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VagueValue {
    t: f64,
    f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub median: f64,
    pub imprecision: f64,
    pub interval: (f64, f64),
}

impl VagueValue {
    pub fn new(t: f64, f: f64) -> Result<Self, VagueError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&t) || !unit.contains(&f) || t + f > 1.0 + SUM_TOLERANCE {
            return Err(VagueError::Domain { t, f });
        }
        Ok(VagueValue { t, f })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    /// Width of `[t, 1 - f]`, clamped at zero.
    pub fn imprecision(&self) -> f64 {
        (1.0 - self.t - self.f).max(0.0)
    }

    /// Midpoint of `[t, 1 - f]`.
    pub fn median(&self) -> f64 {
        self.t + self.imprecision() / 2.0
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t, (1.0 - self.f).max(self.t))
    }

    pub fn decompose(&self) -> Decomposition {
        Decomposition {
            median: self.median(),
            imprecision: self.imprecision(),
            interval: self.interval(),
        }
    }
}

/// Rounds to 12 significant digits.
pub(crate) fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

impl Serialize for VagueValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("VagueValue", 2)?;
        st.serialize_field("t", &sig12(self.t))?;
        st.serialize_field("f", &sig12(self.f))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for VagueValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            t: f64,
            f: f64,
        }
        let raw = Raw::deserialize(d)?;
        VagueValue::new(raw.t, raw.f).map_err(serde::de::Error::custom)
    }
}

pub fn make_vague(t: f64, f: f64) -> Result<VagueValue, VagueError> {
    VagueValue::new(t, f)
}

/// Map normalized short / medium / long memberships to evidence against /
/// hesitation / evidence for.
pub fn from_memberships(m: &MembershipVector) -> Result<VagueValue, VagueError> {
    from_normalized(&m.normalized)
}

pub fn from_normalized(normalized: &[f64]) -> Result<VagueValue, VagueError> {
    let [short, _medium, long] = normalized else {
        return Err(VagueError::Arity {
            expected: 3,
            got: normalized.len(),
        });
    };
    let f = short.clamp(0.0, 1.0);
    let t = long.clamp(0.0, 1.0 - f);
    VagueValue::new(t, f)
}

/// Component-wise mean.
pub fn combine_visits(values: &[VagueValue]) -> Result<VagueValue, VagueError> {
    if values.is_empty() {
        return Err(VagueError::Empty);
    }
    let n = values.len() as f64;
    let t = values.iter().map(|v| v.t).sum::<f64>() / n;
    let f = values.iter().map(|v| v.f).sum::<f64>() / n;
    VagueValue::new(t.min(1.0), f.min(1.0))
}
