//! Vague association rules over per-session dwell evidence.
//!
//! Each session maps the pages it dwelt on to a [`VagueValue`]. Items are
//! scalarised by their median membership and itemsets combine with `min`, which
//! keeps support anti-monotone so level-wise Apriori search stays exact.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{FuzzyError, FuzzyTimePartition};
use crate::session::Session;
use crate::vague::{combine_visits, from_memberships, VagueError, VagueValue};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiningError {
    #[error("itemset must not be empty")]
    EmptyItemset,
    #[error("unknown item '{0}'")]
    UnknownItem(String),
    #[error("antecedent and consequent overlap")]
    Overlap,
    #[error("confidence is undefined: antecedent has zero support")]
    UndefinedConfidence,
    #[error("invalid threshold: {0}")]
    Threshold(String),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Vague(#[from] VagueError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VagueDatabase {
    sessions: Vec<BTreeMap<String, VagueValue>>,
    items: Vec<String>,
    /// `medians[s][i]`, zero where item `i` is absent from session `s`.
    medians: Vec<Vec<f64>>,
    imprecisions: Vec<Vec<f64>>,
}

impl VagueDatabase {
    pub fn from_sessions(sessions: Vec<BTreeMap<String, VagueValue>>) -> Self {
        let universe: BTreeSet<String> = sessions.iter().flat_map(|s| s.keys().cloned()).collect();
        let items: Vec<String> = universe.into_iter().collect();
        let scalarise = |f: fn(&VagueValue) -> f64| -> Vec<Vec<f64>> {
            sessions
                .iter()
                .map(|s| items.iter().map(|i| s.get(i).map_or(0.0, f)).collect())
                .collect()
        };
        let medians = scalarise(VagueValue::median);
        let imprecisions = scalarise(VagueValue::imprecision);
        VagueDatabase {
            sessions,
            items,
            medians,
            imprecisions,
        }
    }

    /// One row per session, from dwell-bearing visits only. A page visited
    /// several times gets the mean of its visit values. Sessions with no dwell
    /// evidence at all are dropped.
    pub fn build(sessions: &[Session], partition: &FuzzyTimePartition) -> Result<Self, MiningError> {
        let mut rows = Vec::new();
        for session in sessions {
            let mut per_page: BTreeMap<&str, Vec<VagueValue>> = BTreeMap::new();
            for visit in &session.visits {
                if let Some(dwell) = visit.dwell {
                    let value = from_memberships(&partition.memberships(dwell as f64)?)?;
                    per_page.entry(&visit.page).or_default().push(value);
                }
            }
            if per_page.is_empty() {
                continue;
            }
            let row = per_page
                .into_iter()
                .map(|(page, values)| Ok((page.to_string(), combine_visits(&values)?)))
                .collect::<Result<BTreeMap<_, _>, VagueError>>()?;
            rows.push(row);
        }
        Ok(Self::from_sessions(rows))
    }

    pub fn sessions(&self) -> &[BTreeMap<String, VagueValue>] {
        &self.sessions
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn item_universe(&self) -> &[String] {
        &self.items
    }

    fn index_of(&self, item: &str) -> Result<usize, MiningError> {
        self.items
            .binary_search_by(|i| i.as_str().cmp(item))
            .map_err(|_| MiningError::UnknownItem(item.to_string()))
    }

    fn indices<S: AsRef<str>>(&self, itemset: &[S]) -> Result<Vec<usize>, MiningError> {
        if itemset.is_empty() {
            return Err(MiningError::EmptyItemset);
        }
        let mut idx = itemset
            .iter()
            .map(|i| self.index_of(i.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }

    /// Sum over sessions of the minimum member median.
    fn support_sum(&self, itemset: &[usize]) -> f64 {
        self.medians
            .iter()
            .map(|row| itemset.iter().map(|&i| row[i]).fold(f64::INFINITY, f64::min))
            .sum()
    }

    fn to_support(&self, sum: f64) -> f64 {
        if self.sessions.is_empty() {
            0.0
        } else {
            sum / self.sessions.len() as f64
        }
    }

    pub fn support<S: AsRef<str>>(&self, itemset: &[S]) -> Result<f64, MiningError> {
        let idx = self.indices(itemset)?;
        Ok(self.to_support(self.support_sum(&idx)))
    }

    pub fn confidence<S: AsRef<str>>(&self, antecedent: &[S], consequent: &[S]) -> Result<f64, MiningError> {
        let x = self.indices(antecedent)?;
        let y = self.indices(consequent)?;
        if x.iter().any(|i| y.contains(i)) {
            return Err(MiningError::Overlap);
        }
        let x_sum = self.support_sum(&x);
        if x_sum <= 0.0 {
            return Err(MiningError::UndefinedConfidence);
        }
        let mut union = x;
        union.extend(y);
        union.sort_unstable();
        // Ratio of raw sums, so crisp data reproduces count ratios exactly.
        Ok(self.support_sum(&union) / x_sum)
    }

    fn attractiveness_at(&self, i: usize) -> f64 {
        self.to_support(self.medians.iter().map(|row| row[i]).sum())
    }

    fn hesitation_at(&self, i: usize) -> f64 {
        self.to_support(self.imprecisions.iter().map(|row| row[i]).sum())
    }

    /// Mean median membership of `item` across sessions.
    pub fn item_attractiveness(&self, item: &str) -> Result<f64, MiningError> {
        Ok(self.attractiveness_at(self.index_of(item)?))
    }

    /// Mean imprecision of `item` across sessions.
    pub fn item_hesitation(&self, item: &str) -> Result<f64, MiningError> {
        Ok(self.hesitation_at(self.index_of(item)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VagueRule {
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
    pub support: f64,
    pub confidence: f64,
    /// Lowest attractiveness among the rule's items.
    pub attractiveness: f64,
    /// Mean hesitation of the rule's items.
    pub hesitation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningParams {
    pub min_support: f64,
    pub min_confidence: f64,
    pub min_attractiveness: f64,
    /// Rules whose hesitation exceeds this are dropped; `None` disables the gate.
    pub max_hesitation: Option<f64>,
    pub max_antecedent: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            min_support: 0.05,
            min_confidence: 0.3,
            min_attractiveness: 0.0,
            max_hesitation: None,
            max_antecedent: 2,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<(), MiningError> {
        let unit = 0.0..=1.0;
        for (name, v) in [
            ("min_support", self.min_support),
            ("min_confidence", self.min_confidence),
            ("min_attractiveness", self.min_attractiveness),
        ] {
            if !unit.contains(&v) {
                return Err(MiningError::Threshold(format!("{name}={v} not in [0, 1]")));
            }
        }
        if let Some(h) = self.max_hesitation {
            if !unit.contains(&h) {
                return Err(MiningError::Threshold(format!("max_hesitation={h} not in [0, 1]")));
            }
        }
        if self.max_antecedent == 0 {
            return Err(MiningError::Threshold("max_antecedent must be at least 1".into()));
        }
        Ok(())
    }
}

/// Level-wise search for frequent itemsets of size up to `max_size`.
/// Returns each frequent itemset with its support sum.
fn frequent_itemsets(db: &VagueDatabase, min_support: f64, max_size: usize) -> BTreeMap<Vec<usize>, f64> {
    let mut all = BTreeMap::new();
    let mut level: Vec<Vec<usize>> = Vec::new();
    for i in 0..db.items.len() {
        let sum = db.support_sum(&[i]);
        if db.to_support(sum) >= min_support {
            all.insert(vec![i], sum);
            level.push(vec![i]);
        }
    }
    let mut size = 1;
    while !level.is_empty() && size < max_size {
        let known: HashSet<&Vec<usize>> = level.iter().collect();
        let mut next = Vec::new();
        for (a_pos, a) in level.iter().enumerate() {
            for b in &level[a_pos + 1..] {
                if a[..size - 1] != b[..size - 1] {
                    // `level` is sorted, so no later b shares a's prefix either.
                    break;
                }
                let mut candidate = a.clone();
                candidate.push(b[size - 1]);
                let all_subsets_frequent = (0..candidate.len()).all(|skip| {
                    let subset: Vec<usize> = candidate
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    known.contains(&subset)
                });
                if !all_subsets_frequent {
                    continue;
                }
                let sum = db.support_sum(&candidate);
                if db.to_support(sum) >= min_support {
                    next.push(candidate);
                }
            }
        }
        for c in &next {
            all.insert(c.clone(), db.support_sum(c));
        }
        level = next;
        size += 1;
    }
    all
}

/// Mine single-consequent vague rules. Output is sorted by confidence and
/// support (both descending), then antecedent and consequent ascending.
pub fn mine(db: &VagueDatabase, params: &MiningParams) -> Result<Vec<VagueRule>, MiningError> {
    params.validate()?;
    if db.session_count() == 0 {
        return Ok(Vec::new());
    }
    let attractiveness: Vec<f64> = (0..db.items.len()).map(|i| db.attractiveness_at(i)).collect();
    let hesitation: Vec<f64> = (0..db.items.len()).map(|i| db.hesitation_at(i)).collect();

    let frequent = frequent_itemsets(db, params.min_support, params.max_antecedent + 1);
    let mut rules = Vec::new();
    for (itemset, &sum) in frequent.iter().filter(|(s, _)| s.len() >= 2) {
        if itemset.iter().any(|&i| attractiveness[i] < params.min_attractiveness) {
            continue;
        }
        let rule_attr = itemset.iter().map(|&i| attractiveness[i]).fold(f64::INFINITY, f64::min);
        let rule_hes = itemset.iter().map(|&i| hesitation[i]).sum::<f64>() / itemset.len() as f64;
        if params.max_hesitation.is_some_and(|h| rule_hes > h) {
            continue;
        }
        for &y in itemset {
            let antecedent: Vec<usize> = itemset.iter().copied().filter(|&i| i != y).collect();
            let x_sum = frequent
                .get(&antecedent)
                .copied()
                .unwrap_or_else(|| db.support_sum(&antecedent));
            if x_sum <= 0.0 {
                continue;
            }
            let confidence = sum / x_sum;
            if confidence < params.min_confidence {
                continue;
            }
            rules.push(VagueRule {
                antecedent: antecedent.iter().map(|&i| db.items[i].clone()).collect(),
                consequent: vec![db.items[y].clone()],
                support: db.to_support(sum),
                confidence,
                attractiveness: rule_attr,
                hesitation: rule_hes,
            });
        }
    }
    sort_rules(&mut rules);
    Ok(rules)
}

pub fn sort_rules(rules: &mut [VagueRule]) {
    rules.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.support.total_cmp(&a.support))
            .then_with(|| a.antecedent.cmp(&b.antecedent))
            .then_with(|| a.consequent.cmp(&b.consequent))
    });
}
