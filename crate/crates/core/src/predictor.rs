//! Markov candidates re-scored by vague association rules.
//!
//! A candidate `y` with Markov probability `p` scores `p * (1 + beta * c)`,
//! where `c` is the best confidence among rules `X -> {y}` whose antecedent
//! is contained in the current context. When the Markov model has nothing for
//! the context, matching rules alone propose pages at `gamma * c`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::TransitionModel;
use crate::rules::VagueRule;

pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictorError {
    #[error("beta must be finite and >= 0, got {0}")]
    Beta(f64),
    #[error("gamma must lie strictly between 0 and 1, got {0}")]
    Gamma(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleRef {
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub page: String,
    pub score: f64,
    pub markov_probability: f64,
    pub rule_confidence: f64,
    pub matched_rule: Option<RuleRef>,
    /// Raw Markov pair count backing the candidate (0 for rule-only entries).
    #[serde(skip)]
    pub pair_count: u64,
}

/// Anything that can propose pages to prefetch.
pub trait PagePredictor {
    fn predict_pages(&self, context: &[String], top_n: usize) -> Vec<String>;
}

impl PagePredictor for TransitionModel {
    fn predict_pages(&self, context: &[String], top_n: usize) -> Vec<String> {
        self.predict_next(context, top_n)
            .into_iter()
            .map(|n| n.page)
            .collect()
    }
}

#[derive(Debug, Clone)]
struct IndexedRule {
    antecedent: BTreeSet<String>,
    confidence: f64,
    rule: usize,
}

#[derive(Debug, Clone)]
pub struct Predictor {
    model: TransitionModel,
    rules: Vec<VagueRule>,
    /// Single-item consequent -> rules, highest confidence first.
    by_consequent: BTreeMap<String, Vec<IndexedRule>>,
    beta: f64,
    gamma: f64,
}

impl Predictor {
    pub fn build(
        model: TransitionModel,
        rules: Vec<VagueRule>,
        beta: f64,
        gamma: f64,
    ) -> Result<Self, PredictorError> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(PredictorError::Beta(beta));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(PredictorError::Gamma(gamma));
        }
        let mut by_consequent: BTreeMap<String, Vec<IndexedRule>> = BTreeMap::new();
        for (idx, rule) in rules.iter().enumerate() {
            let [consequent] = rule.consequent.as_slice() else {
                continue;
            };
            by_consequent
                .entry(consequent.clone())
                .or_default()
                .push(IndexedRule {
                    antecedent: rule.antecedent.iter().cloned().collect(),
                    confidence: rule.confidence,
                    rule: idx,
                });
        }
        for list in by_consequent.values_mut() {
            // stable: equal confidences keep mined order
            list.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        }
        Ok(Predictor {
            model,
            rules,
            by_consequent,
            beta,
            gamma,
        })
    }

    pub fn model(&self) -> &TransitionModel {
        &self.model
    }

    pub fn rules(&self) -> &[VagueRule] {
        &self.rules
    }

    fn best_rule(&self, page: &str, context: &BTreeSet<String>) -> Option<&IndexedRule> {
        self.by_consequent
            .get(page)?
            .iter()
            .find(|r| r.antecedent.is_subset(context))
    }

    fn rule_ref(&self, hit: &IndexedRule) -> RuleRef {
        let rule = &self.rules[hit.rule];
        RuleRef {
            antecedent: rule.antecedent.clone(),
            consequent: rule.consequent.clone(),
        }
    }

    pub fn predict(&self, context: &[String], top_n: usize) -> Vec<Prediction> {
        let context_set: BTreeSet<String> = context.iter().cloned().collect();
        let candidates = self.model.next_distribution(context);

        let mut out: Vec<Prediction> = if candidates.is_empty() {
            self.by_consequent
                .keys()
                .filter_map(|page| {
                    let hit = self.best_rule(page, &context_set)?;
                    Some(Prediction {
                        page: page.clone(),
                        score: self.gamma * hit.confidence,
                        markov_probability: 0.0,
                        rule_confidence: hit.confidence,
                        matched_rule: Some(self.rule_ref(hit)),
                        pair_count: 0,
                    })
                })
                .collect()
        } else {
            candidates
                .into_iter()
                .map(|c| {
                    let hit = self.best_rule(&c.page, &context_set);
                    let confidence = hit.map_or(0.0, |h| h.confidence);
                    Prediction {
                        score: c.probability * (1.0 + self.beta * confidence),
                        markov_probability: c.probability,
                        rule_confidence: confidence,
                        matched_rule: hit.map(|h| self.rule_ref(h)),
                        pair_count: c.count,
                        page: c.page,
                    }
                })
                .collect()
        };

        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(b.pair_count.cmp(&a.pair_count))
                .then_with(|| a.page.cmp(&b.page))
        });
        out.truncate(top_n);
        out
    }
}

impl PagePredictor for Predictor {
    fn predict_pages(&self, context: &[String], top_n: usize) -> Vec<String> {
        self.predict(context, top_n)
            .into_iter()
            .map(|p| p.page)
            .collect()
    }
}
