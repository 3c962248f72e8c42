//! Order-k Markov model over page sequences with strict longest-context backoff.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::Session;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkovError {
    #[error("model order must be at least 1")]
    ZeroOrder,
    #[error("malformed model: {0}")]
    Malformed(String),
}

pub type Context = Vec<String>;
pub type Row = BTreeMap<String, u64>;

/// Transition counts for contexts of length 1..=order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionModel {
    order: usize,
    start_counts: BTreeMap<String, u64>,
    /// `tables[j - 1]` holds contexts of length `j`.
    tables: Vec<BTreeMap<Context, Row>>,
    total_sessions: u64,
}

/// One next-page candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextPage {
    pub page: String,
    pub probability: f64,
    /// Raw count of (context, page) in the row used.
    pub count: u64,
}

impl TransitionModel {
    pub fn empty(order: usize) -> Result<Self, MarkovError> {
        if order == 0 {
            return Err(MarkovError::ZeroOrder);
        }
        Ok(TransitionModel {
            order,
            start_counts: BTreeMap::new(),
            tables: vec![BTreeMap::new(); order],
            total_sessions: 0,
        })
    }

    pub fn train(sessions: &[Session], order: usize) -> Result<Self, MarkovError> {
        let sequences: Vec<Vec<String>> = sessions.iter().map(Session::pages).collect();
        Self::train_sequences(&sequences, order)
    }

    pub fn train_sequences<S: AsRef<[String]>>(
        sequences: &[S],
        order: usize,
    ) -> Result<Self, MarkovError> {
        let mut model = Self::empty(order)?;
        for seq in sequences {
            model.add_sequence(seq.as_ref());
        }
        Ok(model)
    }

    fn add_sequence(&mut self, pages: &[String]) {
        let Some(first) = pages.first() else {
            return;
        };
        self.total_sessions += 1;
        *self.start_counts.entry(first.clone()).or_default() += 1;
        for i in 1..pages.len() {
            for j in 1..=self.order.min(i) {
                let context = pages[i - j..i].to_vec();
                *self.tables[j - 1]
                    .entry(context)
                    .or_default()
                    .entry(pages[i].clone())
                    .or_default() += 1;
            }
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn total_sessions(&self) -> u64 {
        self.total_sessions
    }

    pub fn start_counts(&self) -> &BTreeMap<String, u64> {
        &self.start_counts
    }

    pub fn row(&self, context: &[String]) -> Option<&Row> {
        if context.is_empty() || context.len() > self.order {
            return None;
        }
        self.tables[context.len() - 1].get(context)
    }

    pub fn contexts(&self, len: usize) -> impl Iterator<Item = (&Context, &Row)> {
        self.tables
            .get(len.wrapping_sub(1))
            .into_iter()
            .flat_map(|t| t.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.total_sessions == 0
    }

    /// Longest suffix of `history` (at most `order` pages) that has a row.
    pub fn longest_match<'a>(&'a self, history: &'a [String]) -> Option<(&'a [String], &'a Row)> {
        let max = self.order.min(history.len());
        (1..=max).rev().find_map(|j| {
            let suffix = &history[history.len() - j..];
            self.row(suffix).map(|row| (suffix, row))
        })
    }

    pub fn start_probability(&self, page: &str) -> f64 {
        if self.total_sessions == 0 {
            return 0.0;
        }
        self.start_counts.get(page).copied().unwrap_or(0) as f64 / self.total_sessions as f64
    }

    /// `P(next | longest available suffix of history)`, zero when unseen.
    pub fn transition_probability(&self, history: &[String], next: &str) -> f64 {
        match self.longest_match(history) {
            Some((_, row)) => {
                let total: u64 = row.values().sum();
                row.get(next).copied().unwrap_or(0) as f64 / total as f64
            }
            None => 0.0,
        }
    }

    /// Chain-rule probability of a page sequence: start probability times each
    /// step's transition probability. An empty sequence has probability 0.
    pub fn sequence_probability(&self, pages: &[String]) -> f64 {
        let Some(first) = pages.first() else {
            return 0.0;
        };
        let mut p = self.start_probability(first);
        for n in 1..pages.len() {
            if p == 0.0 {
                break;
            }
            p *= self.transition_probability(&pages[..n], &pages[n]);
        }
        p
    }

    /// Full next-page distribution from the longest matching context, sorted
    /// by probability, then count, then page id.
    pub fn next_distribution(&self, context: &[String]) -> Vec<NextPage> {
        let Some((_, row)) = self.longest_match(context) else {
            return Vec::new();
        };
        let total: u64 = row.values().sum();
        let mut out: Vec<NextPage> = row
            .iter()
            .map(|(page, &count)| NextPage {
                page: page.clone(),
                probability: count as f64 / total as f64,
                count,
            })
            .collect();
        out.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then(b.count.cmp(&a.count))
                .then_with(|| a.page.cmp(&b.page))
        });
        out
    }

    pub fn predict_next(&self, context: &[String], top_n: usize) -> Vec<NextPage> {
        let mut out = self.next_distribution(context);
        out.truncate(top_n);
        out
    }
}

/// Persisted form: counts rather than probabilities so models stay mergeable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub order: usize,
    pub start_counts: BTreeMap<String, u64>,
    pub tables: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub context: Vec<String>,
    pub next: BTreeMap<String, u64>,
}

impl From<&TransitionModel> for ModelFile {
    fn from(model: &TransitionModel) -> Self {
        let tables = model
            .tables
            .iter()
            .flat_map(|t| t.iter())
            .map(|(context, next)| TableRow {
                context: context.clone(),
                next: next.clone(),
            })
            .collect();
        ModelFile {
            order: model.order,
            start_counts: model.start_counts.clone(),
            tables,
        }
    }
}

impl TryFrom<ModelFile> for TransitionModel {
    type Error = MarkovError;

    fn try_from(file: ModelFile) -> Result<Self, Self::Error> {
        let mut model = TransitionModel::empty(file.order)?;
        model.total_sessions = file.start_counts.values().sum();
        model.start_counts = file.start_counts;
        for row in file.tables {
            let len = row.context.len();
            if len == 0 || len > model.order {
                return Err(MarkovError::Malformed(format!(
                    "context of length {len} in an order-{} model",
                    model.order
                )));
            }
            if row.next.values().all(|&c| c == 0) {
                return Err(MarkovError::Malformed("row with no counts".into()));
            }
            model.tables[len - 1].insert(row.context, row.next);
        }
        Ok(model)
    }
}

impl Serialize for TransitionModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TransitionModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = ModelFile::deserialize(d)?;
        TransitionModel::try_from(file).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seqs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|s| s.iter().map(|p| p.to_string()).collect())
            .collect()
    }

    fn pages(raw: &[&str]) -> Vec<String> {
        raw.iter().map(|p| p.to_string()).collect()
    }

    fn toy() -> TransitionModel {
        TransitionModel::train_sequences(&seqs(&[&["A", "B"], &["A", "B"], &["A", "C"]]), 1).unwrap()
    }

    #[test]
    fn first_order_counting() {
        let m = toy();
        assert_eq!(m.transition_probability(&pages(&["A"]), "B"), 2.0 / 3.0);
        assert_eq!(m.transition_probability(&pages(&["A"]), "C"), 1.0 / 3.0);
        assert_eq!(m.start_probability("A"), 1.0);

        let m = TransitionModel::train_sequences(&seqs(&[&["A", "B", "A", "B"]]), 1).unwrap();
        assert_eq!(m.transition_probability(&pages(&["A"]), "B"), 1.0);
        assert_eq!(m.transition_probability(&pages(&["B"]), "A"), 1.0);
    }

    #[test]
    fn second_order_tables() {
        let m = TransitionModel::train_sequences(&seqs(&[&["A", "B", "C"]]), 2).unwrap();
        assert_eq!(m.row(&pages(&["A", "B"])).unwrap().get("C"), Some(&1));
        assert_eq!(m.row(&pages(&["A"])).unwrap().get("B"), Some(&1));
        assert_eq!(m.row(&pages(&["B"])).unwrap().get("C"), Some(&1));
        assert_eq!(m.contexts(2).count(), 1);
        assert_eq!(m.contexts(3).count(), 0);
    }

    #[test]
    fn sequence_probability_examples() {
        let m = toy();
        assert_eq!(m.sequence_probability(&pages(&["A", "B"])), 2.0 / 3.0);
        assert_eq!(m.sequence_probability(&pages(&["A"])), 1.0);
        assert_eq!(m.sequence_probability(&pages(&["B", "A"])), 0.0);
        assert_eq!(m.sequence_probability(&[]), 0.0);
    }

    #[test]
    fn predict_next_examples() {
        let m = toy();
        let got = m.predict_next(&pages(&["A"]), 2);
        assert_eq!(got.len(), 2);
        assert_eq!((got[0].page.as_str(), got[0].probability, got[0].count), ("B", 2.0 / 3.0, 2));
        assert_eq!((got[1].page.as_str(), got[1].probability), ("C", 1.0 / 3.0));
        assert!(m.predict_next(&pages(&["Z"]), 3).is_empty());
        assert_eq!(m.predict_next(&pages(&["A"]), 1).len(), 1);
    }

    #[test]
    fn longest_match_wins_over_order_one_row() {
        // order-1 row for B is {C: 1, D: 1}; the order-2 row (A, B) is {C: 1}
        let m = TransitionModel::train_sequences(&seqs(&[&["A", "B", "C"], &["X", "B", "D"]]), 2).unwrap();
        let got = m.predict_next(&pages(&["A", "B"]), 5);
        assert_eq!(got, vec![NextPage { page: "C".into(), probability: 1.0, count: 1 }]);
        // unseen longer context backs off to the order-1 row
        let got = m.predict_next(&pages(&["Q", "B"]), 5);
        assert_eq!(got.iter().map(|n| n.page.as_str()).collect::<Vec<_>>(), vec!["C", "D"]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let m = TransitionModel::train_sequences(&seqs(&[&["A", "C"], &["A", "B"]]), 1).unwrap();
        let got = m.predict_next(&pages(&["A"]), 2);
        assert_eq!(got[0].page, "B");
        assert_eq!(got[1].page, "C");
    }

    #[test]
    fn zero_order_is_rejected() {
        assert_eq!(TransitionModel::train(&[], 0), Err(MarkovError::ZeroOrder));
    }

    #[test]
    fn json_round_trip_and_shape() {
        let m = TransitionModel::train_sequences(&seqs(&[&["A", "B", "C"], &["B", "C"]]), 2).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["order"], 2);
        assert_eq!(v["start_counts"]["A"], 1);
        assert_eq!(v["tables"][0]["context"], serde_json::json!(["A"]));
        let back: TransitionModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);

        let bad = r#"{"order":1,"start_counts":{},"tables":[{"context":["A","B"],"next":{"C":1}}]}"#;
        assert!(serde_json::from_str::<TransitionModel>(bad).is_err());
    }

    fn corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        proptest::collection::vec(
            proptest::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")], 1..8)
                .prop_map(|s| s.into_iter().map(String::from).collect()),
            1..15,
        )
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(data in corpus(), order in 1usize..4) {
            let m = TransitionModel::train_sequences(&data, order).unwrap();
            for len in 1..=order {
                for (ctx, _) in m.contexts(len) {
                    let s: f64 = m.next_distribution(ctx).iter().map(|n| n.probability).sum();
                    prop_assert!((s - 1.0).abs() < 1e-9);
                }
            }
            let starts: f64 = m.start_counts().keys().map(|p| m.start_probability(p)).sum();
            prop_assert!((starts - 1.0).abs() < 1e-9);
        }

        #[test]
        fn full_context_row_is_used_verbatim(data in corpus()) {
            let m = TransitionModel::train_sequences(&data, 2).unwrap();
            for (ctx, row) in m.contexts(2) {
                let got = m.next_distribution(ctx);
                prop_assert_eq!(got.len(), row.len());
                for n in got {
                    prop_assert_eq!(row[&n.page], n.count);
                }
            }
        }
    }
}
