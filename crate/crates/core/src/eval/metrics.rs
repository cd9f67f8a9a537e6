//! Rank-based retrieval metrics.
//!
//! A document is relevant when its grade is positive. Every metric returns
//! `None` for a query without relevant documents; such queries are left out
//! of means.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{DocId, Qrels};
use crate::error::{Error, Result};

/// A query's ranked result list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: String,
    pub docs: Vec<DocId>,
    pub scores: Vec<f64>,
}

impl Ranking {
    /// Builds a ranking from `(doc, score)` pairs in rank order, rejecting
    /// duplicate documents and increasing scores.
    pub fn new(query_id: impl Into<String>, hits: impl IntoIterator<Item = (DocId, f64)>) -> Result<Self> {
        let query_id = query_id.into();
        let (docs, scores): (Vec<DocId>, Vec<f64>) = hits.into_iter().unzip();
        let mut seen = HashSet::new();
        if let Some(dup) = docs.iter().find(|d| !seen.insert(*d)) {
            return Err(Error::Validation(format!(
                "ranking for `{query_id}` lists `{dup}` twice"
            )));
        }
        if scores.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Validation(format!(
                "ranking for `{query_id}` has increasing scores"
            )));
        }
        Ok(Ranking {
            query_id,
            docs,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Recall,
    Mrr,
    Ndcg,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Recall => "recall",
            MetricKind::Mrr => "mrr",
            MetricKind::Ndcg => "ndcg",
        }
    }
}

/// A metric at a rank cutoff, written `name@k` (e.g. `ndcg@10`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Metric {
    pub kind: MetricKind,
    pub k: usize,
}

impl Metric {
    pub fn new(kind: MetricKind, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config(format!("{}@0: cutoff must be at least 1", kind.as_str())));
        }
        Ok(Metric { kind, k })
    }

    pub fn compute(self, ranking: &Ranking, qrels: &Qrels) -> Option<f64> {
        match self.kind {
            MetricKind::Recall => recall_at_k(ranking, qrels, self.k),
            MetricKind::Mrr => mrr_at_k(ranking, qrels, self.k),
            MetricKind::Ndcg => ndcg_at_k(ranking, qrels, self.k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.as_str(), self.k)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse metric `{s}` (expected e.g. recall@10)"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let kind = match name.to_ascii_lowercase().as_str() {
            "recall" => MetricKind::Recall,
            "mrr" => MetricKind::Mrr,
            "ndcg" => MetricKind::Ndcg,
            _ => return Err(bad()),
        };
        Metric::new(kind, k.parse().map_err(|_| bad())?)
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fraction of the query's relevant documents found in the top `k`.
pub fn recall_at_k(ranking: &Ranking, qrels: &Qrels, k: usize) -> Option<f64> {
    let relevant = qrels.relevant_count(&ranking.query_id);
    if relevant == 0 {
        return None;
    }
    let found = ranking
        .docs
        .iter()
        .take(k)
        .filter(|d| qrels.grade(&ranking.query_id, d) > 0)
        .count();
    Some(found as f64 / relevant as f64)
}

/// Reciprocal rank of the first relevant document in the top `k`, else 0.
pub fn mrr_at_k(ranking: &Ranking, qrels: &Qrels, k: usize) -> Option<f64> {
    if qrels.relevant_count(&ranking.query_id) == 0 {
        return None;
    }
    let first = ranking
        .docs
        .iter()
        .take(k)
        .position(|d| qrels.grade(&ranking.query_id, d) > 0);
    Some(first.map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// Normalized DCG with exponential gain `2^grade - 1` and discount
/// `log2(rank + 1)`.
pub fn ndcg_at_k(ranking: &Ranking, qrels: &Qrels, k: usize) -> Option<f64> {
    let grades = qrels.grades(&ranking.query_id)?;
    if !grades.values().any(|&g| g > 0) {
        return None;
    }
    let dcg: f64 = ranking
        .docs
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain(qrels.grade(&ranking.query_id, d)) / discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = grades.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / discount(i + 1))
        .sum();
    Some(if idcg > 0.0 { dcg / idcg } else { 0.0 })
}
