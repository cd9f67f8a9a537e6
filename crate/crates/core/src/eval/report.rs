use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{Metric, Ranking};
use crate::corpus::Qrels;
use crate::error::{Error, Result};

/// Identifies the configuration a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub retriever: String,
    pub strategy: String,
    pub max_referrals: usize,
    pub seed: u64,
    pub candidate_cutoff: Option<i32>,
    pub pool_cutoff: Option<i32>,
    /// SHA-256 prefix over every result-affecting setting.
    pub hash: String,
}

/// Per-query metric values and their means over evaluated queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: ConfigFingerprint,
    pub metrics: Vec<Metric>,
    pub evaluated_queries: usize,
    /// Queries without any relevant judgment; not part of the means.
    pub excluded_queries: usize,
    pub means: BTreeMap<String, f64>,
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
}

impl MetricReport {
    /// JSON with sorted map keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("invalid report: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.means.get(metric).copied()
    }
}

/// Scores every ranking; queries without relevant documents are counted and
/// skipped.
pub fn evaluate(
    rankings: &[Ranking],
    qrels: &Qrels,
    metrics: &[Metric],
    config: ConfigFingerprint,
) -> MetricReport {
    let per_query_values: Vec<Option<(String, BTreeMap<String, f64>)>> = rankings
        .par_iter()
        .map(|ranking| {
            if qrels.relevant_count(&ranking.query_id) == 0 {
                return None;
            }
            let values = metrics
                .iter()
                .map(|m| {
                    let v = m.compute(ranking, qrels).expect("query has relevant documents");
                    (m.to_string(), v)
                })
                .collect();
            Some((ranking.query_id.clone(), values))
        })
        .collect();

    let excluded_queries = per_query_values.iter().filter(|v| v.is_none()).count();
    let per_query: BTreeMap<String, BTreeMap<String, f64>> =
        per_query_values.into_iter().flatten().collect();

    let mut means = BTreeMap::new();
    for m in metrics {
        let name = m.to_string();
        let sum: f64 = per_query.values().map(|v| v[&name]).sum();
        let mean = if per_query.is_empty() {
            0.0
        } else {
            sum / per_query.len() as f64
        };
        means.insert(name, mean);
    }
    MetricReport {
        config,
        metrics: metrics.to_vec(),
        evaluated_queries: per_query.len(),
        excluded_queries,
        means,
        per_query,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub a: f64,
    pub b: f64,
    /// `b - a`.
    pub delta: f64,
    /// Queries where `b` scores higher.
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportComparison {
    pub queries: usize,
    pub metrics: BTreeMap<String, MetricDelta>,
}

/// Per-metric differences `b - a` with per-query win/tie/loss counts. Both
/// reports must cover the same queries and metrics.
pub fn compare_reports(a: &MetricReport, b: &MetricReport) -> Result<ReportComparison> {
    if !a.per_query.keys().eq(b.per_query.keys()) {
        let only_a = a.per_query.keys().filter(|q| !b.per_query.contains_key(*q)).count();
        let only_b = b.per_query.keys().filter(|q| !a.per_query.contains_key(*q)).count();
        return Err(Error::Mismatch(format!(
            "reports cover different queries ({only_a} only in the first, {only_b} only in the second)"
        )));
    }
    if !a.means.keys().eq(b.means.keys()) {
        return Err(Error::Mismatch("reports compute different metrics".into()));
    }
    let mut metrics = BTreeMap::new();
    for (name, &mean_a) in &a.means {
        let mean_b = b.means[name];
        let (mut wins, mut ties, mut losses) = (0, 0, 0);
        for (q, values_a) in &a.per_query {
            let va = values_a[name];
            let vb = b.per_query[q][name];
            if vb > va {
                wins += 1;
            } else if vb < va {
                losses += 1;
            } else {
                ties += 1;
            }
        }
        metrics.insert(
            name.clone(),
            MetricDelta {
                a: mean_a,
                b: mean_b,
                delta: mean_b - mean_a,
                wins,
                ties,
                losses,
            },
        );
    }
    Ok(ReportComparison {
        queries: a.per_query.len(),
        metrics,
    })
}

impl fmt::Display for ReportComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>8} {:>8} {:>9} {:>6} {:>6} {:>6}",
            "metric", "a", "b", "delta", "wins", "ties", "losses"
        )?;
        for (name, d) in &self.metrics {
            writeln!(
                f,
                "{:<12} {:>8.4} {:>8.4} {:>+9.4} {:>6} {:>6} {:>6}",
                name, d.a, d.b, d.delta, d.wins, d.ties, d.losses
            )?;
        }
        write!(f, "queries: {}", self.queries)
    }
}
