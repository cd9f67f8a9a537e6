use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dot product accumulated in `f64`, in component order.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// `(doc + sum(referrals)) / (referrals + 1)`, componentwise.
pub fn aggregate_mean(doc: &[f32], referrals: &[&[f32]]) -> Result<Vec<f32>> {
    let mut sum: Vec<f64> = doc.iter().map(|&x| f64::from(x)).collect();
    for (i, r) in referrals.iter().enumerate() {
        if r.len() != doc.len() {
            return Err(Error::DimensionMismatch {
                key: format!("referral #{i}"),
                expected: doc.len(),
                found: r.len(),
            });
        }
        for (s, &x) in sum.iter_mut().zip(r.iter()) {
            *s += f64::from(x);
        }
    }
    let count = (referrals.len() + 1) as f64;
    Ok(sum.into_iter().map(|s| (s / count) as f32).collect())
}

/// How per-view similarities reduce to one document score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewReduction {
    /// Best (largest) similarity over views.
    #[default]
    Max,
    /// Smallest similarity over views. Kept only to compare against max.
    LiteralMin,
}

/// Reduces the similarities of `query` to each view; returns the score and
/// the index of the selected view (lowest index on ties).
pub fn score_views<V: AsRef<[f32]>>(
    query: &[f32],
    views: &[V],
    reduction: ViewReduction,
) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, view) in views.iter().enumerate() {
        let view = view.as_ref();
        if view.len() != query.len() {
            return Err(Error::DimensionMismatch {
                key: format!("view #{i}"),
                expected: query.len(),
                found: view.len(),
            });
        }
        let s = dot(query, view);
        let better = match (best, reduction) {
            (None, _) => true,
            (Some((b, _)), ViewReduction::Max) => s > b,
            (Some((b, _)), ViewReduction::LiteralMin) => s < b,
        };
        if better {
            best = Some((s, i));
        }
    }
    best.ok_or_else(|| Error::Validation("cannot score an empty view list".into()))
}

/// Max-over-views similarity: a document matches as well as its best view.
pub fn score_shortest_path<V: AsRef<[f32]>>(query: &[f32], views: &[V]) -> Result<(f64, usize)> {
    score_views(query, views, ViewReduction::Max)
}
