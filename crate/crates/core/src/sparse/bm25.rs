use serde::{Deserialize, Serialize};

use super::{InvertedIndex, Tokenizer};
use crate::corpus::DocId;
use crate::error::{Error, Result};
use crate::topk::top_k_by;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("BM25 k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("BM25 b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// `ln((N - df + 0.5) / (df + 0.5) + 1)`; never negative.
pub fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

#[inline]
fn term_weight(idf: f64, tf: u32, len: u32, avg_len: f64, params: Bm25Params) -> f64 {
    let tf = f64::from(tf);
    let norm = params.k1 * (1.0 - params.b + params.b * f64::from(len) / avg_len);
    idf * (tf * (params.k1 + 1.0)) / (tf + norm)
}

/// BM25 score of the entry at `position`. Each occurrence of a term in
/// `query_tokens` contributes once.
pub fn bm25_score(
    index: &InvertedIndex,
    params: Bm25Params,
    query_tokens: &[String],
    position: usize,
) -> f64 {
    let len = index.doc_length(position);
    let mut score = 0.0;
    for term in query_tokens {
        let tf = index.term_frequency(term, position);
        if tf > 0 {
            let w = idf(index.len(), index.document_frequency(term));
            score += term_weight(w, tf, len, index.avg_doc_length(), params);
        }
    }
    score
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseHit {
    pub doc: DocId,
    pub score: f64,
    /// Index of the best-scoring view within the document (0 for single-view
    /// indices; ties go to the lowest index).
    pub best_view: usize,
}

/// Top `k` documents for `query`, by nonincreasing score with ties broken by
/// ascending document id. Zero-score documents only fill the list when fewer
/// than `k` documents match.
pub fn search_sparse(
    index: &InvertedIndex,
    params: Bm25Params,
    tokenizer: &Tokenizer,
    query: &str,
    k: usize,
) -> Vec<SparseHit> {
    let tokens = tokenizer.tokenize(query);
    if tokens.is_empty() {
        log::warn!("query `{query}` has no tokens");
        return Vec::new();
    }
    if k == 0 || index.is_empty() {
        return Vec::new();
    }

    let mut scores = vec![0.0f64; index.len()];
    let avg_len = index.avg_doc_length();
    for term in &tokens {
        let Some(plist) = index.postings(term) else {
            continue;
        };
        let w = idf(index.len(), plist.len());
        for p in plist {
            let pos = p.doc as usize;
            scores[pos] += term_weight(w, p.tf, index.doc_length(pos), avg_len, params);
        }
    }

    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for group in index.groups() {
        let (offset, best) = scores[group.clone()]
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bs), (i, &s)| if s > bs { (i, s) } else { (bi, bs) });
        let hit = SparseHit {
            doc: index.doc_id(group.start).clone(),
            score: best,
            best_view: offset,
        };
        if best > 0.0 {
            matched.push(hit);
        } else {
            unmatched.push(hit);
        }
    }

    let order = |a: &SparseHit, b: &SparseHit| {
        b.score.total_cmp(&a.score).then_with(|| a.doc.cmp(&b.doc))
    };
    let mut hits = top_k_by(matched, k, order);
    if hits.len() < k {
        hits.extend(top_k_by(unmatched, k - hits.len(), order));
    }
    hits
}
