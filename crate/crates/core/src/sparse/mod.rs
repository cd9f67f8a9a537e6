//! Sparse retrieval: tokenization, an inverted index, BM25 scoring, and
//! referral augmentation by text concatenation.
//!
//! An index may hold several entries ("views") for one document, stored at
//! consecutive positions. A document then scores as its best view, which is
//! how max-over-views aggregation is served from the same index type.

mod bm25;
mod format;
mod index;
mod tokenizer;

pub use bm25::{bm25_score, idf, search_sparse, Bm25Params, SparseHit};
pub use index::{build_index, build_multiview_index, InvertedIndex, Posting};
pub use tokenizer::Tokenizer;

use crate::corpus::{index_text, DocId, Document};
use crate::error::{Error, Result};
use crate::referral::{sample_referrals, ReferralPool};
use crate::strategy::Strategy;

/// Appends referral texts to a document text: `[doc, r1, ..., rn]` joined by
/// `separator`.
pub fn augment_concat<'a>(
    doc_text: &str,
    referral_texts: impl IntoIterator<Item = &'a str>,
    separator: &str,
) -> String {
    let mut out = doc_text.to_owned();
    for text in referral_texts {
        out.push_str(separator);
        out.push_str(text);
    }
    out
}

/// The texts indexed for `doc` under `strategy`: one text for `doc_only` and
/// `concat`, the document followed by each sampled referral for
/// `shortest_path`. In `concat` the document text is repeated `doc_repeat`
/// times before the referrals.
pub fn strategy_views(
    doc: &Document,
    pool: &ReferralPool,
    strategy: Strategy,
    max_referrals: usize,
    seed: u64,
    doc_repeat: usize,
) -> Result<Vec<String>> {
    let text = index_text(doc);
    let sample = || sample_referrals(pool, doc.id.as_str(), max_referrals, seed);
    match strategy {
        Strategy::DocOnly => Ok(vec![text]),
        Strategy::Concat => {
            let repeated = vec![text.as_str(); doc_repeat.max(1)].join(" ");
            Ok(vec![augment_concat(&repeated, sample().iter().map(|r| r.text.as_str()), " ")])
        }
        Strategy::ShortestPath => {
            let mut views = vec![text];
            views.extend(sample().into_iter().map(|r| r.text.clone()));
            Ok(views)
        }
        Strategy::Mean => Err(Error::Config(
            "the mean strategy averages embeddings and needs the dense retriever".into(),
        )),
    }
}

/// Builds the sparse index for `docs` under `strategy`.
pub fn build_strategy_index(
    docs: &[&Document],
    pool: &ReferralPool,
    strategy: Strategy,
    max_referrals: usize,
    seed: u64,
    doc_repeat: usize,
    tokenizer: &Tokenizer,
) -> Result<InvertedIndex> {
    let views: Vec<(DocId, Vec<String>)> = docs
        .iter()
        .map(|d| Ok((d.id.clone(), strategy_views(d, pool, strategy, max_referrals, seed, doc_repeat)?)))
        .collect::<Result<_>>()?;
    if strategy == Strategy::ShortestPath {
        build_multiview_index(&views, tokenizer)
    } else {
        let texts: Vec<(DocId, String)> = views
            .into_iter()
            .map(|(id, mut v)| (id, v.swap_remove(0)))
            .collect();
        build_index(&texts, tokenizer)
    }
}
