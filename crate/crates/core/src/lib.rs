//! Referral-augmented retrieval.
//!
//! A *referral* is a passage from another document that cites or hyperlinks a
//! target document. Referrals give alternative views of the target and can be
//! folded into its index entry without any model training:
//!
//! * [`sparse`]: BM25 over the document text concatenated with its referrals,
//!   or max-over-views scoring.
//! * [`dense`]: exact inner-product search over document embeddings, the
//!   mean of document and referral embeddings, or max-over-views.
//!
//! [`corpus`] loads documents, queries and judgments, [`referral`] extracts and
//! samples referrals from annotated link spans, and [`eval`] scores rankings
//! and runs complete experiments.

pub mod corpus;
pub mod dense;
mod error;
pub mod eval;
mod hash;
pub mod referral;
pub mod sparse;
mod strategy;
mod topk;

pub use corpus::{Corpus, DocId, Document, LinkKind, LinkSpan, Qrels, Query};
pub use error::{Error, Result};
pub use referral::{ExtractionConfig, Referral, ReferralPool};
pub use strategy::Strategy;
