//! Dense retrieval over externally produced embeddings.
//!
//! Vectors come from an embedding file (see [`EmbeddingSet`]) whose keys name
//! the text units they encode:
//!
//! | key | text |
//! | --- | ---- |
//! | `doc:<doc id>` | title and body of a document |
//! | `cat:<doc id>` | document text concatenated with its sampled referrals |
//! | `ref:<target id>:<hash>` | one referral (hash = first 16 hex digits of SHA-256 of its text) |
//! | `qry:<query id>` | a query |
//!
//! [`EmbeddingManifest`] lists the keys and texts an experiment needs so an
//! external encoder can produce the file. Similarity is the raw dot product.

mod aggregate;
mod embeddings;
mod index;
mod manifest;

pub use aggregate::{aggregate_mean, dot, score_shortest_path, score_views, ViewReduction};
pub use embeddings::EmbeddingSet;
pub use index::{build_dense_index, search_dense, DenseIndex, ViewScore};
pub use manifest::{
    cat_key, doc_key, embedding_manifest, query_key, EmbeddingManifest, ManifestEntry,
};
