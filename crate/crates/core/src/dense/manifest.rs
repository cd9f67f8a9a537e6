use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{index_text, DocId, Document, Query};
use crate::error::{Error, Result};
use crate::referral::{sample_referrals, ReferralPool};
use crate::sparse::augment_concat;
use crate::strategy::Strategy;

pub fn doc_key(id: &DocId) -> String {
    format!("doc:{id}")
}

pub fn cat_key(id: &DocId) -> String {
    format!("cat:{id}")
}

pub fn query_key(query_id: &str) -> String {
    format!("qry:{query_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub key: String,
    pub text: String,
}

/// The text units an external encoder must embed for one configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub strategy: Strategy,
    pub max_referrals: usize,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl EmbeddingManifest {
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(std::io::Error::from)
            .and_then(|()| out.write_all(b"\n"))
            .and_then(|()| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Lists every key needed to build a dense index for `docs` under `strategy`
/// and to embed `queries`. Documents come first (in the given order), then
/// referrals, then queries; repeated keys appear once.
///
/// `cat:` texts use the same referral sample as index building.
pub fn embedding_manifest(
    docs: &[&Document],
    pool: &ReferralPool,
    queries: &[Query],
    strategy: Strategy,
    max_referrals: usize,
    seed: u64,
) -> Result<EmbeddingManifest> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |key: String, text: String| -> Result<()> {
        if text.split_whitespace().next().is_none() {
            return Err(Error::Validation(format!("text for `{key}` is empty")));
        }
        if seen.insert(key.clone()) {
            entries.push(ManifestEntry { key, text });
        }
        Ok(())
    };

    for doc in docs {
        let text = index_text(doc);
        match strategy {
            Strategy::Concat => {
                let sample = sample_referrals(pool, doc.id.as_str(), max_referrals, seed);
                let cat = augment_concat(&text, sample.iter().map(|r| r.text.as_str()), " ");
                push(cat_key(&doc.id), cat)?;
            }
            _ => push(doc_key(&doc.id), text)?,
        }
    }
    if matches!(strategy, Strategy::Mean | Strategy::ShortestPath) {
        for doc in docs {
            for r in sample_referrals(pool, doc.id.as_str(), max_referrals, seed) {
                push(r.embedding_key(), r.text.clone())?;
            }
        }
    }
    for q in queries {
        push(query_key(&q.id), q.text.clone())?;
    }
    Ok(EmbeddingManifest {
        strategy,
        max_referrals,
        seed,
        entries,
    })
}
