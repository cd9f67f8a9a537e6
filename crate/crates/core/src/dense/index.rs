//! Brute-force dense index and its file format.
//!
//! ```text
//! magic      8 bytes  "RARDIDX1"
//! strategy   u8       0 doc_only, 1 concat, 2 mean, 3 shortest_path
//! dim        u32
//! docs       u64
//! docs x { id_len u16, id, views u32, views x { key_len u16, key, dim x f32 } }
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::aggregate::{aggregate_mean, dot, score_views, ViewReduction};
use super::embeddings::EmbeddingSet;
use super::manifest::{cat_key, doc_key};
use crate::corpus::DocId;
use crate::error::{Error, Result};
use crate::referral::{sample_referrals, ReferralPool};
use crate::strategy::Strategy;
use crate::topk::top_k_by;

pub const MAGIC: &[u8; 8] = b"RARDIDX1";

/// One or more vectors ("views") per document.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    strategy: Strategy,
    dim: usize,
    ids: Vec<DocId>,
    /// `view_offsets[i]..view_offsets[i + 1]` are the views of document `i`.
    view_offsets: Vec<usize>,
    view_keys: Vec<String>,
    vectors: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewScore {
    pub doc: DocId,
    pub score: f64,
    /// Selected view for multi-view (shortest-path) indices.
    pub best_view: Option<usize>,
}

impl DenseIndex {
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn doc_id(&self, doc: usize) -> &DocId {
        &self.ids[doc]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|d| d.as_str() == id)
    }

    pub fn view_count(&self, doc: usize) -> usize {
        self.view_offsets[doc + 1] - self.view_offsets[doc]
    }

    /// Vectors of document `doc`, in view order.
    pub fn views(&self, doc: usize) -> impl ExactSizeIterator<Item = &[f32]> {
        let range = self.view_offsets[doc]..self.view_offsets[doc + 1];
        range.map(move |v| &self.vectors[v * self.dim..(v + 1) * self.dim])
    }

    /// Embedding key each view was built from (`mean:<id>` for means).
    pub fn view_key(&self, doc: usize, view: usize) -> &str {
        &self.view_keys[self.view_offsets[doc] + view]
    }

    fn push_doc(&mut self, id: DocId, views: Vec<(String, &[f32])>) {
        self.ids.push(id);
        for (key, v) in views {
            self.view_keys.push(key);
            self.vectors.extend_from_slice(v);
        }
        self.view_offsets.push(self.view_keys.len());
    }

    /// Score of document `doc` under this index's strategy.
    pub fn score(&self, query: &[f32], doc: usize, reduction: ViewReduction) -> (f64, Option<usize>) {
        if self.strategy == Strategy::ShortestPath {
            let views: Vec<&[f32]> = self.views(doc).collect();
            let (s, v) = score_views(query, &views, reduction).expect("dims and views checked");
            (s, Some(v))
        } else {
            let v = self.views(doc).next().expect("one view per document");
            (dot(query, v), None)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out)
            .and_then(|()| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        let tag: u8 = match self.strategy {
            Strategy::DocOnly => 0,
            Strategy::Concat => 1,
            Strategy::Mean => 2,
            Strategy::ShortestPath => 3,
        };
        out.write_all(&[tag])?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        for (doc, id) in self.ids.iter().enumerate() {
            write_str16(out, id.as_str())?;
            out.write_all(&(self.view_count(doc) as u32).to_le_bytes())?;
            for (view, v) in self.views(doc).enumerate() {
                write_str16(out, self.view_key(doc, view))?;
                for x in v {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file), path)
    }

    pub fn read_from(input: &mut impl Read, path: &Path) -> Result<Self> {
        let mut read = |buf: &mut [u8]| -> Result<()> {
            input.read_exact(buf).map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => Error::format(path, "truncated dense index"),
                _ => Error::io(path, e),
            })
        };
        let mut magic = [0u8; 8];
        read(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format(path, "not a dense index file (bad magic)"));
        }
        let mut tag = [0u8; 1];
        read(&mut tag)?;
        let strategy = match tag[0] {
            0 => Strategy::DocOnly,
            1 => Strategy::Concat,
            2 => Strategy::Mean,
            3 => Strategy::ShortestPath,
            t => return Err(Error::format(path, format!("unknown strategy tag {t}"))),
        };
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let mut b2 = [0u8; 2];
        read(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        if dim == 0 {
            return Err(Error::format(path, "dimension is zero"));
        }
        read(&mut b8)?;
        let docs = u64::from_le_bytes(b8) as usize;

        let mut index = DenseIndex::empty(strategy, dim);
        let mut seen = HashSet::new();
        let mut read_string = |read: &mut dyn FnMut(&mut [u8]) -> Result<()>| -> Result<String> {
            read(&mut b2)?;
            let mut buf = vec![0u8; u16::from_le_bytes(b2) as usize];
            read(&mut buf)?;
            String::from_utf8(buf).map_err(|_| Error::format(path, "string is not UTF-8"))
        };
        for _ in 0..docs {
            let id = DocId::from(read_string(&mut read)?);
            if !seen.insert(id.clone()) {
                return Err(Error::format(path, format!("duplicate document id `{id}`")));
            }
            read(&mut b4)?;
            let views = u32::from_le_bytes(b4) as usize;
            let single = strategy != Strategy::ShortestPath;
            if views == 0 || (single && views != 1) {
                return Err(Error::format(
                    path,
                    format!("document `{id}` has {views} views under {strategy}"),
                ));
            }
            index.ids.push(id);
            for _ in 0..views {
                let key = read_string(&mut read)?;
                let mut raw = vec![0u8; dim * 4];
                read(&mut raw)?;
                let start = index.vectors.len();
                index.vectors.extend(
                    raw.chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
                );
                if index.vectors[start..].iter().any(|x| !x.is_finite()) {
                    return Err(Error::format(path, format!("non-finite component in `{key}`")));
                }
                index.view_keys.push(key);
            }
            index.view_offsets.push(index.view_keys.len());
        }
        let mut probe = [0u8; 1];
        if input.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::format(path, "trailing bytes after dense index"));
        }
        Ok(index)
    }

    fn empty(strategy: Strategy, dim: usize) -> Self {
        DenseIndex {
            strategy,
            dim,
            ids: Vec::new(),
            view_offsets: vec![0],
            view_keys: Vec::new(),
            vectors: Vec::new(),
        }
    }
}

fn write_str16(out: &mut impl Write, s: &str) -> std::io::Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "string too long"))?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(s.as_bytes())
}

/// Builds a dense index for `docs` from precomputed embeddings.
///
/// * `doc_only`: `doc:<id>`; the pool is ignored.
/// * `concat`: `cat:<id>` (the encoded concatenation of document and sampled
///   referrals).
/// * `mean`: mean of `doc:<id>` and the sampled referral vectors.
/// * `shortest_path`: views `doc:<id>` followed by each sampled referral.
///
/// Referrals are sampled with [`sample_referrals`]. Every missing key is
/// reported in one error.
pub fn build_dense_index(
    embeddings: &EmbeddingSet,
    docs: &[DocId],
    pool: &ReferralPool,
    strategy: Strategy,
    max_referrals: usize,
    seed: u64,
) -> Result<DenseIndex> {
    let mut seen = HashSet::new();
    if let Some(dup) = docs.iter().find(|d| !seen.insert(*d)) {
        return Err(Error::Validation(format!("duplicate document id `{dup}`")));
    }
    let mut missing = BTreeSet::new();
    let mut lookup = |key: String| -> Option<(String, &[f32])> {
        match embeddings.get(&key) {
            Some(v) => Some((key, v)),
            None => {
                missing.insert(key);
                None
            }
        }
    };

    type Views<'e> = Vec<(String, &'e [f32])>;
    let mut plan: Vec<(DocId, Views)> = Vec::with_capacity(docs.len());
    for id in docs {
        let mut keys = vec![match strategy {
            Strategy::Concat => cat_key(id),
            _ => doc_key(id),
        }];
        if matches!(strategy, Strategy::Mean | Strategy::ShortestPath) {
            keys.extend(
                sample_referrals(pool, id.as_str(), max_referrals, seed)
                    .into_iter()
                    .map(|r| r.embedding_key()),
            );
        }
        let views: Vec<_> = keys.into_iter().filter_map(&mut lookup).collect();
        plan.push((id.clone(), views));
    }
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings(missing.into_iter().collect()));
    }

    let mut index = DenseIndex::empty(strategy, embeddings.dim());
    for (id, views) in plan {
        if strategy == Strategy::Mean {
            let refs: Vec<&[f32]> = views[1..].iter().map(|(_, v)| *v).collect();
            let mean = aggregate_mean(views[0].1, &refs)?;
            let key = format!("mean:{id}");
            index.push_doc(id, vec![(key, mean.as_slice())]);
        } else {
            index.push_doc(id, views);
        }
    }
    Ok(index)
}

/// Exact top-`k` search: nonincreasing score, ties by ascending document id.
pub fn search_dense(
    index: &DenseIndex,
    query: &[f32],
    k: usize,
    reduction: ViewReduction,
) -> Result<Vec<ViewScore>> {
    if query.len() != index.dim() {
        return Err(Error::DimensionMismatch {
            key: "query".into(),
            expected: index.dim(),
            found: query.len(),
        });
    }
    let scored: Vec<ViewScore> = (0..index.len())
        .into_par_iter()
        .map(|doc| {
            let (score, best_view) = index.score(query, doc, reduction);
            ViewScore {
                doc: index.doc_id(doc).clone(),
                score,
                best_view,
            }
        })
        .collect();
    Ok(top_k_by(scored, k, |a, b| {
        b.score.total_cmp(&a.score).then_with(|| a.doc.cmp(&b.doc))
    }))
}
