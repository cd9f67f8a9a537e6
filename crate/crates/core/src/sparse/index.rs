use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;

use super::Tokenizer;
use crate::corpus::DocId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Entry position in the index.
    pub doc: u32,
    pub tf: u32,
}

/// Term → postings over index entries, with per-entry lengths.
///
/// Entries normally correspond one-to-one with documents. A multi-view index
/// stores several consecutive entries under the same [`DocId`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(super) postings: HashMap<String, Vec<Posting>>,
    pub(super) doc_lengths: Vec<u32>,
    pub(super) avg_doc_length: f64,
    pub(super) ids: Vec<DocId>,
    pub(super) groups: Vec<Range<usize>>,
}

impl InvertedIndex {
    /// Number of entries (N in the idf formula).
    pub fn len(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_lengths.is_empty()
    }

    /// Number of distinct documents.
    pub fn document_count(&self) -> usize {
        self.groups.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, position: usize) -> u32 {
        self.doc_lengths[position]
    }

    pub fn doc_id(&self, position: usize) -> &DocId {
        &self.ids[position]
    }

    /// First entry position of `id`.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.groups
            .iter()
            .find(|g| self.ids[g.start].as_str() == id)
            .map(|g| g.start)
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn term_frequency(&self, term: &str, position: usize) -> u32 {
        self.postings(term)
            .and_then(|plist| {
                plist
                    .binary_search_by_key(&(position as u32), |p| p.doc)
                    .ok()
                    .map(|i| plist[i].tf)
            })
            .unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    /// Whether any document holds more than one entry.
    pub fn is_multiview(&self) -> bool {
        self.groups.len() != self.ids.len()
    }

    pub(super) fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    pub(super) fn from_parts(
        ids: Vec<DocId>,
        doc_lengths: Vec<u32>,
        postings: HashMap<String, Vec<Posting>>,
    ) -> Result<Self> {
        let groups = group_runs(&ids)?;
        let avg_doc_length = mean_length(&doc_lengths);
        Ok(InvertedIndex {
            postings,
            doc_lengths,
            avg_doc_length,
            ids,
            groups,
        })
    }
}

pub(super) fn mean_length(lengths: &[u32]) -> f64 {
    if lengths.is_empty() {
        return 0.0;
    }
    let total: u64 = lengths.iter().map(|&l| u64::from(l)).sum();
    total as f64 / lengths.len() as f64
}

/// Consecutive runs of equal ids. An id reappearing after a different id is
/// an error.
fn group_runs(ids: &[DocId]) -> Result<Vec<Range<usize>>> {
    let mut groups: Vec<Range<usize>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (pos, id) in ids.iter().enumerate() {
        match groups.last_mut() {
            Some(run) if ids[run.start] == *id => run.end = pos + 1,
            _ => {
                if !seen.insert(id) {
                    return Err(Error::Validation(format!("duplicate document id `{id}`")));
                }
                groups.push(pos..pos + 1);
            }
        }
    }
    Ok(groups)
}

fn index_entries(entries: Vec<(DocId, &str)>, tokenizer: &Tokenizer) -> Result<InvertedIndex> {
    if entries.len() > u32::MAX as usize {
        return Err(Error::Validation("too many index entries".into()));
    }
    let term_counts: Vec<(u32, Vec<(String, u32)>)> = entries
        .par_iter()
        .map(|(_, text)| {
            let tokens = tokenizer.tokenize(text);
            let mut counts: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *counts.entry(t.clone()).or_default() += 1;
            }
            let mut counts: Vec<(String, u32)> = counts.into_iter().collect();
            counts.sort_unstable();
            (tokens.len() as u32, counts)
        })
        .collect();

    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lengths = Vec::with_capacity(entries.len());
    for (pos, (len, counts)) in term_counts.into_iter().enumerate() {
        doc_lengths.push(len);
        for (term, tf) in counts {
            postings.entry(term).or_default().push(Posting {
                doc: pos as u32,
                tf,
            });
        }
    }
    let ids = entries.into_iter().map(|(id, _)| id).collect();
    InvertedIndex::from_parts(ids, doc_lengths, postings)
}

/// One entry per document. Duplicate ids are rejected.
pub fn build_index(texts: &[(DocId, String)], tokenizer: &Tokenizer) -> Result<InvertedIndex> {
    let mut seen = std::collections::HashSet::new();
    if let Some((id, _)) = texts.iter().find(|(id, _)| !seen.insert(id)) {
        return Err(Error::Validation(format!("duplicate document id `{id}`")));
    }
    index_entries(
        texts.iter().map(|(id, t)| (id.clone(), t.as_str())).collect(),
        tokenizer,
    )
}

/// One entry per view; each document needs at least one view.
pub fn build_multiview_index(
    docs: &[(DocId, Vec<String>)],
    tokenizer: &Tokenizer,
) -> Result<InvertedIndex> {
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::new();
    for (id, views) in docs {
        if !seen.insert(id) {
            return Err(Error::Validation(format!("duplicate document id `{id}`")));
        }
        if views.is_empty() {
            return Err(Error::Validation(format!("document `{id}` has no views")));
        }
        entries.extend(views.iter().map(|v| (id.clone(), v.as_str())));
    }
    index_entries(entries, tokenizer)
}
