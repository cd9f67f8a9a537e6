//! Data model and line-delimited loaders for documents, queries and
//! relevance judgments.
//!
//! Documents arrive as `docs-jsonl`, one object per line:
//!
//! ```text
//! {"id": "d1", "title": "...", "body": "...", "year": 2018,
//!  "links": [{"start": 4, "end": 16, "target": "d0", "kind": "citation"}]}
//! ```
//!
//! Link offsets count Unicode scalar values, not bytes. Link targets that are
//! not part of the loaded corpus are kept; extraction skips them.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(String);

impl DocId {
    pub fn new(id: impl Into<String>) -> Self {
        DocId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(s: &str) -> Self {
        DocId(s.to_owned())
    }
}

impl From<String> for DocId {
    fn from(s: String) -> Self {
        DocId(s)
    }
}

impl std::borrow::Borrow<str> for DocId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Citation,
    Hyperlink,
}

impl LinkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Citation => "citation",
            LinkKind::Hyperlink => "hyperlink",
        }
    }
}

/// An outgoing citation or hyperlink, `[start, end)` in characters of the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpan {
    pub start: usize,
    pub end: usize,
    pub target: DocId,
    pub kind: LinkKind,
}

impl LinkSpan {
    /// Checks `0 <= start < end <= body_chars`.
    pub fn check_bounds(&self, body_chars: usize) -> Result<()> {
        if self.start < self.end && self.end <= body_chars {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "link span [{}, {}) to `{}` is out of bounds for a body of {} characters",
                self.start, self.end, self.target, body_chars
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    #[serde(default)]
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub links: Vec<LinkSpan>,
}

impl Document {
    pub fn new(id: impl Into<DocId>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            title: title.into(),
            body: body.into(),
            year: None,
            links: Vec::new(),
        }
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = Some(year);
        self
    }

    pub fn with_link(mut self, link: LinkSpan) -> Self {
        self.links.push(link);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.id.as_str().is_empty() {
            return Err(Error::Validation("document id is empty".into()));
        }
        let body_chars = self.body.chars().count();
        for link in &self.links {
            link.check_bounds(body_chars).map_err(|e| {
                Error::Validation(format!("document `{}`: {e}", self.id))
            })?;
        }
        Ok(())
    }
}

/// The text a document is indexed under: title and body joined by one space,
/// or the body alone when the title is empty.
pub fn index_text(doc: &Document) -> String {
    if doc.title.is_empty() {
        doc.body.clone()
    } else {
        let mut text = String::with_capacity(doc.title.len() + 1 + doc.body.len());
        text.push_str(&doc.title);
        text.push(' ');
        text.push_str(&doc.body);
        text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub year: Option<i32>,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Query {
            id: id.into(),
            text: text.into(),
            year: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("query id is empty".into()));
        }
        if self.text.split_whitespace().next().is_none() {
            return Err(Error::Validation(format!(
                "query `{}` has empty text",
                self.id
            )));
        }
        Ok(())
    }
}

/// Relevance grades keyed by query id, then document id. Grade 0 means judged
/// non-relevant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<DocId, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, doc: impl Into<DocId>, grade: u32) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc.into(), grade);
    }

    pub fn grades(&self, query_id: &str) -> Option<&BTreeMap<DocId, u32>> {
        self.judgments.get(query_id)
    }

    pub fn grade(&self, query_id: &str, doc: &DocId) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|g| g.get(doc))
            .copied()
            .unwrap_or(0)
    }

    /// Number of documents with a positive grade for the query.
    pub fn relevant_count(&self, query_id: &str) -> usize {
        self.judgments
            .get(query_id)
            .map_or(0, |g| g.values().filter(|&&grade| grade > 0).count())
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DocId, u32)> {
        self.judgments
            .iter()
            .flat_map(|(q, docs)| docs.iter().map(move |(d, &g)| (q.as_str(), d, g)))
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), path)
    }

    /// Parses `query_id<TAB>doc_id<TAB>grade` lines. A first line whose grade
    /// column is not an integer is treated as a header and skipped.
    pub fn read(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message,
            };
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let grade = match fields[2].trim().parse::<u32>() {
                Ok(g) => g,
                Err(_) if line_no == 1 => continue,
                Err(_) => {
                    return Err(parse_err(format!(
                        "grade `{}` is not a non-negative integer",
                        fields[2]
                    )))
                }
            };
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(parse_err("empty query or document id".into()));
            }
            qrels.insert(fields[0], fields[1], grade);
        }
        Ok(qrels)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for (q, d, g) in self.iter() {
            writeln!(out, "{q}\t{d}\t{g}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: IndexMap<DocId, Document>,
    queries: Vec<Query>,
    qrels: Qrels,
}

impl Corpus {
    /// Builds a corpus from documents, validating ids and link spans.
    pub fn from_documents(docs: impl IntoIterator<Item = Document>) -> Result<Self> {
        let mut documents = IndexMap::new();
        for doc in docs {
            doc.validate()?;
            if documents.contains_key(&doc.id) {
                return Err(Error::Validation(format!("duplicate document id `{}`", doc.id)));
            }
            documents.insert(doc.id.clone(), doc);
        }
        Ok(Corpus {
            documents,
            queries: Vec::new(),
            qrels: Qrels::new(),
        })
    }

    /// Loads a `docs-jsonl` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let corpus = Self::read_jsonl(BufReader::new(file), path)?;
        let dangling = corpus.dangling_links();
        if dangling > 0 {
            log::warn!(
                "{}: {dangling} link(s) point outside the corpus",
                path.display()
            );
        }
        Ok(corpus)
    }

    /// Parses `docs-jsonl` from a reader; `path` is only used in error messages.
    pub fn read_jsonl(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut documents: IndexMap<DocId, Document> = IndexMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message,
            };
            let doc: Document =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            doc.validate().map_err(|e| parse_err(e.to_string()))?;
            if documents.contains_key(&doc.id) {
                return Err(parse_err(format!("duplicate document id `{}`", doc.id)));
            }
            documents.insert(doc.id.clone(), doc);
        }
        Ok(Corpus {
            documents,
            queries: Vec::new(),
            qrels: Qrels::new(),
        })
    }

    pub fn write_jsonl(&self, out: impl Write) -> std::io::Result<()> {
        write_docs_jsonl(self.documents.values(), out)
    }

    /// Attaches queries and judgments. Judgments for unknown queries are an
    /// error; judgments for unknown documents are tolerated and returned as a
    /// count.
    pub fn attach_queries(&mut self, queries: Vec<Query>, qrels: Qrels) -> Result<usize> {
        let mut ids = HashSet::new();
        for q in &queries {
            q.validate()?;
            if !ids.insert(q.id.as_str()) {
                return Err(Error::Validation(format!("duplicate query id `{}`", q.id)));
            }
        }
        if let Some(unknown) = qrels.query_ids().find(|q| !ids.contains(q)) {
            return Err(Error::Validation(format!(
                "qrels reference unknown query `{unknown}`"
            )));
        }
        let unknown_docs = qrels
            .iter()
            .filter(|(_, d, _)| !self.documents.contains_key(*d))
            .count();
        if unknown_docs > 0 {
            log::warn!("{unknown_docs} judgment(s) reference documents outside the corpus");
        }
        self.queries = queries;
        self.qrels = qrels;
        Ok(unknown_docs)
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.documents.contains_key(id)
    }

    pub fn documents(&self) -> impl ExactSizeIterator<Item = &Document> {
        self.documents.values()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn qrels(&self) -> &Qrels {
        &self.qrels
    }

    /// Number of link spans whose target is not a document of this corpus.
    pub fn dangling_links(&self) -> usize {
        self.documents
            .values()
            .flat_map(|d| &d.links)
            .filter(|l| !self.documents.contains_key(&l.target))
            .count()
    }
}

pub fn write_docs_jsonl<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    out: impl Write,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_queries(BufReader::new(file), path)
}

pub fn read_queries(reader: impl BufRead, path: &Path) -> Result<Vec<Query>> {
    let mut queries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let query: Query = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        query.validate().map_err(|e| parse_err(e.to_string()))?;
        queries.push(query);
    }
    Ok(queries)
}

pub fn write_queries<'a>(
    queries: impl IntoIterator<Item = &'a Query>,
    out: impl Write,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for q in queries {
        serde_json::to_writer(&mut out, q)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Partitions documents into candidates (`year <= cutoff`, or no year) and
/// evaluation documents (`year > cutoff`), preserving corpus order.
pub fn split_by_year(corpus: &Corpus, cutoff: i32) -> (Vec<&Document>, Vec<&Document>) {
    let mut candidates = Vec::new();
    let mut evaluation = Vec::new();
    let mut missing = 0usize;
    for doc in corpus.documents() {
        match doc.year {
            Some(y) if y > cutoff => evaluation.push(doc),
            Some(_) => candidates.push(doc),
            None => {
                missing += 1;
                candidates.push(doc);
            }
        }
    }
    if missing > 0 {
        log::info!("{missing} document(s) without a year placed in the candidate set");
    }
    (candidates, evaluation)
}

/// Converts a character offset into a byte offset of `s`. Offsets equal to
/// the character length map to `s.len()`.
pub(crate) fn char_to_byte(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (byte, _) in s.char_indices() {
        if count == char_idx {
            return Some(byte);
        }
        count += 1;
    }
    (count == char_idx).then_some(s.len())
}
