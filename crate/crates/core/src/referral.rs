//! Referral extraction, the referral pool, and per-document sampling.
//!
//! A referral is the text around a link in a *source* document, with the link
//! itself replaced by a mask token, filed under the link's *target* document.
//! Two text units are supported:
//!
//! * `window`: a fixed number of whitespace tokens centered on the mask.
//! * `sentence`: the sentence(s) containing the link.
//!
//! Sentences end at `.`, `!` or `?` followed by whitespace (or end of text),
//! except after a short list of abbreviations (`et al.`, `e.g.`, `Fig.`, ...)
//! and single-letter initials.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{char_to_byte, DocId, Document, LinkKind, LinkSpan, Qrels, Query};
use crate::error::{Error, Result};
use crate::hash::{sha256_hex, sha256_u64};

pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";
pub const DEFAULT_WINDOW_TOKENS: usize = 200;
pub const DEFAULT_MAX_REFERRALS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferralUnit {
    Sentence,
    Window,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub window_tokens: usize,
    pub mask_token: String,
    pub unit: ReferralUnit,
    pub seed: u64,
    pub max_referrals: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            window_tokens: DEFAULT_WINDOW_TOKENS,
            mask_token: DEFAULT_MASK_TOKEN.to_owned(),
            unit: ReferralUnit::Window,
            seed: 0,
            max_referrals: DEFAULT_MAX_REFERRALS,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_tokens == 0 {
            return Err(Error::Config("window_tokens must be at least 1".into()));
        }
        if self.max_referrals == 0 {
            return Err(Error::Config("max_referrals must be at least 1".into()));
        }
        Ok(())
    }

    /// Hash of the fields that affect extracted text.
    pub fn fingerprint(&self) -> String {
        let text_fields = serde_json::json!({
            "window_tokens": self.window_tokens,
            "mask_token": self.mask_token,
            "unit": self.unit,
        });
        sha256_hex(text_fields.to_string().as_bytes(), 16)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Referral {
    pub target: DocId,
    pub source: DocId,
    pub text: String,
    pub kind: LinkKind,
    #[serde(default)]
    pub year: Option<i32>,
}

impl Referral {
    /// Embedding key of this referral's text: `ref:<target>:<text hash>`.
    pub fn embedding_key(&self) -> String {
        format!("ref:{}:{}", self.target, sha256_hex(self.text.as_bytes(), 16))
    }
}

/// Referrals grouped by target document.
///
/// Each group is kept in canonical `(source, text)` order with exact
/// duplicates removed, so a pool's contents do not depend on the order in
/// which referrals were discovered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReferralPool {
    groups: BTreeMap<DocId, Vec<Referral>>,
    provenance: Option<String>,
}

impl ReferralPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a pool, returning it together with the number of duplicate
    /// `(target, source, text)` referrals dropped.
    pub fn from_referrals(referrals: impl IntoIterator<Item = Referral>) -> (Self, usize) {
        let mut groups: BTreeMap<DocId, Vec<Referral>> = BTreeMap::new();
        for r in referrals {
            groups.entry(r.target.clone()).or_default().push(r);
        }
        let mut dropped = 0;
        for group in groups.values_mut() {
            group.sort_by(|a, b| {
                (&a.source, &a.text, a.kind, a.year).cmp(&(&b.source, &b.text, b.kind, b.year))
            });
            let before = group.len();
            group.dedup_by(|b, a| a.source == b.source && a.text == b.text);
            dropped += before - group.len();
        }
        groups.retain(|_, g| !g.is_empty());
        (
            ReferralPool {
                groups,
                provenance: None,
            },
            dropped,
        )
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn referrals_for(&self, doc: &str) -> &[Referral] {
        self.groups.get(doc).map_or(&[], Vec::as_slice)
    }

    pub fn targets(&self) -> impl Iterator<Item = &DocId> {
        self.groups.keys()
    }

    /// All referrals, grouped by ascending target id.
    pub fn iter(&self) -> impl Iterator<Item = &Referral> {
        self.groups.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Union of two pools, e.g. an existing pool and referrals from newly
    /// published documents.
    pub fn merge(&self, other: &ReferralPool) -> ReferralPool {
        let (pool, _) = ReferralPool::from_referrals(self.iter().chain(other.iter()).cloned());
        pool
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(BufReader::new(file), path)
    }

    pub fn read_jsonl(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut referrals = Vec::new();
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
            let r: Referral = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            if r.text.is_empty() {
                return Err(parse_err("referral text is empty".into()));
            }
            if r.target == r.source {
                return Err(parse_err(format!("referral from `{}` to itself", r.source)));
            }
            referrals.push(r);
        }
        let (pool, dropped) = ReferralPool::from_referrals(referrals);
        if dropped > 0 {
            log::warn!("{}: dropped {dropped} duplicate referral(s)", path.display());
        }
        Ok(pool)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(file).map_err(|e| Error::io(path, e))
    }

    pub fn write_jsonl(&self, out: impl Write) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        for r in self.iter() {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// Replaces characters `[start, end)` of `body` with `mask_token`.
pub fn mask_span(body: &str, span: &LinkSpan, mask_token: &str) -> Result<String> {
    let (start, end) = span_bytes(body, span)?;
    let mut out = String::with_capacity(body.len() - (end - start) + mask_token.len());
    out.push_str(&body[..start]);
    out.push_str(mask_token);
    out.push_str(&body[end..]);
    Ok(out)
}

fn span_bytes(body: &str, span: &LinkSpan) -> Result<(usize, usize)> {
    let out_of_bounds = || {
        Error::Validation(format!(
            "link span [{}, {}) to `{}` is out of bounds",
            span.start, span.end, span.target
        ))
    };
    if span.start >= span.end {
        return Err(out_of_bounds());
    }
    let start = char_to_byte(body, span.start).ok_or_else(out_of_bounds)?;
    let end = char_to_byte(body, span.end).ok_or_else(out_of_bounds)?;
    Ok((start, end))
}

/// Whitespace tokens of `text` with their character ranges.
fn tokens_with_offsets(text: &str) -> Vec<(usize, usize, &str)> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, usize)> = None; // (char start, byte start)
    let mut char_idx = 0;
    for (byte, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some((cs, bs)) = current.take() {
                tokens.push((cs, char_idx, &text[bs..byte]));
            }
        } else if current.is_none() {
            current = Some((char_idx, byte));
        }
        char_idx += 1;
    }
    if let Some((cs, bs)) = current {
        tokens.push((cs, char_idx, &text[bs..]));
    }
    tokens
}

/// Masks `span` and returns a window of `window_tokens` whitespace tokens
/// around the mask: `window_tokens / 2` tokens before it and the rest starting
/// at the mask token. Near either end of the body the window slides inward so
/// it still holds `window_tokens` tokens when the body has that many.
pub fn extract_window(
    body: &str,
    span: &LinkSpan,
    window_tokens: usize,
    mask_token: &str,
) -> Result<String> {
    let masked = mask_span(body, span, mask_token)?;
    let tokens = tokens_with_offsets(&masked);
    if tokens.is_empty() || window_tokens == 0 {
        return Ok(String::new());
    }
    let anchor = span.start;
    let center = tokens
        .iter()
        .position(|&(s, e, _)| s <= anchor && anchor < e)
        .or_else(|| tokens.iter().position(|&(s, _, _)| s >= anchor))
        .unwrap_or(tokens.len() - 1);

    let n = tokens.len();
    let lo = center.saturating_sub(window_tokens / 2);
    let hi = (lo + window_tokens).min(n);
    let lo = hi.saturating_sub(window_tokens);
    Ok(join_tokens(tokens[lo..hi].iter().map(|t| t.2)))
}

fn join_tokens<'a>(tokens: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for t in tokens {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

const ABBREVIATIONS: &[&str] = &[
    "al.", "e.g.", "i.e.", "etc.", "cf.", "vs.", "fig.", "figs.", "eq.", "eqs.", "sec.", "tab.",
    "no.", "vol.", "pp.", "ch.", "approx.", "resp.", "dr.", "mr.", "mrs.", "ms.", "prof.", "st.",
    "jr.", "sr.", "inc.", "ltd.", "co.",
];

/// Sentence boundaries of `text` as character ranges `[start, end)`, covering
/// every non-whitespace character.
pub fn sentence_bounds(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut bounds = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..chars.len() {
        let ch = chars[i];
        if start.is_none() {
            if ch.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        let terminal = matches!(ch, '.' | '!' | '?')
            && chars.get(i + 1).is_none_or(|c| c.is_whitespace())
            && !(ch == '.' && is_abbreviation(&chars, i));
        if terminal {
            bounds.push((start.take().unwrap_or(i), i + 1));
        }
    }
    if let Some(s) = start {
        let end = chars
            .iter()
            .rposition(|c| !c.is_whitespace())
            .map_or(chars.len(), |p| p + 1);
        bounds.push((s, end));
    }
    bounds
}

fn is_abbreviation(chars: &[char], dot: usize) -> bool {
    let word_start = chars[..dot]
        .iter()
        .rposition(|c| c.is_whitespace())
        .map_or(0, |p| p + 1);
    let word: String = chars[word_start..=dot]
        .iter()
        .skip_while(|c| matches!(c, '(' | '[' | '"' | '\''))
        .flat_map(|c| c.to_lowercase())
        .collect();
    if word.chars().count() == 2 && word.starts_with(|c: char| c.is_alphabetic()) {
        return true;
    }
    ABBREVIATIONS.contains(&word.as_str())
}

/// The sentence (or run of sentences) containing `span`, with the span masked
/// and whitespace collapsed to single spaces.
pub fn extract_sentence(body: &str, span: &LinkSpan, mask_token: &str) -> Result<String> {
    span_bytes(body, span)?;
    let bounds = sentence_bounds(body);
    let first = bounds
        .iter()
        .position(|&(_, e)| e > span.start)
        .unwrap_or(bounds.len().saturating_sub(1));
    let last = bounds
        .iter()
        .rposition(|&(s, _)| s < span.end)
        .unwrap_or(first)
        .max(first);
    let (lo, hi) = bounds
        .get(first)
        .zip(bounds.get(last))
        .map_or((span.start, span.end), |(a, b)| (a.0, b.1));
    let lo = lo.min(span.start);
    let hi = hi.max(span.end);

    let lo_b = char_to_byte(body, lo).expect("sentence start within body");
    let start_b = char_to_byte(body, span.start).expect("span checked");
    let end_b = char_to_byte(body, span.end).expect("span checked");
    let hi_b = char_to_byte(body, hi).expect("sentence end within body");
    let masked = format!("{}{}{}", &body[lo_b..start_b], mask_token, &body[end_b..hi_b]);
    Ok(join_tokens(masked.split_whitespace()))
}

fn referral_text(body: &str, span: &LinkSpan, config: &ExtractionConfig) -> Result<String> {
    match config.unit {
        ReferralUnit::Window => {
            extract_window(body, span, config.window_tokens, &config.mask_token)
        }
        ReferralUnit::Sentence => extract_sentence(body, span, &config.mask_token),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub documents: usize,
    pub links: usize,
    pub referrals: usize,
    pub duplicates: usize,
    pub dangling: usize,
    pub self_links: usize,
    pub empty: usize,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub pool: ReferralPool,
    pub summary: ExtractionSummary,
}

/// Extracts one referral per link whose target is among `docs`.
///
/// Links to documents outside `docs` and links from a document to itself are
/// skipped and counted.
pub fn extract_referrals<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    config: &ExtractionConfig,
) -> Result<Extraction> {
    config.validate()?;
    let docs: Vec<&Document> = docs.into_iter().collect();
    let targets: HashSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();

    let per_doc: Vec<(Vec<Referral>, ExtractionSummary)> = docs
        .par_iter()
        .map(|doc| {
            let mut found = Vec::new();
            let mut summary = ExtractionSummary {
                documents: 1,
                ..Default::default()
            };
            for span in &doc.links {
                summary.links += 1;
                if !targets.contains(span.target.as_str()) {
                    summary.dangling += 1;
                    continue;
                }
                if span.target == doc.id {
                    summary.self_links += 1;
                    continue;
                }
                let text = referral_text(&doc.body, span, config)?;
                if text.is_empty() {
                    summary.empty += 1;
                    continue;
                }
                found.push(Referral {
                    target: span.target.clone(),
                    source: doc.id.clone(),
                    text,
                    kind: span.kind,
                    year: doc.year,
                });
            }
            Ok((found, summary))
        })
        .collect::<Result<_>>()?;

    let mut summary = ExtractionSummary::default();
    let mut all = Vec::new();
    for (found, s) in per_doc {
        summary.documents += s.documents;
        summary.links += s.links;
        summary.dangling += s.dangling;
        summary.self_links += s.self_links;
        summary.empty += s.empty;
        all.extend(found);
    }
    let (pool, duplicates) = ReferralPool::from_referrals(all);
    summary.duplicates = duplicates;
    summary.referrals = pool.len();
    if summary.dangling > 0 {
        log::warn!("skipped {} link(s) to documents outside the corpus", summary.dangling);
    }
    Ok(Extraction {
        pool: pool.with_provenance(format!("extract:{}", config.fingerprint())),
        summary,
    })
}

/// Keeps referrals whose source year is at most `cutoff`. Referrals without a
/// year are dropped.
pub fn filter_pool(pool: &ReferralPool, cutoff: i32) -> ReferralPool {
    let mut missing = 0usize;
    let kept = pool.iter().filter(|r| match r.year {
        Some(y) => y <= cutoff,
        None => {
            missing += 1;
            false
        }
    });
    let (filtered, _) = ReferralPool::from_referrals(kept.cloned().collect::<Vec<_>>());
    if missing > 0 {
        log::info!("dropped {missing} referral(s) without a source year");
    }
    let provenance = match pool.provenance() {
        Some(p) => format!("{p};cutoff={cutoff}"),
        None => format!("cutoff={cutoff}"),
    };
    filtered.with_provenance(provenance)
}

/// Up to `max_referrals` referrals for `doc`. Groups that fit are returned
/// whole; larger groups are sampled uniformly without replacement using a
/// generator seeded from `seed` and the document id. The sample keeps pool
/// order.
pub fn sample_referrals<'p>(
    pool: &'p ReferralPool,
    doc: &str,
    max_referrals: usize,
    seed: u64,
) -> Vec<&'p Referral> {
    let group = pool.referrals_for(doc);
    if group.len() <= max_referrals {
        return group.iter().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ sha256_u64(doc.as_bytes()));
    let mut picked = rand::seq::index::sample(&mut rng, group.len(), max_referrals).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| &group[i]).collect()
}

/// Builds one query per link from `sources` into `candidates`: the citing
/// sentence with the link masked. Each query has the link target as its single
/// relevant document. Query ids are `<source id>#<link index>`.
pub fn citing_sentence_queries<'a>(
    sources: impl IntoIterator<Item = &'a Document>,
    candidates: &HashSet<&str>,
    mask_token: &str,
) -> Result<(Vec<Query>, Qrels)> {
    let mut queries = Vec::new();
    let mut qrels = Qrels::new();
    for doc in sources {
        for (i, span) in doc.links.iter().enumerate() {
            if span.target == doc.id || !candidates.contains(span.target.as_str()) {
                continue;
            }
            let text = extract_sentence(&doc.body, span, mask_token)?;
            if text.split_whitespace().next().is_none() {
                continue;
            }
            let id = format!("{}#{}", doc.id, i);
            qrels.insert(id.clone(), span.target.clone(), 1);
            queries.push(Query {
                id,
                text,
                year: doc.year,
            });
        }
    }
    Ok((queries, qrels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    fn span_of(body: &str, needle: &str, target: &str) -> LinkSpan {
        let byte = body.find(needle).expect("needle present");
        let start = body[..byte].chars().count();
        LinkSpan {
            start,
            end: start + needle.chars().count(),
            target: target.into(),
            kind: LinkKind::Citation,
        }
    }

    fn numbered(n: usize) -> String {
        (0..n).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn mask_span_examples() {
        let body = "see (Smith 2019) for details";
        let span = span_of(body, "(Smith 2019)", "d1");
        assert_eq!(mask_span(body, &span, "[MASK]").unwrap(), "see [MASK] for details");
        assert_eq!(mask_span(body, &span, "").unwrap(), "see  for details");

        let whole = LinkSpan {
            start: 0,
            end: body.chars().count(),
            target: "d1".into(),
            kind: LinkKind::Citation,
        };
        assert_eq!(mask_span(body, &whole, "[MASK]").unwrap(), "[MASK]");

        let bad = LinkSpan {
            start: 3,
            end: 100,
            ..whole
        };
        assert!(mask_span(body, &bad, "[MASK]").is_err());
    }

    #[test]
    fn window_centered_on_mask() {
        // 500 tokens t0..t499; the link covers t250.
        let body = numbered(500);
        let span = span_of(&body, "t250 ", "d1");
        let span = LinkSpan {
            end: span.end - 1,
            ..span
        };
        let out = extract_window(&body, &span, 200, "[MASK]").unwrap();
        let toks: Vec<&str> = out.split(' ').collect();
        assert_eq!(toks.len(), 200);
        assert_eq!(toks[0], "t150");
        assert_eq!(toks[100], "[MASK]");
        assert_eq!(toks[199], "t349");
    }

    #[test]
    fn window_truncates_at_document_bounds() {
        let body = numbered(50);
        let span = span_of(&body, "t20", "d1");
        let out = extract_window(&body, &span, 200, "[MASK]").unwrap();
        assert_eq!(out.split(' ').count(), 50);
        assert_eq!(out, mask_span(&body, &span, "[MASK]").unwrap());

        let span = span_of(&body, "t0", "d1");
        let out = extract_window(&body, &span, 10, "[MASK]").unwrap();
        let expected: Vec<String> = std::iter::once("[MASK]".to_owned())
            .chain((1..10).map(|i| format!("t{i}")))
            .collect();
        assert_eq!(out, expected.join(" "));
    }

    #[test]
    fn window_with_empty_mask_uses_next_token() {
        let body = "a b CITE c d";
        let span = span_of(body, "CITE", "d1");
        assert_eq!(extract_window(body, &span, 2, "").unwrap(), "b c");
    }

    #[test]
    fn sentences_respect_abbreviations() {
        let text = "Prior work (Smith et al. 2019) used BM25. It worked! Did it? Yes e.g. here.";
        let bounds = sentence_bounds(text);
        let sents: Vec<String> = bounds
            .iter()
            .map(|&(s, e)| text.chars().skip(s).take(e - s).collect())
            .collect();
        assert_eq!(
            sents,
            [
                "Prior work (Smith et al. 2019) used BM25.",
                "It worked!",
                "Did it?",
                "Yes e.g. here."
            ]
        );
    }

    #[test]
    fn citing_sentence_is_masked() {
        let body = "Intro text here. Referral methods (Tang 2023) help retrieval. Another one.";
        let span = span_of(body, "(Tang 2023)", "d1");
        assert_eq!(
            extract_sentence(body, &span, "[MASK]").unwrap(),
            "Referral methods [MASK] help retrieval."
        );
        // A link straddling a boundary pulls in both sentences.
        let span = span_of(body, "here. Referral", "d1");
        assert_eq!(
            extract_sentence(body, &span, "[MASK]").unwrap(),
            "Intro text [MASK] methods (Tang 2023) help retrieval."
        );
    }

    fn doc(id: &str, year: Option<i32>, body: &str, links: &[(&str, &str)]) -> Document {
        let mut d = Document::new(id, "", body);
        d.year = year;
        for (needle, target) in links {
            d.links.push(span_of(body, needle, target));
        }
        d
    }

    fn sentence_config() -> ExtractionConfig {
        ExtractionConfig {
            unit: ReferralUnit::Sentence,
            ..Default::default()
        }
    }

    #[test]
    fn extraction_single_and_dedup_and_dangling() {
        let corpus = Corpus::from_documents([
            doc("d1", Some(2017), "Target paper.", &[]),
            doc("d2", Some(2018), "We build on [1] here.", &[("[1]", "d1")]),
        ])
        .unwrap();
        let ex = extract_referrals(corpus.documents(), &sentence_config()).unwrap();
        assert_eq!(ex.pool.len(), 1);
        let r = &ex.pool.referrals_for("d1")[0];
        assert_eq!(r.text, "We build on [MASK] here.");
        assert_eq!(r.source.as_str(), "d2");
        assert_eq!(r.year, Some(2018));

        // same sentence cited twice: two spans, identical masked text
        let cite = |start| LinkSpan {
            start,
            end: start + 3,
            target: "d1".into(),
            kind: LinkKind::Citation,
        };
        let mut twice = Document::new("d2", "", "Good method [1]. Good method [1].");
        twice.links = vec![cite(12), cite(29)];
        let corpus =
            Corpus::from_documents([doc("d1", None, "Target.", &[]), twice]).unwrap();
        let ex = extract_referrals(corpus.documents(), &sentence_config()).unwrap();
        assert_eq!(ex.pool.len(), 1);
        assert_eq!(ex.summary.duplicates, 1);

        let corpus =
            Corpus::from_documents([doc("d2", None, "Cites [X] only.", &[("[X]", "dX")])])
                .unwrap();
        let ex = extract_referrals(corpus.documents(), &sentence_config()).unwrap();
        assert!(ex.pool.is_empty());
        assert_eq!(ex.summary.dangling, 1);
    }

    #[test]
    fn extraction_is_target_local() {
        let base = vec![
            doc("a", Some(2010), "Paper a.", &[]),
            doc("b", Some(2011), "Paper b cites [a] well.", &[("[a]", "a")]),
            doc("x", Some(2012), "Paper x.", &[]),
        ];
        let cfg = ExtractionConfig::default();
        let before = extract_referrals(&base, &cfg).unwrap().pool;
        let mut extended = base.clone();
        extended.push(doc("n", Some(2013), "New one cites [x] too.", &[("[x]", "x")]));
        let after = extract_referrals(&extended, &cfg).unwrap().pool;
        assert_eq!(before.referrals_for("a"), after.referrals_for("a"));
        assert_eq!(before.referrals_for("b"), after.referrals_for("b"));
        assert_eq!(after.referrals_for("x").len(), 1);
    }

    fn pool_with_years(years: &[Option<i32>]) -> ReferralPool {
        let refs = years.iter().enumerate().map(|(i, &year)| Referral {
            target: "t".into(),
            source: format!("s{i}").into(),
            text: format!("text {i}"),
            kind: LinkKind::Citation,
            year,
        });
        ReferralPool::from_referrals(refs.collect::<Vec<_>>()).0
    }

    #[test]
    fn filter_pool_by_year() {
        let pool = pool_with_years(&[Some(2019)]);
        assert!(filter_pool(&pool, 2018).is_empty());
        let pool = pool_with_years(&[Some(2018)]);
        assert_eq!(filter_pool(&pool, 2018).len(), 1);
        let pool = pool_with_years(&[Some(2017), Some(2017), Some(2017), Some(2019), Some(2019)]);
        assert_eq!(filter_pool(&pool, 2019).len(), 5);
        let pool = pool_with_years(&[None, Some(2000)]);
        assert_eq!(filter_pool(&pool, 2030).len(), 1);
    }

    #[test]
    fn sampling_cardinality_and_determinism() {
        let pool = pool_with_years(&[None; 5]);
        assert_eq!(sample_referrals(&pool, "t", 30, 1).len(), 5);
        assert!(sample_referrals(&pool, "missing", 30, 1).is_empty());

        let pool = pool_with_years(&vec![None; 100]);
        let a = sample_referrals(&pool, "t", 30, 7);
        assert_eq!(a.len(), 30);
        let distinct: HashSet<_> = a.iter().map(|r| &r.source).collect();
        assert_eq!(distinct.len(), 30);
        assert_eq!(a, sample_referrals(&pool, "t", 30, 7));
        assert_ne!(a, sample_referrals(&pool, "t", 30, 8));
    }

    #[test]
    fn sampling_is_uniform_over_subsets() {
        // 5 referrals choose 2: ten equally likely subsets.
        let pool = pool_with_years(&[None; 5]);
        let trials = 5000u64;
        let mut counts: BTreeMap<Vec<String>, u64> = BTreeMap::new();
        for seed in 0..trials {
            let key = sample_referrals(&pool, "t", 2, seed)
                .iter()
                .map(|r| r.source.to_string())
                .collect();
            *counts.entry(key).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let expected = trials as f64 / 10.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 9 degrees of freedom, p = 0.001
        assert!(chi2 < 27.88, "chi-square {chi2}");
    }

    #[test]
    fn pool_jsonl_round_trip() {
        let pool = pool_with_years(&[Some(2017), None, Some(2020)]);
        let mut buf = Vec::new();
        pool.write_jsonl(&mut buf).unwrap();
        let back = ReferralPool::read_jsonl(buf.as_slice(), Path::new("p")).unwrap();
        assert_eq!(back, pool);
        let first = String::from_utf8(buf).unwrap();
        assert!(first.starts_with(r#"{"target":"t","source":"s0","text":"text 0","kind":"citation","year":2017}"#));
    }

    #[test]
    fn citing_queries_have_single_gold() {
        let source = doc(
            "e1",
            Some(2019),
            "Old idea. We extend [c1] and [c2]. Also [zz].",
            &[("[c1]", "c1"), ("[c2]", "c2"), ("[zz]", "zz")],
        );
        let candidates: HashSet<&str> = ["c1", "c2"].into_iter().collect();
        let (queries, qrels) = citing_sentence_queries([&source], &candidates, "[MASK]").unwrap();
        assert_eq!(queries.len(), 2);
        assert_eq!(queries[0].id, "e1#0");
        assert_eq!(queries[0].text, "We extend [MASK] and [c2].");
        assert_eq!(qrels.relevant_count("e1#1"), 1);
        assert_eq!(qrels.grade("e1#1", &"c2".into()), 1);
    }
}
