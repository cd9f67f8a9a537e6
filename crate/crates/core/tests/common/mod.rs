//! Synthetic corpora, referral pools and embedding files shared by the
//! integration and acceptance tests.
#![allow(dead_code)]

use std::fs::File;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rar_core::corpus::{write_docs_jsonl, write_queries};
use rar_core::dense::{query_key, doc_key, EmbeddingSet};
use rar_core::eval::{ExperimentConfig, Retriever};
use rar_core::{Document, LinkKind, Qrels, Query, Referral, ReferralPool, Strategy};

pub const EARLY_YEAR: i32 = 2010;
pub const LATE_YEAR: i32 = 2015;

/// Documents, one query per document (its single gold), and referrals.
pub struct Synthetic {
    pub docs: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    pub referrals: Vec<Referral>,
}

pub fn doc_id(i: usize) -> String {
    format!("d{i:03}")
}

pub fn query_id(i: usize) -> String {
    format!("q{i:03}")
}

fn words(rng: &mut ChaCha8Rng, vocab: &[String], n: usize) -> String {
    (0..n)
        .map(|_| vocab.choose(rng).unwrap().as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn vocab(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|j| format!("{prefix}{j}")).collect()
}

fn referral(target: usize, source: String, text: String, year: i32) -> Referral {
    Referral {
        target: doc_id(target).into(),
        source: source.into(),
        text,
        kind: LinkKind::Citation,
        year: Some(year),
    }
}

/// `n` documents whose bodies use only `body*` words. Each document has a
/// private topic of six `topic*` words; its query is four topic words, so no
/// query shares a token with any document body.
///
/// `informative(i)` gives the year of document `i`'s topical referrals (three
/// referrals, five topic words each), or `None` for none. Every document also
/// gets two filler referrals from `EARLY_YEAR` that share no word with any
/// query.
pub fn lexical_gap_with(seed: u64, n: usize, informative: impl Fn(usize) -> Option<i32>) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body_vocab = vocab("body", 3000);
    let filler_vocab = vocab("filler", 50);
    let topic_vocab = vocab("topic", 6 * n);
    let mut topic_ids: Vec<usize> = (0..topic_vocab.len()).collect();
    topic_ids.shuffle(&mut rng);

    let mut s = Synthetic {
        docs: Vec::new(),
        queries: Vec::new(),
        qrels: Qrels::new(),
        referrals: Vec::new(),
    };
    for i in 0..n {
        let topic: Vec<String> = topic_ids[6 * i..6 * i + 6]
            .iter()
            .map(|&j| topic_vocab[j].clone())
            .collect();
        s.docs.push(Document::new(doc_id(i), "", words(&mut rng, &body_vocab, 40)).with_year(2005));
        s.queries.push(Query::new(query_id(i), words(&mut rng, &topic, 4)));
        s.qrels.insert(query_id(i), doc_id(i), 1);
        for r in 0..2 {
            let text = format!("{} [MASK]", words(&mut rng, &filler_vocab, 6));
            s.referrals.push(referral(i, format!("f{i:03}_{r}"), text, EARLY_YEAR));
        }
        if let Some(year) = informative(i) {
            for r in 0..3 {
                let text = format!(
                    "{} [MASK] {}",
                    words(&mut rng, &filler_vocab, 2),
                    words(&mut rng, &topic, 5)
                );
                s.referrals.push(referral(i, format!("s{i:03}_{r}"), text, year));
            }
        }
    }
    s
}

/// Every document gets topical referrals from `EARLY_YEAR`.
pub fn lexical_gap(seed: u64, n: usize) -> Synthetic {
    lexical_gap_with(seed, n, |_| Some(EARLY_YEAR))
}

/// Topical referrals appear only in `LATE_YEAR`, for a random 30% of the
/// documents.
pub fn temporal(seed: u64, n: usize) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e3a);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let late: std::collections::HashSet<usize> = order[..n * 3 / 10].iter().copied().collect();
    lexical_gap_with(seed, n, move |i| late.contains(&i).then_some(LATE_YEAR))
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    loop {
        // Box-Muller pairs give an isotropic direction.
        let mut v: Vec<f64> = Vec::with_capacity(dim);
        while v.len() < dim {
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(r * (std::f64::consts::TAU * u2).cos());
            v.push(r * (std::f64::consts::TAU * u2).sin());
        }
        v.truncate(dim);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.iter().map(|x| (x / norm) as f32).collect();
        }
    }
}

/// Random unit vectors for every document and referral; each query vector is
/// one of its gold document's referral vectors (the document vector when it
/// has none) plus noise of norm `noise`.
pub fn dense_synthetic(seed: u64, n: usize, refs_per_doc: usize, dim: usize, noise: f32) -> (Synthetic, EmbeddingSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Synthetic {
        docs: Vec::new(),
        queries: Vec::new(),
        qrels: Qrels::new(),
        referrals: Vec::new(),
    };
    let mut emb = EmbeddingSet::new(dim, "synthetic").unwrap();
    for i in 0..n {
        let doc = Document::new(doc_id(i), "", format!("document {i}"));
        let doc_vector = random_unit(&mut rng, dim);
        emb.insert(doc_key(&doc.id), doc_vector.clone()).unwrap();
        s.docs.push(doc);
        let mut ref_vectors = Vec::new();
        for r in 0..refs_per_doc {
            let referral = referral(i, format!("s{i:03}_{r}"), format!("referral {r} to document {i}"), EARLY_YEAR);
            let v = random_unit(&mut rng, dim);
            emb.insert(referral.embedding_key(), v.clone()).unwrap();
            ref_vectors.push(v);
            s.referrals.push(referral);
        }
        let base = ref_vectors.choose(&mut rng).unwrap_or(&doc_vector);
        let jitter = random_unit(&mut rng, dim);
        let q: Vec<f32> = base.iter().zip(&jitter).map(|(b, j)| b + noise * j).collect();
        emb.insert(query_key(&query_id(i)), q).unwrap();
        s.queries.push(Query::new(query_id(i), format!("query {i}")));
        s.qrels.insert(query_id(i), doc_id(i), 1);
    }
    (s, emb)
}

/// Writes the inputs to `dir` and returns a config that reads them.
pub fn write_inputs(dir: &Path, s: &Synthetic, embeddings: Option<&EmbeddingSet>) -> ExperimentConfig {
    write_docs_jsonl(&s.docs, File::create(dir.join("docs.jsonl")).unwrap()).unwrap();
    write_queries(&s.queries, File::create(dir.join("queries.jsonl")).unwrap()).unwrap();
    s.qrels.write(File::create(dir.join("qrels.tsv")).unwrap()).unwrap();
    let (pool, _) = ReferralPool::from_referrals(s.referrals.clone());
    pool.save(dir.join("referrals.jsonl")).unwrap();
    let mut config = ExperimentConfig {
        corpus: dir.join("docs.jsonl"),
        queries: Some(dir.join("queries.jsonl")),
        qrels: Some(dir.join("qrels.tsv")),
        referrals: Some(dir.join("referrals.jsonl")),
        ..ExperimentConfig::default()
    };
    if let Some(emb) = embeddings {
        emb.save(dir.join("embeddings.bin")).unwrap();
        config.embeddings = Some(dir.join("embeddings.bin"));
        config.retriever = Retriever::Dense;
    }
    config
}

pub fn with_strategy(config: &ExperimentConfig, strategy: Strategy) -> ExperimentConfig {
    ExperimentConfig {
        strategy,
        ..config.clone()
    }
}
