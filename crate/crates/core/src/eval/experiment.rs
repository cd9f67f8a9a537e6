//! End-to-end experiments: load inputs, build the configured index, rank every
//! query and score the rankings.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{Metric, MetricKind, Ranking};
use super::report::{evaluate, ConfigFingerprint, MetricReport};
use crate::corpus::{load_queries, split_by_year, Corpus, DocId, Document, Qrels, Query};
use crate::dense::{
    build_dense_index, embedding_manifest, query_key, search_dense, EmbeddingManifest,
    EmbeddingSet, ViewReduction,
};
use crate::error::{Error, Result};
use crate::hash::sha256_hex;
use crate::referral::{
    citing_sentence_queries, extract_referrals, filter_pool, ExtractionConfig, ReferralPool,
    DEFAULT_MAX_REFERRALS,
};
use crate::sparse::{build_strategy_index, search_sparse, Bm25Params, Tokenizer};
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retriever {
    #[default]
    Sparse,
    Dense,
}

impl Retriever {
    pub fn as_str(self) -> &'static str {
        match self {
            Retriever::Sparse => "sparse",
            Retriever::Dense => "dense",
        }
    }
}

/// One retrieval configuration. Read from TOML or JSON; relative paths are
/// resolved against the directory of the config file.
///
/// Without `queries`, queries are the citing sentences of documents newer than
/// `candidate_cutoff` (restricted to `query_years` when given) that link into
/// the candidate set. Without `referrals`, the pool is extracted from every
/// document that is not a query source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub referrals: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,

    pub retriever: Retriever,
    pub strategy: Strategy,
    pub bm25: Bm25Params,
    pub max_referrals: usize,
    pub seed: u64,
    pub view_reduction: ViewReduction,
    /// Text repetitions of the document in `concat` (sparse only).
    pub doc_repeat: usize,
    pub stopwords: Vec<String>,

    /// Documents up to this year are retrievable.
    pub candidate_cutoff: Option<i32>,
    pub query_years: Vec<i32>,
    /// Referrals from sources after this year are dropped. Defaults to
    /// `candidate_cutoff` when queries are derived from the corpus.
    pub pool_cutoff: Option<i32>,
    pub extraction: ExtractionConfig,

    pub k: Vec<usize>,
    pub metrics: Vec<MetricKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: PathBuf::new(),
            queries: None,
            qrels: None,
            referrals: None,
            embeddings: None,
            retriever: Retriever::Sparse,
            strategy: Strategy::DocOnly,
            bm25: Bm25Params::default(),
            max_referrals: DEFAULT_MAX_REFERRALS,
            seed: 0,
            view_reduction: ViewReduction::Max,
            doc_repeat: 1,
            stopwords: Vec::new(),
            candidate_cutoff: None,
            query_years: Vec::new(),
            pool_cutoff: None,
            extraction: ExtractionConfig::default(),
            k: vec![1, 10],
            metrics: vec![MetricKind::Recall, MetricKind::Mrr, MetricKind::Ndcg],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_error = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut config: ExperimentConfig =
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                serde_json::from_str(&text).map_err(|e| parse_error(e.line(), e.to_string()))?
            } else {
                toml::from_str(&text).map_err(|e| {
                    let line = e
                        .span()
                        .map_or(0, |s| text[..s.start].matches('\n').count() + 1);
                    parse_error(line, e.message().to_owned())
                })?
            };
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    /// Makes relative input paths relative to `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        resolve(&mut self.corpus);
        for p in [
            &mut self.queries,
            &mut self.qrels,
            &mut self.referrals,
            &mut self.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.as_os_str().is_empty() {
            return Err(Error::Config("no corpus path given".into()));
        }
        if self.queries.is_some() != self.qrels.is_some() {
            return Err(Error::Config("queries and qrels must be given together".into()));
        }
        if self.queries.is_none() && self.candidate_cutoff.is_none() {
            return Err(Error::Config(
                "without a queries file, candidate_cutoff is needed to derive queries".into(),
            ));
        }
        if self.retriever == Retriever::Sparse && self.strategy == Strategy::Mean {
            return Err(Error::Config(
                "the mean strategy averages embeddings and needs the dense retriever".into(),
            ));
        }
        if self.retriever == Retriever::Dense && self.embeddings.is_none() {
            return Err(Error::Config("the dense retriever needs an embeddings file".into()));
        }
        if self.doc_repeat == 0 {
            return Err(Error::Config("doc_repeat must be at least 1".into()));
        }
        if self.k.is_empty() || self.metrics.is_empty() {
            return Err(Error::Config("at least one metric and one cutoff are needed".into()));
        }
        if let Some(k) = self.k.iter().find(|&&k| k == 0) {
            return Err(Error::Config(format!("cutoff k must be at least 1, got {k}")));
        }
        self.bm25.validate()?;
        self.extraction.validate()
    }

    /// Every `metric@k` combination, ordered by metric then cutoff.
    pub fn metric_list(&self) -> Result<Vec<Metric>> {
        let mut out = BTreeSet::new();
        for &kind in &self.metrics {
            for &k in &self.k {
                out.insert(Metric::new(kind, k)?);
            }
        }
        Ok(out.into_iter().collect())
    }

    pub fn max_k(&self) -> usize {
        self.k.iter().copied().max().unwrap_or(1)
    }

    /// Hash of every setting that can change results. Input paths are left
    /// out so that moving files keeps the fingerprint.
    pub fn fingerprint(&self) -> ConfigFingerprint {
        let mut settings = self.clone();
        settings.corpus = PathBuf::new();
        let has = |p: &Option<PathBuf>| p.as_ref().map(|_| PathBuf::from("given"));
        settings.queries = has(&self.queries);
        settings.qrels = has(&self.qrels);
        settings.referrals = has(&self.referrals);
        settings.embeddings = has(&self.embeddings);
        let json = serde_json::to_string(&settings).expect("config serializes");
        ConfigFingerprint {
            retriever: self.retriever.as_str().to_owned(),
            strategy: self.strategy.as_str().to_owned(),
            max_referrals: self.max_referrals,
            seed: self.seed,
            candidate_cutoff: self.candidate_cutoff,
            pool_cutoff: self.effective_pool_cutoff(),
            hash: sha256_hex(json.as_bytes(), 16),
        }
    }

    fn effective_pool_cutoff(&self) -> Option<i32> {
        match (self.pool_cutoff, &self.queries) {
            (Some(c), _) => Some(c),
            (None, None) => self.candidate_cutoff,
            (None, Some(_)) => None,
        }
    }
}

/// Loaded inputs for one configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    corpus: Corpus,
    candidates: Vec<DocId>,
    queries: Vec<Query>,
    qrels: Qrels,
    pool: ReferralPool,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut corpus = Corpus::load(&config.corpus)?;
        let supplied = match (&config.queries, &config.qrels) {
            (Some(qpath), Some(rpath)) => {
                let queries = load_queries(qpath)?;
                let qrels = Qrels::load(rpath)?;
                corpus.attach_queries(queries.clone(), qrels.clone())?;
                Some((queries, qrels))
            }
            _ => None,
        };

        let mut candidates: Vec<&Document> = match config.candidate_cutoff {
            Some(cutoff) => split_by_year(&corpus, cutoff).0,
            None => corpus.documents().collect(),
        };
        candidates.sort_by(|a, b| a.id.cmp(&b.id));
        let candidate_ids: HashSet<&str> = candidates.iter().map(|d| d.id.as_str()).collect();

        let mut query_sources: HashSet<&str> = HashSet::new();
        let (mut queries, qrels) = match supplied {
            Some(supplied) => supplied,
            None => {
                let cutoff = config.candidate_cutoff.expect("validated");
                let sources: Vec<&Document> = split_by_year(&corpus, cutoff)
                    .1
                    .into_iter()
                    .filter(|d| {
                        config.query_years.is_empty()
                            || d.year.is_some_and(|y| config.query_years.contains(&y))
                    })
                    .collect();
                query_sources.extend(sources.iter().map(|d| d.id.as_str()));
                citing_sentence_queries(
                    sources.iter().copied(),
                    &candidate_ids,
                    &config.extraction.mask_token,
                )?
            }
        };
        queries.sort_by(|a, b| a.id.cmp(&b.id));

        let pool = match &config.referrals {
            Some(path) => ReferralPool::load(path)?,
            None if config.strategy.uses_referrals() => {
                let targets: Vec<&Document> = corpus
                    .documents()
                    .filter(|d| !query_sources.contains(d.id.as_str()))
                    .collect();
                let extraction = extract_referrals(targets, &config.extraction)?;
                restrict_targets(extraction.pool, &candidate_ids)
            }
            None => ReferralPool::new(),
        };
        let pool = match config.effective_pool_cutoff() {
            Some(cutoff) => filter_pool(&pool, cutoff),
            None => pool,
        };

        let candidates = candidates.into_iter().map(|d| d.id.clone()).collect();
        Ok(Experiment {
            config: config.clone(),
            corpus,
            candidates,
            queries,
            qrels,
            pool,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Retrievable documents, ordered by id.
    pub fn candidates(&self) -> Vec<&Document> {
        self.candidates
            .iter()
            .map(|id| self.corpus.get(id.as_str()).expect("candidate in corpus"))
            .collect()
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn qrels(&self) -> &Qrels {
        &self.qrels
    }

    pub fn pool(&self) -> &ReferralPool {
        &self.pool
    }

    /// The embedding keys and texts a dense run of this experiment needs.
    pub fn manifest(&self) -> Result<EmbeddingManifest> {
        embedding_manifest(
            &self.candidates(),
            &self.pool,
            &self.queries,
            self.config.strategy,
            self.config.max_referrals,
            self.config.seed,
        )
    }

    /// Ranks every query, in query id order.
    pub fn rank(&self) -> Result<Vec<Ranking>> {
        match self.config.retriever {
            Retriever::Sparse => self.rank_sparse(),
            Retriever::Dense => self.rank_dense(),
        }
    }

    fn rank_sparse(&self) -> Result<Vec<Ranking>> {
        let c = &self.config;
        let tokenizer = Tokenizer::default().with_stopwords(&c.stopwords);
        let index = build_strategy_index(
            &self.candidates(),
            &self.pool,
            c.strategy,
            c.max_referrals,
            c.seed,
            c.doc_repeat,
            &tokenizer,
        )?;
        let k = c.max_k();
        self.queries
            .par_iter()
            .map(|q| {
                let hits = search_sparse(&index, c.bm25, &tokenizer, &q.text, k);
                Ranking::new(q.id.clone(), hits.into_iter().map(|h| (h.doc, h.score)))
            })
            .collect()
    }

    fn rank_dense(&self) -> Result<Vec<Ranking>> {
        let c = &self.config;
        let embeddings = EmbeddingSet::load(c.embeddings.as_ref().expect("validated"))?;
        let mut missing: BTreeSet<String> = self
            .queries
            .iter()
            .map(|q| query_key(&q.id))
            .filter(|key| !embeddings.contains(key))
            .collect();
        let index = match build_dense_index(
            &embeddings,
            &self.candidates,
            &self.pool,
            c.strategy,
            c.max_referrals,
            c.seed,
        ) {
            Ok(index) => index,
            Err(Error::MissingEmbeddings(keys)) => {
                missing.extend(keys);
                return Err(Error::MissingEmbeddings(missing.into_iter().collect()));
            }
            Err(e) => return Err(e),
        };
        if !missing.is_empty() {
            return Err(Error::MissingEmbeddings(missing.into_iter().collect()));
        }
        let k = c.max_k();
        self.queries
            .par_iter()
            .map(|q| {
                let vector = embeddings.get(&query_key(&q.id)).expect("checked above");
                let hits = search_dense(&index, vector, k, c.view_reduction)?;
                Ranking::new(q.id.clone(), hits.into_iter().map(|h| (h.doc, h.score)))
            })
            .collect()
    }

    pub fn run(&self) -> Result<MetricReport> {
        let rankings = self.rank()?;
        Ok(evaluate(
            &rankings,
            &self.qrels,
            &self.config.metric_list()?,
            self.config.fingerprint(),
        ))
    }
}

fn restrict_targets(pool: ReferralPool, targets: &HashSet<&str>) -> ReferralPool {
    let provenance = pool.provenance().map(str::to_owned);
    let kept: Vec<_> = pool
        .iter()
        .filter(|r| targets.contains(r.target.as_str()))
        .cloned()
        .collect();
    let restricted = ReferralPool::from_referrals(kept).0;
    match provenance {
        Some(p) => restricted.with_provenance(p),
        None => restricted,
    }
}

/// Prepares and runs `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricReport> {
    Experiment::prepare(config)?.run()
}
