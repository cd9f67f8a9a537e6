use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rar_core::corpus::{load_queries, split_by_year};
use rar_core::dense::{self, build_dense_index, embedding_manifest, query_key, DenseIndex, EmbeddingSet, ViewReduction};
use rar_core::eval::{compare_reports, write_trec_run, Experiment, ExperimentConfig, MetricReport, Retriever};
use rar_core::referral::{extract_referrals, filter_pool, ExtractionConfig, ReferralUnit};
use rar_core::sparse::{build_strategy_index, search_sparse, Bm25Params, InvertedIndex, Tokenizer};
use rar_core::{Corpus, DocId, Document, Query, ReferralPool, Strategy};

/// Referral-augmented retrieval: extract referrals, build indices, search and
/// evaluate.
#[derive(Parser)]
#[command(name = "rar", version)]
struct Cli {
    /// Seed for every random choice (referral sampling)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract referrals from the link spans of a corpus
    Extract(ExtractArgs),
    /// Build a sparse or dense index file
    Index(IndexArgs),
    /// List the texts an encoder must embed for a configuration
    Manifest(ManifestArgs),
    /// Search an index and print ranked results as TSV
    Search(SearchArgs),
    /// Run an experiment config and write its metric report
    Evaluate(EvaluateArgs),
    /// Compare two metric reports
    Compare(CompareArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus in docs-jsonl format
    #[arg(long)]
    corpus: PathBuf,
    /// Output referral pool (JSONL)
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "window")]
    unit: Unit,
    /// Window size in whitespace tokens
    #[arg(long, default_value_t = rar_core::referral::DEFAULT_WINDOW_TOKENS)]
    window_tokens: usize,
    #[arg(long, default_value = rar_core::referral::DEFAULT_MASK_TOKEN)]
    mask_token: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Window,
    Sentence,
}

/// Inputs shared by `index` and `manifest`.
#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Referral pool (JSONL); required by every strategy except doc_only
    #[arg(long)]
    referrals: Option<PathBuf>,
    #[arg(long, default_value = "doc_only")]
    strategy: Strategy,
    /// Maximum referrals sampled per document
    #[arg(long, default_value_t = rar_core::referral::DEFAULT_MAX_REFERRALS)]
    max_referrals: usize,
    /// Only documents up to this year are indexed
    #[arg(long)]
    candidate_cutoff: Option<i32>,
    /// Drop referrals whose source is newer than this year
    #[arg(long)]
    pool_cutoff: Option<i32>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct IndexArgs {
    #[command(flatten)]
    build: BuildArgs,
    /// Embedding file; builds a dense index instead of a sparse one
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Document text repetitions in sparse concat
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    doc_repeat: u32,
}

#[derive(Args)]
struct ManifestArgs {
    #[command(flatten)]
    build: BuildArgs,
    /// Queries (JSONL) whose texts are added as `qry:` keys
    #[arg(long)]
    queries: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Index file written by `rar index`
    #[arg(long)]
    index: PathBuf,
    /// Query text (sparse indices)
    #[arg(long, short, conflicts_with = "queries")]
    query: Option<String>,
    /// Queries file (JSONL); output gains a leading query id column
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Embedding file holding query vectors (dense indices)
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Embedding key of a single query vector (dense indices)
    #[arg(long, requires = "embeddings", conflicts_with_all = ["query", "queries"])]
    query_key: Option<String>,
    #[arg(short, long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    /// Score a document by its worst view instead of its best
    #[arg(long)]
    literal_min: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment config (TOML, or JSON by extension)
    config: PathBuf,
    /// Report path (default: stdout)
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write rankings as a TREC run file
    #[arg(long)]
    run: Option<PathBuf>,
    /// Write the embedding manifest for this config instead of evaluating
    #[arg(long, conflicts_with = "run")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    retriever: Option<RetrieverArg>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    max_referrals: Option<usize>,
    #[arg(long)]
    pool_cutoff: Option<i32>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RetrieverArg {
    Sparse,
    Dense,
}

#[derive(Args)]
struct CompareArgs {
    /// Baseline report
    a: PathBuf,
    /// Report compared against the baseline
    b: PathBuf,
    /// Print the comparison as JSON
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", line.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e
                .chain()
                .find_map(|c| c.downcast_ref::<rar_core::Error>())
                .map_or("runtime", rar_core::Error::category);
            eprintln!("error[{category}]: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Extract(args) => extract(args, seed.unwrap_or(0)),
        Command::Index(args) => index(args, seed.unwrap_or(0)),
        Command::Manifest(args) => manifest(args, seed.unwrap_or(0)),
        Command::Search(args) => search(args),
        Command::Evaluate(args) => evaluate(args, seed),
        Command::Compare(args) => compare(args),
    }
}

fn extract(args: ExtractArgs, seed: u64) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let config = ExtractionConfig {
        window_tokens: args.window_tokens,
        mask_token: args.mask_token,
        unit: match args.unit {
            Unit::Window => ReferralUnit::Window,
            Unit::Sentence => ReferralUnit::Sentence,
        },
        seed,
        ..ExtractionConfig::default()
    };
    let extraction = extract_referrals(corpus.documents(), &config)?;
    extraction.pool.save(&args.out)?;
    println!("{}", serde_json::to_string(&extraction.summary)?);
    Ok(())
}

/// The corpus and the referral pool, filtered by `--pool-cutoff`.
fn load_build_inputs(args: &BuildArgs) -> Result<(Corpus, ReferralPool)> {
    let corpus = Corpus::load(&args.corpus)?;
    let pool = match &args.referrals {
        Some(path) => ReferralPool::load(path)?,
        None if args.strategy.uses_referrals() => {
            bail!(rar_core::Error::Config(format!(
                "strategy {} needs --referrals",
                args.strategy
            )))
        }
        None => ReferralPool::new(),
    };
    let pool = match args.pool_cutoff {
        Some(cutoff) => filter_pool(&pool, cutoff),
        None => pool,
    };
    Ok((corpus, pool))
}

fn candidates(corpus: &Corpus, cutoff: Option<i32>) -> Vec<&Document> {
    let mut docs = match cutoff {
        Some(c) => split_by_year(corpus, c).0,
        None => corpus.documents().collect(),
    };
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    docs
}

fn index(args: IndexArgs, seed: u64) -> Result<()> {
    let b = &args.build;
    let (corpus, pool) = load_build_inputs(b)?;
    let docs = candidates(&corpus, b.candidate_cutoff);
    match &args.embeddings {
        Some(path) => {
            let embeddings = EmbeddingSet::load(path)?;
            let ids: Vec<DocId> = docs.iter().map(|d| d.id.clone()).collect();
            let index = build_dense_index(&embeddings, &ids, &pool, b.strategy, b.max_referrals, seed)?;
            index.save(&b.out)?;
            log::info!("dense index: {} documents, dim {}", index.len(), index.dim());
        }
        None => {
            let index = build_strategy_index(
                &docs,
                &pool,
                b.strategy,
                b.max_referrals,
                seed,
                args.doc_repeat as usize,
                &Tokenizer::default(),
            )?;
            index.save(&b.out)?;
            log::info!(
                "sparse index: {} documents, {} entries, {} terms",
                index.document_count(),
                index.len(),
                index.term_count()
            );
        }
    }
    Ok(())
}

fn manifest(args: ManifestArgs, seed: u64) -> Result<()> {
    let b = &args.build;
    let (corpus, pool) = load_build_inputs(b)?;
    let docs = candidates(&corpus, b.candidate_cutoff);
    let queries = match &args.queries {
        Some(path) => load_queries(path)?,
        None => Vec::new(),
    };
    let manifest = embedding_manifest(&docs, &pool, &queries, b.strategy, b.max_referrals, seed)?;
    manifest.save(&b.out)?;
    log::info!("manifest: {} entries", manifest.entries.len());
    Ok(())
}

enum LoadedIndex {
    Sparse(InvertedIndex),
    Dense(DenseIndex),
}

fn load_index(path: &Path) -> Result<LoadedIndex> {
    let mut magic = [0u8; 8];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut magic))
        .map_err(|e| rar_core::Error::Format {
            path: path.to_path_buf(),
            message: format!("cannot read index magic: {e}"),
        })?;
    match &magic {
        b"RARSIDX1" => Ok(LoadedIndex::Sparse(InvertedIndex::load(path)?)),
        b"RARDIDX1" => Ok(LoadedIndex::Dense(DenseIndex::load(path)?)),
        _ => bail!(rar_core::Error::Format {
            path: path.to_path_buf(),
            message: "not a sparse or dense index file".into(),
        }),
    }
}

fn search(args: SearchArgs) -> Result<()> {
    let k = args.k as usize;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let queries: Option<Vec<Query>> = args.queries.as_deref().map(load_queries).transpose()?;
    let with_qid = queries.is_some();

    match load_index(&args.index)? {
        LoadedIndex::Sparse(index) => {
            let params = Bm25Params { k1: args.k1, b: args.b };
            params.validate()?;
            let queries = match (queries, args.query) {
                (Some(q), _) => q,
                (None, Some(text)) => vec![Query::new("query", text)],
                (None, None) => bail!(rar_core::Error::Config(
                    "a sparse index needs --query or --queries".into()
                )),
            };
            let multiview = index.is_multiview();
            write_header(&mut out, with_qid, multiview)?;
            let tokenizer = Tokenizer::default();
            for q in &queries {
                for (i, hit) in search_sparse(&index, params, &tokenizer, &q.text, k).iter().enumerate() {
                    if with_qid {
                        write!(out, "{}\t", q.id)?;
                    }
                    write!(out, "{}\t{}\t{}", i + 1, hit.doc, hit.score)?;
                    if multiview {
                        write!(out, "\t{}", hit.best_view)?;
                    }
                    writeln!(out)?;
                }
            }
        }
        LoadedIndex::Dense(index) => {
            let Some(emb_path) = &args.embeddings else {
                bail!(rar_core::Error::Config(
                    "a dense index needs --embeddings with the query vectors".into()
                ));
            };
            let embeddings = EmbeddingSet::load(emb_path)?;
            let keys: Vec<(String, String)> = match (queries, args.query_key) {
                (Some(qs), _) => qs.iter().map(|q| (q.id.clone(), query_key(&q.id))).collect(),
                (None, Some(key)) => vec![(key.clone(), key)],
                (None, None) => bail!(rar_core::Error::Config(
                    "a dense index needs --query-key or --queries".into()
                )),
            };
            let missing: Vec<String> = keys
                .iter()
                .filter(|(_, key)| !embeddings.contains(key))
                .map(|(_, key)| key.clone())
                .collect();
            if !missing.is_empty() {
                bail!(rar_core::Error::MissingEmbeddings(missing));
            }
            let reduction = if args.literal_min {
                ViewReduction::LiteralMin
            } else {
                ViewReduction::Max
            };
            let multiview = index.strategy() == Strategy::ShortestPath;
            write_header(&mut out, with_qid, multiview)?;
            for (qid, key) in &keys {
                let vector = embeddings.get(key).expect("checked above");
                for (i, hit) in dense::search_dense(&index, vector, k, reduction)?.iter().enumerate() {
                    if with_qid {
                        write!(out, "{qid}\t")?;
                    }
                    write!(out, "{}\t{}\t{}", i + 1, hit.doc, hit.score)?;
                    if multiview {
                        let doc = index.position(hit.doc.as_str()).expect("hit from index");
                        let view = hit.best_view.unwrap_or(0);
                        write!(out, "\t{}", index.view_key(doc, view))?;
                    }
                    writeln!(out)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn write_header(out: &mut impl Write, with_qid: bool, multiview: bool) -> io::Result<()> {
    if with_qid {
        write!(out, "query\t")?;
    }
    write!(out, "rank\tdoc\tscore")?;
    if multiview {
        write!(out, "\tbest_view")?;
    }
    writeln!(out)
}

fn evaluate(args: EvaluateArgs, seed: Option<u64>) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(r) = args.retriever {
        config.retriever = match r {
            RetrieverArg::Sparse => Retriever::Sparse,
            RetrieverArg::Dense => Retriever::Dense,
        };
    }
    if let Some(s) = args.strategy {
        config.strategy = s;
    }
    if let Some(m) = args.max_referrals {
        config.max_referrals = m;
    }
    if let Some(c) = args.pool_cutoff {
        config.pool_cutoff = Some(c);
    }
    if let Some(e) = args.embeddings {
        config.embeddings = Some(e);
    }

    let experiment = Experiment::prepare(&config)
        .with_context(|| format!("preparing {}", args.config.display()))?;
    if let Some(path) = &args.manifest {
        let manifest = experiment.manifest()?;
        manifest.save(path)?;
        log::info!("manifest: {} entries", manifest.entries.len());
        return Ok(());
    }
    let rankings = experiment.rank()?;
    let report = rar_core::eval::evaluate(
        &rankings,
        experiment.qrels(),
        &config.metric_list()?,
        config.fingerprint(),
    );
    if let Some(path) = &args.run {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        let tag = format!("{}-{}", config.retriever.as_str(), config.strategy);
        write_trec_run(&rankings, &tag, &mut w)?;
        w.flush()?;
    }
    match &args.out {
        Some(path) => report.save(path)?,
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let a = MetricReport::load(&args.a)?;
    let b = MetricReport::load(&args.b)?;
    let cmp = compare_reports(&a, &b)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&cmp)?);
    } else {
        println!("{cmp}");
    }
    Ok(())
}
