//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rar_core::dense::{build_dense_index, dot, score_shortest_path, DenseIndex, EmbeddingSet, ViewReduction};
use rar_core::eval::{mrr_at_k, ndcg_at_k, recall_at_k, run_experiment, ExperimentConfig, MetricReport, Ranking};
use rar_core::sparse::{build_index, build_strategy_index, search_sparse, Bm25Params, InvertedIndex, Tokenizer};
use rar_core::{DocId, Document, Qrels, ReferralPool, Strategy};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// Criterion 1 ---------------------------------------------------------------

/// Scores every document straight from its token list.
fn naive_bm25(docs: &[(String, Vec<String>)], query: &[String], k: usize) -> Vec<(String, f64)> {
    let (k1, b) = (1.2f64, 0.75f64);
    let n = docs.len() as f64;
    let avg = docs.iter().map(|(_, t)| t.len() as f64).sum::<f64>() / n;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for (_, tokens) in docs {
        let mut uniq: Vec<&str> = tokens.iter().map(String::as_str).collect();
        uniq.sort_unstable();
        uniq.dedup();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut scored: Vec<(String, f64)> = docs
        .iter()
        .map(|(id, tokens)| {
            let len = tokens.len() as f64;
            let mut score = 0.0;
            for term in query {
                let tf = tokens.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let d = df[term.as_str()] as f64;
                let idf = ((n - d + 0.5) / (d + 0.5) + 1.0).ln();
                score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
            }
            (id.clone(), score)
        })
        .collect();
    scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then_with(|| x.0.cmp(&y.0)));
    scored.truncate(k);
    scored
}

fn criterion_bm25_oracle() -> Outcome {
    let start = Instant::now();
    let tokenizer = Tokenizer::default();
    let mut queries_checked = 0;
    for corpus_seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(corpus_seed);
        let n_docs = rng.random_range(1..=1000);
        let vocab_size = rng.random_range(5..=500);
        let vocab: Vec<String> = (0..vocab_size).map(|j| format!("w{j}")).collect();
        let docs: Vec<(String, Vec<String>)> = (0..n_docs)
            .map(|i| {
                let len = rng.random_range(0..60);
                // Squaring skews toward low ids, giving a few frequent terms.
                let tokens = (0..len)
                    .map(|_| {
                        let u: f64 = rng.random();
                        vocab[((u * u) * vocab_size as f64) as usize].clone()
                    })
                    .collect();
                (format!("doc{:04}", (i * 7919) % 10007), tokens)
            })
            .collect();
        let mut unique_ids: Vec<&String> = docs.iter().map(|(id, _)| id).collect();
        unique_ids.sort();
        unique_ids.dedup();
        check(unique_ids.len() == docs.len(), "generator produced duplicate ids")?;

        let texts: Vec<(DocId, String)> = docs
            .iter()
            .map(|(id, t)| (DocId::from(id.as_str()), t.join(" ")))
            .collect();
        let index = build_index(&texts, &tokenizer).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let qlen = rng.random_range(1..6);
            let mut query: Vec<String> = (0..qlen)
                .map(|_| vocab[rng.random_range(0..vocab_size)].clone())
                .collect();
            if rng.random_bool(0.2) {
                query.push("unseen".into());
            }
            let k = rng.random_range(1..=n_docs + 5);
            let got = search_sparse(&index, Bm25Params::default(), &tokenizer, &query.join(" "), k);
            let want = naive_bm25(&docs, &query, k);
            check(
                got.len() == want.len(),
                format!("corpus {corpus_seed}: {} hits, oracle {}", got.len(), want.len()),
            )?;
            for (rank, (g, (wid, wscore))) in got.iter().zip(&want).enumerate() {
                check(
                    g.doc.as_str() == wid,
                    format!("corpus {corpus_seed} rank {rank}: got {} expected {wid}", g.doc),
                )?;
                check(
                    (g.score - wscore).abs() <= 1e-9,
                    format!("corpus {corpus_seed} {wid}: score {} vs {wscore}", g.score),
                )?;
            }
            queries_checked += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 60.0, format!("took {elapsed:.1}s"))?;
    Ok(format!("50 corpora, {queries_checked} queries, {elapsed:.1}s"))
}

// Criterion 2 ---------------------------------------------------------------

fn naive_metrics(ranked: &[&str], grades: &BTreeMap<&str, u32>, k: usize) -> (f64, f64, f64) {
    let rel: usize = grades.values().filter(|&&g| g > 0).count();
    let top = &ranked[..ranked.len().min(k)];
    let grade = |d: &str| grades.get(d).copied().unwrap_or(0);
    let hits = top.iter().filter(|d| grade(d) > 0).count();
    let recall = hits as f64 / rel as f64;
    let mut mrr = 0.0;
    for (i, d) in top.iter().enumerate() {
        if grade(d) > 0 {
            mrr = 1.0 / (i as f64 + 1.0);
            break;
        }
    }
    let mut dcg = 0.0;
    for (i, d) in top.iter().enumerate() {
        dcg += (2f64.powi(grade(d) as i32) - 1.0) / (i as f64 + 2.0).log2();
    }
    let mut ideal: Vec<u32> = grades.values().copied().collect();
    ideal.sort_by(|a, b| b.cmp(a));
    let mut idcg = 0.0;
    for (i, g) in ideal.iter().take(k).enumerate() {
        idcg += (2f64.powi(*g as i32) - 1.0) / (i as f64 + 2.0).log2();
    }
    let ndcg = if idcg > 0.0 { dcg / idcg } else { 0.0 };
    (recall, mrr, ndcg)
}

fn criterion_metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pool: Vec<String> = (0..30).map(|i| format!("d{i}")).collect();
    let mut checked = 0;
    while checked < 1000 {
        let mut qrels = Qrels::new();
        let mut grades: BTreeMap<&str, u32> = BTreeMap::new();
        for d in pool.iter().take(rng.random_range(1..15)) {
            let g = rng.random_range(0..4);
            qrels.insert("q", d.as_str(), g);
            grades.insert(d, g);
        }
        if !grades.values().any(|&g| g > 0) {
            check(
                recall_at_k(&Ranking::new("q", []).unwrap(), &qrels, 5).is_none(),
                "unjudged query not excluded",
            )?;
            continue;
        }
        let mut docs: Vec<&str> = pool.iter().map(String::as_str).collect();
        docs.shuffle(&mut rng);
        docs.truncate(rng.random_range(0..20));
        let n = docs.len();
        let ranking = Ranking::new("q", docs.iter().enumerate().map(|(i, d)| (DocId::from(*d), (n - i) as f64)))
            .map_err(|e| e.to_string())?;
        let k = rng.random_range(1..25);
        let (r, m, nd) = naive_metrics(&docs, &grades, k);
        let got = (
            recall_at_k(&ranking, &qrels, k).unwrap(),
            mrr_at_k(&ranking, &qrels, k).unwrap(),
            ndcg_at_k(&ranking, &qrels, k).unwrap(),
        );
        for (name, g, w) in [("recall", got.0, r), ("mrr", got.1, m), ("ndcg", got.2, nd)] {
            check((g - w).abs() < 1e-12, format!("instance {checked}: {name}@{k} {g} vs {w}"))?;
            check((0.0..=1.0).contains(&g), format!("{name} {g} outside [0, 1]"))?;
        }
        checked += 1;
    }

    let mut single = Qrels::new();
    single.insert("q", "g", 1);
    let second = Ranking::new("q", [("a".into(), 2.0), ("g".into(), 1.0)]).unwrap();
    let v1 = ndcg_at_k(&second, &single, 2).unwrap();

    let mut graded = Qrels::new();
    graded.insert("q", "x", 3);
    graded.insert("q", "y", 2);
    let swapped = Ranking::new("q", [("y".into(), 2.0), ("x".into(), 1.0)]).unwrap();
    let v2 = ndcg_at_k(&swapped, &graded, 2).unwrap();

    let case1 = (v1 - 0.6309).abs() < 1e-4;
    let case2 = (v2 - 0.7847).abs() < 1e-4;
    let detail = format!(
        "1000 random instances match; binary rank-2 case {v1:.6} vs 0.6309 {}; graded (3,2)->(2,3) case {v2:.6} vs 0.7847 {}",
        if case1 { "ok" } else { "MISMATCH" },
        if case2 { "ok" } else { "MISMATCH" },
    );
    if case1 && case2 {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}. The stated expression (3 + 7/log2 3)/(7 + 3/log2 3) evaluates to 0.833991, so the expected 0.7847 is unreachable by the stated formula"
        ))
    }
}

// Criterion 3 ---------------------------------------------------------------

fn recall10(report: &MetricReport) -> f64 {
    report.mean("recall@10").expect("recall@10 computed")
}

fn criterion_lexical_gap() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let synthetic = common::lexical_gap(3, 200);
    let base = common::write_inputs(dir.path(), &synthetic, None);
    let run = |s| run_experiment(&common::with_strategy(&base, s)).map_err(|e| e.to_string());
    let doc_only = run(Strategy::DocOnly)?;
    let concat = run(Strategy::Concat)?;
    let again = run(Strategy::Concat)?;
    let (r0, r1) = (recall10(&doc_only), recall10(&concat));
    check(doc_only.evaluated_queries == 200, "expected 200 evaluated queries")?;
    check(r0 <= 0.10, format!("doc_only Recall@10 {r0} > 0.10"))?;
    check(r1 >= 0.90, format!("concat Recall@10 {r1} < 0.90"))?;
    check(concat.to_json() == again.to_json(), "concat reports differ between runs")?;
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 30.0, format!("took {elapsed:.1}s"))?;
    Ok(format!("doc_only R@10 {r0:.3}, concat R@10 {r1:.3}, {elapsed:.1}s"))
}

// Criterion 4 ---------------------------------------------------------------

fn criterion_aggregation_ordering() -> Outcome {
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (synthetic, emb) = common::dense_synthetic(100 + seed, 200, 5, 64, 0.5);
        let base = ExperimentConfig {
            seed,
            ..common::write_inputs(dir.path(), &synthetic, Some(&emb))
        };
        let run = |s| run_experiment(&common::with_strategy(&base, s)).map_err(|e| e.to_string());
        let (doc_only, mean, sp) = (run(Strategy::DocOnly)?, run(Strategy::Mean)?, run(Strategy::ShortestPath)?);
        let r1 = |r: &MetricReport| r.mean("recall@1").unwrap();
        check(
            r1(&sp) > r1(&mean),
            format!("seed {seed}: shortest_path R@1 {} <= mean R@1 {}", r1(&sp), r1(&mean)),
        )?;
        check(
            recall10(&mean) >= recall10(&doc_only),
            format!("seed {seed}: mean R@10 {} < doc_only R@10 {}", recall10(&mean), recall10(&doc_only)),
        )?;
        lines.push(format!("{:.2}/{:.2}", r1(&sp), r1(&mean)));
    }
    Ok(format!("10 seeds; R@1 shortest_path/mean: {}", lines.join(" ")))
}

// Criterion 5 ---------------------------------------------------------------

fn criterion_temporal_update() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let synthetic = common::temporal(5, 200);
    let base = ExperimentConfig {
        strategy: Strategy::Concat,
        ..common::write_inputs(dir.path(), &synthetic, None)
    };
    let at = |cutoff| {
        run_experiment(&ExperimentConfig {
            pool_cutoff: Some(cutoff),
            ..base.clone()
        })
        .map_err(|e| e.to_string())
    };
    let early = recall10(&at(common::EARLY_YEAR)?);
    let late = recall10(&at(common::LATE_YEAR)?);
    check(late > early, format!("R@10 {late} with the later pool, {early} with the earlier"))?;
    Ok(format!(
        "R@10 {early:.3} at cutoff {} -> {late:.3} at cutoff {}",
        common::EARLY_YEAR,
        common::LATE_YEAR
    ))
}

// Criterion 6 ---------------------------------------------------------------

fn criterion_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let read = |path: std::path::PathBuf| std::fs::read(path).map_err(|e| e.to_string());
    let err = |e: rar_core::Error| e.to_string();

    let synthetic = common::lexical_gap(11, 120);
    let (pool, _) = ReferralPool::from_referrals(synthetic.referrals.clone());
    let docs: Vec<&Document> = synthetic.docs.iter().collect();
    let tokenizer = Tokenizer::default();
    for strategy in [Strategy::DocOnly, Strategy::Concat, Strategy::ShortestPath] {
        let index = build_strategy_index(&docs, &pool, strategy, 30, 0, 1, &tokenizer).map_err(err)?;
        index.save(p("a.sidx")).map_err(err)?;
        let loaded = InvertedIndex::load(p("a.sidx")).map_err(err)?;
        loaded.save(p("b.sidx")).map_err(err)?;
        check(loaded == index, format!("sparse {strategy} index changed on reload"))?;
        check(read(p("a.sidx"))? == read(p("b.sidx"))?, format!("sparse {strategy} bytes differ"))?;
    }

    pool.save(p("a.jsonl")).map_err(err)?;
    let reloaded = ReferralPool::load(p("a.jsonl")).map_err(err)?;
    reloaded.save(p("b.jsonl")).map_err(err)?;
    check(reloaded.iter().eq(pool.iter()), "referral pool changed on reload")?;
    check(read(p("a.jsonl"))? == read(p("b.jsonl"))?, "referral pool bytes differ")?;

    let (dense, emb) = common::dense_synthetic(7, 40, 3, 16, 0.3);
    let (dpool, _) = ReferralPool::from_referrals(dense.referrals.clone());
    let ids: Vec<DocId> = dense.docs.iter().map(|d| d.id.clone()).collect();
    for strategy in [Strategy::DocOnly, Strategy::Mean, Strategy::ShortestPath] {
        let index = build_dense_index(&emb, &ids, &dpool, strategy, 30, 0).map_err(err)?;
        index.save(p("a.didx")).map_err(err)?;
        let loaded = DenseIndex::load(p("a.didx")).map_err(err)?;
        loaded.save(p("b.didx")).map_err(err)?;
        check(loaded == index, format!("dense {strategy} index changed on reload"))?;
        check(read(p("a.didx"))? == read(p("b.didx"))?, format!("dense {strategy} bytes differ"))?;
    }
    emb.save(p("a.emb")).map_err(err)?;
    let emb2 = EmbeddingSet::load(p("a.emb")).map_err(err)?;
    emb2.save(p("b.emb")).map_err(err)?;
    check(emb2 == emb && read(p("a.emb"))? == read(p("b.emb"))?, "embedding file changed on reload")?;

    let config = ExperimentConfig {
        strategy: Strategy::Concat,
        ..common::write_inputs(dir.path(), &synthetic, None)
    };
    let first = run_experiment(&config).map_err(err)?.to_json();
    let second = run_experiment(&config).map_err(err)?.to_json();
    check(first == second, "two evaluate runs differ")?;
    let parsed = MetricReport::from_json(&first).map_err(err)?;
    check(parsed.to_json() == first, "report JSON changed on reload")?;

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let one_thread = single.install(|| run_experiment(&config)).map_err(err)?.to_json();
    check(one_thread == first, "report depends on thread count")?;

    let shuffled_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut shuffled = common::lexical_gap(11, 120);
    shuffled.docs.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    shuffled.queries.reverse();
    let shuffled_config = ExperimentConfig {
        strategy: Strategy::Concat,
        ..common::write_inputs(shuffled_dir.path(), &shuffled, None)
    };
    let reordered = run_experiment(&shuffled_config).map_err(err)?.to_json();
    check(reordered == first, "report depends on ingestion order")?;

    Ok("sparse/dense indices, referral pool, embeddings and report reload byte-identically; reports independent of runs, threads and input order".into())
}

// Criterion 7 ---------------------------------------------------------------

fn criterion_shortest_path_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut comparisons = 0usize;
    for trial in 0..50u64 {
        let dim = rng.random_range(1..40);
        let n_docs = rng.random_range(1..60);
        let refs = rng.random_range(0..8);
        let (dense, emb) = common::dense_synthetic(1000 + trial, n_docs, refs, dim, 0.0);
        let (pool, _) = ReferralPool::from_referrals(dense.referrals.clone());
        let ids: Vec<DocId> = dense.docs.iter().map(|d| d.id.clone()).collect();
        let max_refs = rng.random_range(0..10);
        let doc_only = build_dense_index(&emb, &ids, &pool, Strategy::DocOnly, max_refs, trial).map_err(|e| e.to_string())?;
        let sp = build_dense_index(&emb, &ids, &pool, Strategy::ShortestPath, max_refs, trial).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let q: Vec<f32> = (0..dim).map(|_| rng.random_range(-3.0f32..3.0)).collect();
            for doc in 0..ids.len() {
                let (base, _) = doc_only.score(&q, doc, ViewReduction::Max);
                let (best, _) = sp.score(&q, doc, ViewReduction::Max);
                let views: Vec<&[f32]> = sp.views(doc).collect();
                let (direct, _) = score_shortest_path(&q, &views).map_err(|e| e.to_string())?;
                check(
                    best >= base && direct >= dot(&q, views[0]) && direct == best,
                    format!("trial {trial} doc {doc}: shortest_path {best} < doc_only {base}"),
                )?;
                comparisons += 1;
            }
        }
    }
    Ok(format!("{comparisons} (query, document) pairs"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 BM25 oracle equivalence", criterion_bm25_oracle),
        ("2 metric oracle equivalence", criterion_metric_oracle),
        ("3 lexical-gap replication", criterion_lexical_gap),
        ("4 aggregation ordering", criterion_aggregation_ordering),
        ("5 temporal update", criterion_temporal_update),
        ("6 determinism and round-trips", criterion_round_trips),
        ("7 shortest-path dominance", criterion_shortest_path_dominance),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run)
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
