use std::io::Write;

use super::metrics::Ranking;

/// Writes rankings as a TREC run file: `qid Q0 docid rank score tag`, with
/// ranks starting at 1.
pub fn write_trec_run(
    rankings: &[Ranking],
    tag: &str,
    mut out: impl Write,
) -> std::io::Result<()> {
    for ranking in rankings {
        for (i, (doc, score)) in ranking.docs.iter().zip(&ranking.scores).enumerate() {
            writeln!(out, "{} Q0 {} {} {} {}", ranking.query_id, doc, i + 1, score, tag)?;
        }
    }
    Ok(())
}
