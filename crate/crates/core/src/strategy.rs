use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How a document and its referrals are combined into one index entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Document text only; referrals are ignored.
    DocOnly,
    /// Document text followed by referral texts. For dense retrieval the
    /// concatenated text is encoded as a single unit.
    Concat,
    /// Arithmetic mean of the document and referral embeddings (dense only).
    Mean,
    /// Each referral is a separate view; a document scores as its best view.
    ShortestPath,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::DocOnly,
        Strategy::Concat,
        Strategy::Mean,
        Strategy::ShortestPath,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::DocOnly => "doc_only",
            Strategy::Concat => "concat",
            Strategy::Mean => "mean",
            Strategy::ShortestPath => "shortest_path",
        }
    }

    pub fn uses_referrals(self) -> bool {
        self != Strategy::DocOnly
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "doc_only" | "doc-only" | "none" => Ok(Strategy::DocOnly),
            "concat" => Ok(Strategy::Concat),
            "mean" => Ok(Strategy::Mean),
            "shortest_path" | "shortest-path" | "sp" => Ok(Strategy::ShortestPath),
            _ => Err(format!(
                "unknown strategy `{s}` (expected doc_only, concat, mean or shortest_path)"
            )),
        }
    }
}
