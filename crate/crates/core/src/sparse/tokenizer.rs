use std::collections::HashSet;

/// Splits on every non-alphanumeric character and optionally lowercases.
///
/// Stopwords are matched after lowercasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub stopwords: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            lowercase: true,
            stopwords: HashSet::new(),
        }
    }
}

impl Tokenizer {
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords = words.into_iter().map(Into::into).collect();
        self
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if self.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_owned()
                }
            })
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }
}
