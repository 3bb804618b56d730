use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use super::TotemError;
use crate::ingest::ClassVocabulary;

/// Used when a dataset ships no stopword file.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "being", "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has",
    "have", "he", "her", "him", "his", "i", "if", "in", "into", "is", "it", "its", "me", "my",
    "of", "on", "or", "our", "she", "so", "than", "that", "the", "their", "them", "then",
    "there", "these", "they", "this", "those", "to", "up", "us", "was", "we", "were", "what",
    "when", "which", "while", "who", "will", "with", "would", "you", "your",
];

/// Stopword set plus a token -> lemma lookup with identity fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenPipelineConfig {
    stopwords: HashSet<String>,
    lemmas: HashMap<String, String>,
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric()) && s.to_lowercase() == s
}

impl TokenPipelineConfig {
    /// Validates that every lemma is itself a fixed point of the pipeline:
    /// a single lowercase token, not a stopword, and not remapped again.
    pub fn new(
        stopwords: impl IntoIterator<Item = String>,
        lemmas: HashMap<String, String>,
    ) -> Result<Self, TotemError> {
        let stopwords: HashSet<String> = stopwords.into_iter().map(|s| s.to_lowercase()).collect();
        for (token, lemma) in &lemmas {
            if !is_token(token) {
                return Err(TotemError::InvalidToken(token.clone()));
            }
            if !is_token(lemma) {
                return Err(TotemError::InvalidToken(lemma.clone()));
            }
            if stopwords.contains(lemma) {
                return Err(TotemError::LemmaIsStopword(lemma.clone()));
            }
            if let Some(next) = lemmas.get(lemma) {
                if next != lemma {
                    return Err(TotemError::LemmaNotClosed {
                        token: token.clone(),
                        lemma: lemma.clone(),
                        next: next.clone(),
                    });
                }
            }
        }
        Ok(TokenPipelineConfig { stopwords, lemmas })
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn lemma<'a>(&'a self, token: &'a str) -> &'a str {
        self.lemmas.get(token).map(String::as_str).unwrap_or(token)
    }
}

impl Default for TokenPipelineConfig {
    fn default() -> Self {
        TokenPipelineConfig {
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            lemmas: HashMap::new(),
        }
    }
}

pub fn parse_stopwords<R: BufRead>(reader: R) -> Result<Vec<String>, TotemError> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| TotemError::Io(e.to_string()))?;
        let word = line.trim();
        if !word.is_empty() {
            out.push(word.to_lowercase());
        }
    }
    Ok(out)
}

/// Reads `token<TAB>lemma` lines.
pub fn parse_lemma_table<R: BufRead>(reader: R) -> Result<HashMap<String, String>, TotemError> {
    let mut table = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| TotemError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(token), Some(lemma), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(TotemError::MalformedLemma {
                line: i + 1,
                reason: "expected two tab-separated columns".into(),
            });
        };
        let (token, lemma) = (token.trim().to_lowercase(), lemma.trim().to_lowercase());
        if table.insert(token.clone(), lemma).is_some() {
            return Err(TotemError::MalformedLemma {
                line: i + 1,
                reason: format!("duplicate token `{token}`"),
            });
        }
    }
    Ok(table)
}

/// Lowercase, split on non-alphanumeric runs, drop stopwords, lemmatize.
/// Order and duplicates are kept.
pub fn preprocess(text: &str, config: &TokenPipelineConfig) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !config.is_stopword(t))
        .map(|t| config.lemma(t).to_string())
        .collect()
}

/// Distinct tokens that name a vocabulary class.
pub fn object_tokens<S: AsRef<str>>(tokens: &[S], vocab: &ClassVocabulary) -> BTreeSet<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| vocab.contains(t))
        .map(str::to_string)
        .collect()
}
