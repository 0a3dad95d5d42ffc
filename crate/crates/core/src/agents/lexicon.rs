use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::tokenize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub phrase: String,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

/// Ordered domain phrases, each carrying one to three concept tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    /// Parses `phrase <TAB> tag[,tag...]` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(source: &str) -> Result<Self> {
        let mut entries = vec![];
        for (lineno, line) in source.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, tags) = line
                .split_once('\t')
                .ok_or_else(|| Error::config(format!("lexicon line {}: missing tab separator", lineno + 1)))?;
            let tokens = tokenize(phrase);
            if tokens.is_empty() {
                return Err(Error::config(format!("lexicon line {}: empty phrase", lineno + 1)));
            }
            let tags: Vec<String> = tags
                .split(',')
                .map(|t| t.trim().to_lowercase())
                .filter(|t| !t.is_empty())
                .collect();
            if !(1..=3).contains(&tags.len()) {
                return Err(Error::config(format!(
                    "lexicon line {}: expected 1-3 tags, got {}",
                    lineno + 1,
                    tags.len()
                )));
            }
            entries.push(LexiconEntry { phrase: phrase.trim().to_string(), tokens, tags });
        }
        if entries.is_empty() {
            return Err(Error::config("lexicon has no entries"));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tags(&self) -> BTreeSet<String> {
        self.entries.iter().flat_map(|e| e.tags.iter().cloned()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let lex = Lexicon::parse("# comment\nstone walls\twall,stone\n\nhigh tower\ttower\n").unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.entries()[0].tokens, vec!["stone", "walls"]);
        assert!(Lexicon::parse("no tab here").is_err());
        assert!(Lexicon::parse("x\ta,b,c,d").is_err());
        assert!(Lexicon::parse("").is_err());
    }
}
