use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::Domain;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub prompt: String,
    pub reference: String,
    pub domain: Domain,
    pub concepts: Vec<String>,
}

/// Scenarios in file order. Lines are
/// `name TAB prompt TAB reference TAB domain TAB concept[,concept...]`;
/// blank lines and `#` comments are skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSuite {
    pub scenarios: Vec<ScenarioSpec>,
}

const BUILTIN: [(&str, &str); 2] = [
    ("paper5", include_str!("../../data/suites/paper5.txt")),
    ("rl3", include_str!("../../data/suites/rl3.txt")),
];

impl ScenarioSuite {
    pub fn parse(text: &str) -> Result<Self> {
        let mut scenarios = vec![];
        let mut names = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::config(format!("scenario line {}: expected 5 tab-separated fields, got {}", n + 1, fields.len())));
            }
            let [name, prompt, reference, domain, concepts] = [fields[0], fields[1], fields[2], fields[3], fields[4]];
            if name.is_empty() || prompt.is_empty() || reference.is_empty() {
                return Err(Error::config(format!("scenario line {}: empty name, prompt or reference", n + 1)));
            }
            if !names.insert(name.to_string()) {
                return Err(Error::config(format!("scenario line {}: duplicate name {name:?}", n + 1)));
            }
            scenarios.push(ScenarioSpec {
                name: name.into(),
                prompt: prompt.into(),
                reference: reference.into(),
                domain: Domain::parse(domain)?,
                concepts: concepts
                    .split(',')
                    .map(|c| c.trim().to_lowercase())
                    .filter(|c| !c.is_empty())
                    .collect(),
            });
        }
        if scenarios.is_empty() {
            return Err(Error::config("scenario suite is empty"));
        }
        Ok(Self { scenarios })
    }

    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::parse(text).expect("shipped suite parses"))
    }

    /// Reads a suite file; a bare built-in name (`paper5`, `rl3`) that is not
    /// an existing path selects the shipped copy.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if let Some(s) = Self::builtin(stem) {
                return Ok(s);
            }
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read scenario suite {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        assert_eq!(ScenarioSuite::builtin("paper5").unwrap().len(), 5);
        assert_eq!(ScenarioSuite::builtin("rl3").unwrap().len(), 3);
        assert!(ScenarioSuite::load(Path::new("suites/paper5.txt")).is_ok());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ScenarioSuite::parse("a\tb\tc\tarchitecture").is_err());
        assert!(ScenarioSuite::parse("a\t\tc\tarchitecture\tx").is_err());
        assert!(ScenarioSuite::parse("a\tb\tc\tocean\tx").is_err());
        assert!(ScenarioSuite::parse("a\tb\tc\tportrait\tx\na\tb\tc\tportrait\tx").is_err());
        assert!(ScenarioSuite::parse("# only a comment\n").is_err());
        let s = ScenarioSuite::parse("# c\nA\tp q\tr s\tlandscape\tLake, hill\n").unwrap();
        assert_eq!(s.scenarios[0].concepts, vec!["lake", "hill"]);
    }
}
