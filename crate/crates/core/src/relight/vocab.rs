use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyEntry {
    pub name: String,
    pub z: Vec<f32>,
}

/// Named dynamic latents ("day", "sunset", "night", ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleVocabulary {
    pub style: Vec<VocabularyEntry>,
}

impl Default for StyleVocabulary {
    fn default() -> Self {
        Self::parse(include_str!("../../data/style_vocabulary.toml")).expect("bundled vocabulary is valid")
    }
}

impl StyleVocabulary {
    pub fn parse(text: &str) -> Result<Self> {
        let v: Self = toml::from_str(text).map_err(|e| Error::Config(format!("style vocabulary: {e}")))?;
        v.validate()?;
        Ok(v)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.style {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::Config(format!("duplicate style `{}`", e.name)));
            }
            if e.z.is_empty() || !e.z.iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!("style `{}` needs finite values", e.name)));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&[f32]> {
        self.style
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.z.as_slice())
            .ok_or_else(|| {
                let known: Vec<&str> = self.names().collect();
                Error::Argument(format!("unknown style `{name}`; known: {}", known.join(", ")))
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.style.iter().map(|e| e.name.as_str())
    }
}
