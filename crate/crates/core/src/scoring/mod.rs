//! Per-thumbnail scores.
//!
//! Built-in scorers are heuristic stand-ins for learned quality models;
//! real model outputs come in through [`external`].

pub mod external;
pub mod heuristics;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::preprocess::ThumbnailSet;
use crate::scalar::Scalar;

pub use external::{
    run_external_scorer, ExternalScores, ExternalSource, RangeWarning, ScoreRequest,
};
pub use heuristics::{
    colorfulness_of, composite_from_dimensions, composite_scores, exposure_of, score_colorfulness,
    score_composite, score_exposure, score_sharpness, sharpness_of,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Builtin,
    External,
}

/// The built-in heuristic scorers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinScorer {
    Sharpness,
    Colorfulness,
    Exposure,
    Composite,
}

impl BuiltinScorer {
    pub const ALL: [BuiltinScorer; 4] = [
        BuiltinScorer::Sharpness,
        BuiltinScorer::Colorfulness,
        BuiltinScorer::Exposure,
        BuiltinScorer::Composite,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BuiltinScorer::Sharpness => "heuristic.sharpness",
            BuiltinScorer::Colorfulness => "heuristic.colorfulness",
            BuiltinScorer::Exposure => "heuristic.exposure",
            BuiltinScorer::Composite => "heuristic.composite",
        }
    }

    /// Scores every thumbnail of `set`.
    pub fn score_set<T: Scalar>(self, set: &ThumbnailSet) -> ScoreTable<T> {
        let values: Vec<T> = match self {
            BuiltinScorer::Sharpness => set.thumbs.iter().map(score_sharpness).collect(),
            BuiltinScorer::Colorfulness => set.thumbs.iter().map(score_colorfulness).collect(),
            BuiltinScorer::Exposure => set.thumbs.iter().map(score_exposure).collect(),
            BuiltinScorer::Composite => {
                let rasters: Vec<_> = set.thumbs.iter().map(|t| &t.pixels).collect();
                composite_scores(&rasters)
            }
        };
        let scores = set
            .thumbs
            .iter()
            .zip(values)
            .map(|(t, v)| (t.id.clone(), v))
            .collect();
        ScoreTable {
            scorer_id: self.id().to_string(),
            set_id: set.set_id.clone(),
            scores,
        }
    }
}

impl fmt::Display for BuiltinScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BuiltinScorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinScorer::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown built-in scorer `{s}`")))
    }
}

pub const EXTERNAL_PREFIX: &str = "external:";

/// Scorer ids starting with this carry popularity scores in [-5, 5].
pub const I2PA_PREFIX: &str = "external:i2pa";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerDescriptor {
    pub scorer_id: String,
    pub kind: ScorerKind,
    pub semantics: String,
}

impl ScorerDescriptor {
    /// Parses `heuristic.*` or `external:<name>` ids.
    pub fn parse(scorer_id: &str) -> Result<Self> {
        if let Some(name) = scorer_id.strip_prefix(EXTERNAL_PREFIX) {
            if name.is_empty() {
                return Err(Error::InvalidInput("external scorer needs a name".into()));
            }
            let semantics = if scorer_id.starts_with(I2PA_PREFIX) {
                "higher is better; popularity score expected in [-5, 5]"
            } else {
                "higher is better"
            };
            return Ok(ScorerDescriptor {
                scorer_id: scorer_id.to_string(),
                kind: ScorerKind::External,
                semantics: semantics.into(),
            });
        }
        let builtin: BuiltinScorer = scorer_id.parse()?;
        Ok(ScorerDescriptor {
            scorer_id: builtin.id().to_string(),
            kind: ScorerKind::Builtin,
            semantics: "higher is better".into(),
        })
    }

    pub fn builtin(&self) -> Option<BuiltinScorer> {
        self.scorer_id.parse().ok()
    }
}

/// Scores of one scorer over one nine-image set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScoreTable<T> {
    pub scorer_id: String,
    pub set_id: String,
    pub scores: BTreeMap<String, T>,
}

impl<T: Scalar> ScoreTable<T> {
    /// Builds a table whose domain is exactly `ids`.
    pub fn new(
        scorer_id: impl Into<String>,
        set_id: impl Into<String>,
        entries: impl IntoIterator<Item = (String, T)>,
        ids: &[String],
    ) -> Result<Self> {
        let mut scores = BTreeMap::new();
        for (id, v) in entries {
            if scores.contains_key(&id) {
                return Err(Error::DuplicateScore(id));
            }
            scores.insert(id, v);
        }
        let table = ScoreTable {
            scorer_id: scorer_id.into(),
            set_id: set_id.into(),
            scores,
        };
        table.validate(ids)?;
        Ok(table)
    }

    /// Checks that the table covers exactly `ids` with finite values.
    pub fn validate(&self, ids: &[String]) -> Result<()> {
        let expected: HashSet<&str> = ids.iter().map(String::as_str).collect();
        if let Some(extra) = self.scores.keys().find(|k| !expected.contains(k.as_str())) {
            return Err(Error::SetMismatch(format!(
                "score for `{extra}`, which is not in set `{}`",
                self.set_id
            )));
        }
        let missing: Vec<String> = ids
            .iter()
            .filter(|id| !self.scores.contains_key(*id))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteScores {
                set_id: self.set_id.clone(),
                missing,
            });
        }
        if let Some((id, v)) = self.scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidScore {
                id: id.clone(),
                reason: format!("{v} is not finite"),
            });
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<T> {
        self.scores.get(id).copied()
    }

    pub fn file_name(&self) -> String {
        score_file_name(&self.scorer_id)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        io::write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(dir: &Path, scorer_id: &str) -> Result<Self> {
        let path = dir.join(score_file_name(scorer_id));
        if !path.exists() {
            return Err(Error::NotFound(format!("{}", path.display())));
        }
        io::read_json(&path)
    }
}

pub fn score_file_name(scorer_id: &str) -> String {
    format!("scores.{scorer_id}.json")
}
