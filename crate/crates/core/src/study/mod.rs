//! Four-alternative forced-choice preference study.
//!
//! A study takes one [`VariantQuad`] per image set, partitions the sets into
//! questionnaires, and shuffles the four options of every question with a
//! seeded RNG. The resulting [`StudyBundle`] is written as `study.json` next
//! to a `media/` directory of content-addressed composites, so option URLs do
//! not leak which variant they show.

pub mod ballot;
pub mod tally;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arrange::{build_four_layouts, VariantKey};
use crate::compose::{compose_grid, Composite};
use crate::error::{Error, Result};
use crate::io;
use crate::preprocess::ThumbnailSet;
use crate::scalar::Scalar;
use crate::scoring::ScoreTable;

pub use ballot::{resolve_ballot, Ballot, BallotBox, BallotLog};
pub use tally::{summarize, tally, Summary, TallyResult, VariantCount};

pub const STUDY_MANIFEST: &str = "study.json";
pub const BALLOT_LOG: &str = "ballots.jsonl";
pub const QUAD_MANIFEST: &str = "quad.json";
pub const MEDIA_DIR: &str = "media";

/// The four composites of one image set.
#[derive(Debug, Clone)]
pub struct VariantQuad {
    pub set_id: String,
    pub variants: BTreeMap<VariantKey, Composite>,
}

/// Composes all four variants of `set`.
pub fn build_variants<T: Scalar>(
    set: &ThumbnailSet,
    aesthetic: &ScoreTable<T>,
    content: &ScoreTable<T>,
) -> Result<VariantQuad> {
    let ids = set.ids();
    aesthetic.validate(&ids)?;
    content.validate(&ids)?;
    let mut variants = BTreeMap::new();
    for (key, layout) in build_four_layouts(aesthetic, content, &ids)? {
        variants.insert(key, compose_grid(set, &layout)?);
    }
    Ok(VariantQuad {
        set_id: set.set_id.clone(),
        variants,
    })
}

impl VariantQuad {
    /// Writes the composites under their conventional names in `dir`, plus `quad.json`.
    pub fn save(&self, dir: &Path) -> Result<QuadRef> {
        fs::create_dir_all(dir)?;
        let mut variants = Vec::with_capacity(4);
        for (key, composite) in &self.variants {
            let name = composite.file_name();
            io::write_png(&composite.pixels, &dir.join(&name))?;
            variants.push(VariantRef {
                scorer: key.scorer,
                strategy: key.strategy,
                scorer_id: composite.scorer_id.clone(),
                path: name,
            });
        }
        let quad = QuadRef {
            set_id: self.set_id.clone(),
            variants,
        };
        io::write_json(&dir.join(QUAD_MANIFEST), &quad)?;
        Ok(quad)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantRef {
    pub scorer: crate::arrange::ScorerRole,
    pub strategy: crate::arrange::Strategy,
    pub scorer_id: String,
    /// Relative to the directory holding the manifest.
    pub path: String,
}

impl VariantRef {
    pub fn key(&self) -> VariantKey {
        VariantKey::new(self.scorer, self.strategy)
    }
}

/// On-disk reference to a quad's four composites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadRef {
    pub set_id: String,
    pub variants: Vec<VariantRef>,
}

impl QuadRef {
    pub fn load(path: &Path) -> Result<Self> {
        let quad: QuadRef = io::read_json(path)?;
        quad.check()?;
        Ok(quad)
    }

    fn check(&self) -> Result<()> {
        let keys: HashSet<VariantKey> = self.variants.iter().map(VariantRef::key).collect();
        if self.variants.len() != 4 || keys.len() != 4 {
            return Err(Error::BundleInvalid(format!(
                "set `{}` must have the four distinct variants",
                self.set_id
            )));
        }
        Ok(())
    }

    pub fn path_of(&self, key: VariantKey) -> Option<&str> {
        self.variants
            .iter()
            .find(|v| v.key() == key)
            .map(|v| v.path.as_str())
    }

    /// Copies the composites into `<bundle_dir>/media/` under content-hash
    /// names and returns the rewritten reference.
    pub fn import(&self, base: &Path, bundle_dir: &Path) -> Result<QuadRef> {
        self.check()?;
        let media = bundle_dir.join(MEDIA_DIR);
        fs::create_dir_all(&media).map_err(|source| Error::Write {
            path: media.clone(),
            source,
        })?;
        let mut variants = Vec::with_capacity(4);
        for v in &self.variants {
            let bytes = fs::read(base.join(&v.path))?;
            let digest = hex::encode(Sha256::digest(&bytes));
            let rel = format!("{MEDIA_DIR}/{}.png", &digest[..32]);
            let dest = bundle_dir.join(&rel);
            if !dest.exists() {
                fs::write(&dest, &bytes).map_err(|source| Error::Write {
                    path: dest.clone(),
                    source,
                })?;
            }
            variants.push(VariantRef {
                path: rel,
                ..v.clone()
            });
        }
        Ok(QuadRef {
            set_id: self.set_id.clone(),
            variants,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub set_id: String,
    /// `options[s]` is the variant shown in slot `s + 1`.
    pub options: [VariantKey; 4],
}

impl Question {
    pub fn resolve(&self, slot: u8) -> Option<VariantKey> {
        (1..=4)
            .contains(&slot)
            .then(|| self.options[slot as usize - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub index: usize,
    pub questions: Vec<Question>,
}

/// Contents of `study.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyBundle {
    pub study_id: String,
    pub seed: u64,
    pub questions_per: usize,
    pub quads: Vec<QuadRef>,
    pub questionnaires: Vec<Questionnaire>,
}

/// Seeded partition of `quads` into questionnaires with shuffled options.
pub fn build_study(
    study_id: &str,
    quads: &[QuadRef],
    n_questionnaires: usize,
    questions_per: usize,
    seed: u64,
) -> Result<StudyBundle> {
    if n_questionnaires == 0 || questions_per == 0 {
        return Err(Error::InvalidInput(
            "a study needs at least one questionnaire and one question".into(),
        ));
    }
    let needed = n_questionnaires * questions_per;
    if quads.len() < needed {
        return Err(Error::InsufficientSets {
            needed,
            available: quads.len(),
        });
    }
    let mut seen = HashSet::new();
    for q in quads {
        q.check()?;
        if !seen.insert(q.set_id.as_str()) {
            return Err(Error::DuplicateId(q.set_id.clone()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = (0..quads.len()).collect();
    picks.shuffle(&mut rng);
    picks.truncate(needed);

    let questionnaires = picks
        .chunks(questions_per)
        .enumerate()
        .map(|(index, chunk)| Questionnaire {
            index,
            questions: chunk
                .iter()
                .map(|&i| {
                    let mut options = VariantKey::ALL;
                    options.shuffle(&mut rng);
                    Question {
                        set_id: quads[i].set_id.clone(),
                        options,
                    }
                })
                .collect(),
        })
        .collect();

    Ok(StudyBundle {
        study_id: study_id.to_string(),
        seed,
        questions_per,
        quads: picks.iter().map(|&i| quads[i].clone()).collect(),
        questionnaires,
    })
}

impl StudyBundle {
    pub fn question(&self, questionnaire: usize, n: usize) -> Option<&Question> {
        self.questionnaires.get(questionnaire)?.questions.get(n)
    }

    pub fn quad(&self, set_id: &str) -> Option<&QuadRef> {
        self.quads.iter().find(|q| q.set_id == set_id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(STUDY_MANIFEST);
        fs::write(&path, self.to_json()?).map_err(|source| Error::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    /// Reads and validates `<dir>/study.json` without touching media.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(STUDY_MANIFEST);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::BundleInvalid(format!("{}: {e}", path.display())))?;
        let bundle: StudyBundle = serde_json::from_str(&text)
            .map_err(|e| Error::BundleInvalid(format!("{}: {e}", path.display())))?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::BundleInvalid(m));
        let mut used = HashSet::new();
        for (i, qn) in self.questionnaires.iter().enumerate() {
            if qn.index != i {
                return invalid(format!("questionnaire {i} is labelled {}", qn.index));
            }
            if qn.questions.len() != self.questions_per {
                return invalid(format!(
                    "questionnaire {i} has {} questions, expected {}",
                    qn.questions.len(),
                    self.questions_per
                ));
            }
            for q in &qn.questions {
                let distinct: HashSet<_> = q.options.iter().collect();
                if distinct.len() != 4 {
                    return invalid(format!("set `{}` has a bad option permutation", q.set_id));
                }
                if !used.insert(q.set_id.as_str()) {
                    return invalid(format!("set `{}` appears twice", q.set_id));
                }
                if self.quad(&q.set_id).is_none() {
                    return invalid(format!("set `{}` has no composites", q.set_id));
                }
            }
        }
        for quad in &self.quads {
            quad.check()?;
            for v in &quad.variants {
                let p = Path::new(&v.path);
                if p.is_absolute()
                    || p.components()
                        .any(|c| matches!(c, std::path::Component::ParentDir))
                {
                    return invalid(format!("media path `{}` escapes the bundle", v.path));
                }
            }
        }
        Ok(())
    }

    /// Errors if a referenced composite is missing under `dir`.
    pub fn verify_media(&self, dir: &Path) -> Result<()> {
        for quad in &self.quads {
            for v in &quad.variants {
                if !dir.join(&v.path).is_file() {
                    return Err(Error::BundleInvalid(format!(
                        "missing composite `{}` for set `{}`",
                        v.path, quad.set_id
                    )));
                }
            }
        }
        Ok(())
    }
}
