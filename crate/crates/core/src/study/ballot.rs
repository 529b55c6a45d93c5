//! Ballots and the append-only ballot log.

use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::arrange::VariantKey;
use crate::error::{Error, Result};
use crate::study::StudyBundle;

/// One recorded forced choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub study_id: String,
    pub session_id: String,
    pub questionnaire_index: usize,
    pub question_index: usize,
    pub chosen_slot: u8,
    pub resolved_variant: VariantKey,
    pub timestamp: DateTime<Utc>,
}

/// Maps a slot choice to its variant through the stored permutation.
pub fn resolve_ballot(
    bundle: &StudyBundle,
    session_id: &str,
    questionnaire_index: usize,
    question_index: usize,
    chosen_slot: i64,
    timestamp: DateTime<Utc>,
) -> Result<Ballot> {
    let question = bundle
        .question(questionnaire_index, question_index)
        .ok_or_else(|| {
            Error::NotFound(format!(
                "question {question_index} of questionnaire {questionnaire_index}"
            ))
        })?;
    let slot = u8::try_from(chosen_slot).map_err(|_| Error::InvalidChoice(chosen_slot))?;
    let resolved_variant = question
        .resolve(slot)
        .ok_or(Error::InvalidChoice(chosen_slot))?;
    Ok(Ballot {
        study_id: bundle.study_id.clone(),
        session_id: session_id.to_string(),
        questionnaire_index,
        question_index,
        chosen_slot: slot,
        resolved_variant,
        timestamp,
    })
}

/// JSONL file of ballots; every append is flushed before returning.
#[derive(Debug)]
pub struct BallotLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl BallotLog {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| Error::Write {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(BallotLog {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, ballot: &Ballot) -> Result<()> {
        let mut line = serde_json::to_vec(ballot)?;
        line.push(b'\n');
        let mut file = self.file.lock().expect("ballot log lock poisoned");
        file.write_all(&line)
            .and_then(|_| file.flush())
            .map_err(|source| Error::Write {
                path: self.path.clone(),
                source,
            })
    }

    /// Reads every complete line; a torn final line from a crash is skipped.
    pub fn read_all(path: &Path) -> Result<Vec<Ballot>> {
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut reader = BufReader::new(File::open(path)?);
        let mut ballots = Vec::new();
        let mut line = String::new();
        let mut lineno = 0;
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            lineno += 1;
            if !line.ends_with('\n') {
                log::warn!("{}: ignoring unterminated line {lineno}", path.display());
                break;
            }
            if line.trim().is_empty() {
                continue;
            }
            let ballot = serde_json::from_str(&line).map_err(|e| {
                Error::InvalidInput(format!("{} line {lineno}: {e}", path.display()))
            })?;
            ballots.push(ballot);
        }
        Ok(ballots)
    }
}

#[derive(Debug, Clone)]
struct SessionProgress {
    questionnaire_index: usize,
    answered: BTreeSet<usize>,
}

/// Ballot recording for one study: duplicate detection plus the durable log.
#[derive(Debug)]
pub struct BallotBox {
    bundle: StudyBundle,
    log: BallotLog,
    sessions: HashMap<String, SessionProgress>,
    ballots: Vec<Ballot>,
}

impl BallotBox {
    /// Opens the log at `log_path`, replaying ballots already in it.
    pub fn open(bundle: StudyBundle, log_path: &Path) -> Result<Self> {
        let ballots = BallotLog::read_all(log_path)?;
        let mut sessions: HashMap<String, SessionProgress> = HashMap::new();
        for b in &ballots {
            if b.study_id != bundle.study_id {
                return Err(Error::MixedStudy(
                    bundle.study_id.clone(),
                    b.study_id.clone(),
                ));
            }
            sessions
                .entry(b.session_id.clone())
                .or_insert_with(|| SessionProgress {
                    questionnaire_index: b.questionnaire_index,
                    answered: BTreeSet::new(),
                })
                .answered
                .insert(b.question_index);
        }
        Ok(BallotBox {
            bundle,
            log: BallotLog::open(log_path)?,
            sessions,
            ballots,
        })
    }

    pub fn bundle(&self) -> &StudyBundle {
        &self.bundle
    }

    pub fn ballots(&self) -> &[Ballot] {
        &self.ballots
    }

    pub fn register_session(&mut self, session_id: &str, questionnaire_index: usize) -> Result<()> {
        if questionnaire_index >= self.bundle.questionnaires.len() {
            return Err(Error::NotFound(format!(
                "questionnaire {questionnaire_index}"
            )));
        }
        self.sessions
            .entry(session_id.to_string())
            .or_insert_with(|| SessionProgress {
                questionnaire_index,
                answered: BTreeSet::new(),
            });
        Ok(())
    }

    /// Number of answered questions in a session.
    pub fn answered(&self, session_id: &str) -> Option<usize> {
        self.sessions.get(session_id).map(|s| s.answered.len())
    }

    pub fn record_ballot(
        &mut self,
        session_id: &str,
        question_index: usize,
        chosen_slot: i64,
        timestamp: DateTime<Utc>,
    ) -> Result<Ballot> {
        let progress = self
            .sessions
            .get(session_id)
            .ok_or_else(|| Error::NotFound(format!("session `{session_id}`")))?;
        let ballot = resolve_ballot(
            &self.bundle,
            session_id,
            progress.questionnaire_index,
            question_index,
            chosen_slot,
            timestamp,
        )?;
        if progress.answered.contains(&question_index) {
            return Err(Error::AlreadyAnswered {
                session_id: session_id.to_string(),
                question_index,
            });
        }
        self.log.append(&ballot)?;
        self.sessions
            .get_mut(session_id)
            .expect("session checked above")
            .answered
            .insert(question_index);
        self.ballots.push(ballot.clone());
        Ok(ballot)
    }
}
