//! Loaded studies, sessions, and their on-disk state.
//!
//! Each bundle directory holds `study.json`, `media/`, `ballots.jsonl` and
//! `sessions.jsonl`. The data directory keeps `studies.json`, the list of
//! loaded bundles, so a restarted service picks them up again.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use ninegrid::arrange::VariantKey;
use ninegrid::study::{summarize, tally, BallotBox, StudyBundle, BALLOT_LOG};
use ninegrid::{Summary, TallyResult};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

pub const REGISTRY_FILE: &str = "studies.json";
pub const SESSION_LOG: &str = "sessions.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub study_id: String,
    pub questionnaire_index: usize,
    pub cursor: usize,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionRecord {
    session_id: String,
    questionnaire_index: usize,
    created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegistryEntry {
    study_id: String,
    bundle_path: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptionView {
    pub slot: u8,
    pub url: String,
}

/// What an annotator sees for one question. Carries no variant labels.
#[derive(Debug, Clone, Serialize)]
pub struct QuestionView {
    pub question_index: usize,
    pub options: Vec<OptionView>,
    pub progress: Progress,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnswerAck {
    pub question_index: usize,
    pub progress: Progress,
    pub completed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub study_id: String,
    pub questionnaire_index: usize,
    pub cursor: usize,
    pub total: usize,
    pub completed: bool,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TallyView {
    pub study_id: String,
    pub tally: TallyResult,
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyInfo {
    pub study_id: String,
    pub questionnaires: usize,
    pub questions_per: usize,
}

struct StudyState {
    ballots: BallotBox,
    sessions: HashMap<String, Session>,
    session_log: File,
}

/// One loaded bundle. All session work for a study runs under its lock,
/// which also serializes ballot-log appends. Vote counts are mirrored in
/// atomics so tally reads never wait on that lock.
pub struct StudyHandle {
    pub study_id: String,
    pub dir: PathBuf,
    questionnaires: usize,
    questions_per: usize,
    state: Mutex<StudyState>,
    /// Per-variant counts in `VariantKey::ALL` order.
    counts: [AtomicU64; 4],
}

fn variant_slot(key: VariantKey) -> usize {
    VariantKey::ALL
        .iter()
        .position(|k| *k == key)
        .expect("every variant is listed")
}

impl StudyHandle {
    fn open(dir: &Path) -> ninegrid::Result<Self> {
        let bundle = StudyBundle::load(dir)?;
        bundle.verify_media(dir)?;
        let study_id = bundle.study_id.clone();
        let (questionnaires, questions_per) = (bundle.questionnaires.len(), bundle.questions_per);
        let mut ballots = BallotBox::open(bundle, &dir.join(BALLOT_LOG))?;

        let session_path = dir.join(SESSION_LOG);
        let mut sessions = HashMap::new();
        for rec in read_session_log(&session_path)? {
            ballots.register_session(&rec.session_id, rec.questionnaire_index)?;
            let cursor = ballots.answered(&rec.session_id).unwrap_or(0);
            sessions.insert(
                rec.session_id.clone(),
                Session {
                    session_id: rec.session_id,
                    study_id: study_id.clone(),
                    questionnaire_index: rec.questionnaire_index,
                    cursor,
                    created_at: rec.created_at,
                },
            );
        }
        let session_log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&session_path)?;
        let replayed = tally(ballots.ballots())?;
        let counts = VariantKey::ALL.map(|k| AtomicU64::new(replayed.count(k)));
        Ok(StudyHandle {
            study_id,
            dir: dir.to_path_buf(),
            questionnaires,
            questions_per,
            state: Mutex::new(StudyState {
                ballots,
                sessions,
                session_log,
            }),
            counts,
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, StudyState> {
        self.state.lock().expect("study state lock poisoned")
    }

    pub fn info(&self) -> StudyInfo {
        StudyInfo {
            study_id: self.study_id.clone(),
            questionnaires: self.questionnaires,
            questions_per: self.questions_per,
        }
    }

    fn view(&self, s: &Session) -> SessionView {
        SessionView {
            session_id: s.session_id.clone(),
            study_id: s.study_id.clone(),
            questionnaire_index: s.questionnaire_index,
            cursor: s.cursor,
            total: self.questions_per,
            completed: s.cursor >= self.questions_per,
            created_at: s.created_at,
        }
    }

    /// New session on the next questionnaire in round-robin order.
    pub fn create_session(&self) -> ApiResult<SessionView> {
        let mut st = self.lock();
        let questionnaire_index = st.sessions.len() % self.questionnaires;
        let session = Session {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            study_id: self.study_id.clone(),
            questionnaire_index,
            cursor: 0,
            created_at: Utc::now(),
        };
        let mut line = serde_json::to_vec(&SessionRecord {
            session_id: session.session_id.clone(),
            questionnaire_index,
            created_at: session.created_at,
        })
        .map_err(ninegrid::Error::from)?;
        line.push(b'\n');
        st.session_log
            .write_all(&line)
            .and_then(|_| st.session_log.flush())
            .map_err(ninegrid::Error::from)?;
        st.ballots
            .register_session(&session.session_id, questionnaire_index)?;
        let view = self.view(&session);
        st.sessions.insert(session.session_id.clone(), session);
        Ok(view)
    }

    pub fn session(&self, session_id: &str) -> Option<SessionView> {
        self.lock().sessions.get(session_id).map(|s| self.view(s))
    }

    pub fn question(&self, session_id: &str, n: usize) -> ApiResult<QuestionView> {
        let st = self.lock();
        let session = st
            .sessions
            .get(session_id)
            .ok_or_else(|| ninegrid::Error::NotFound(format!("session `{session_id}`")))?;
        if session.cursor >= self.questions_per {
            return Err(ApiError::SessionCompleted(session_id.to_string()));
        }
        if n != session.cursor {
            return Err(ApiError::WrongQuestion {
                expected: session.cursor,
                got: n,
            });
        }
        let bundle = st.ballots.bundle();
        let question = bundle
            .question(session.questionnaire_index, n)
            .ok_or_else(|| ninegrid::Error::NotFound(format!("question {n}")))?;
        let quad = bundle.quad(&question.set_id).ok_or_else(|| {
            ninegrid::Error::BundleInvalid(format!("no quad for `{}`", question.set_id))
        })?;
        let options = question
            .options
            .iter()
            .enumerate()
            .map(|(i, key)| {
                let path = quad.path_of(*key).expect("quad holds all four variants");
                OptionView {
                    slot: i as u8 + 1,
                    url: format!("/media/{}/{}", self.study_id, path),
                }
            })
            .collect();
        Ok(QuestionView {
            question_index: n,
            options,
            progress: Progress {
                answered: session.cursor,
                total: self.questions_per,
            },
        })
    }

    pub fn answer(&self, session_id: &str, n: usize, slot: i64) -> ApiResult<AnswerAck> {
        let mut st = self.lock();
        let cursor = st
            .sessions
            .get(session_id)
            .ok_or_else(|| ninegrid::Error::NotFound(format!("session `{session_id}`")))?
            .cursor;
        if cursor >= self.questions_per {
            return Err(ApiError::SessionCompleted(session_id.to_string()));
        }
        if n > cursor {
            return Err(ApiError::WrongQuestion {
                expected: cursor,
                got: n,
            });
        }
        // n < cursor falls through to the ballot box, which reports already-answered.
        let ballot = st.ballots.record_ballot(session_id, n, slot, Utc::now())?;
        self.counts[variant_slot(ballot.resolved_variant)].fetch_add(1, Ordering::Release);
        let session = st.sessions.get_mut(session_id).expect("checked above");
        session.cursor += 1;
        Ok(AnswerAck {
            question_index: n,
            progress: Progress {
                answered: session.cursor,
                total: self.questions_per,
            },
            completed: session.cursor >= self.questions_per,
        })
    }

    pub fn tally(&self) -> ApiResult<TallyView> {
        let tally =
            TallyResult::from_counts(self.counts.each_ref().map(|c| c.load(Ordering::Acquire)));
        let summary = (tally.total > 0).then(|| summarize(&tally)).transpose()?;
        Ok(TallyView {
            study_id: self.study_id.clone(),
            tally,
            summary,
        })
    }
}

fn read_session_log(path: &Path) -> ninegrid::Result<Vec<SessionRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(rec) => out.push(rec),
            Err(e) => log::warn!("{}: skipping bad session record: {e}", path.display()),
        }
    }
    Ok(out)
}

/// Every study the service knows about.
pub struct Registry {
    data_dir: PathBuf,
    studies: RwLock<HashMap<String, Arc<StudyHandle>>>,
    sessions: RwLock<HashMap<String, String>>,
    load_lock: Mutex<()>,
}

impl Registry {
    /// Opens `data_dir`, reloading the studies recorded there.
    pub fn open(data_dir: &Path) -> ninegrid::Result<Self> {
        fs::create_dir_all(data_dir)?;
        let reg = Registry {
            data_dir: data_dir.to_path_buf(),
            studies: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            load_lock: Mutex::new(()),
        };
        let path = data_dir.join(REGISTRY_FILE);
        if path.exists() {
            let entries: Vec<RegistryEntry> = ninegrid::io::read_json(&path)?;
            for e in entries {
                match StudyHandle::open(&e.bundle_path) {
                    Ok(h) => reg.insert(h),
                    Err(err) => log::warn!("cannot reload study `{}`: {err}", e.study_id),
                }
            }
        }
        Ok(reg)
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    fn insert(&self, handle: StudyHandle) {
        let handle = Arc::new(handle);
        let ids: Vec<String> = handle.lock().sessions.keys().cloned().collect();
        let mut sessions = self.sessions.write().expect("lock poisoned");
        for id in ids {
            sessions.insert(id, handle.study_id.clone());
        }
        self.studies
            .write()
            .expect("lock poisoned")
            .insert(handle.study_id.clone(), handle);
    }

    fn persist(&self) -> ninegrid::Result<()> {
        let mut entries: Vec<RegistryEntry> = self
            .studies
            .read()
            .expect("lock poisoned")
            .values()
            .map(|h| RegistryEntry {
                study_id: h.study_id.clone(),
                bundle_path: h.dir.clone(),
            })
            .collect();
        entries.sort_by(|a, b| a.study_id.cmp(&b.study_id));
        let tmp = self.data_dir.join(format!("{REGISTRY_FILE}.tmp"));
        ninegrid::io::write_json(&tmp, &entries)?;
        fs::rename(&tmp, self.data_dir.join(REGISTRY_FILE))?;
        Ok(())
    }

    /// Loads a bundle directory (or its `study.json`). Idempotent per study id.
    pub fn load_study(&self, bundle_path: &Path) -> ApiResult<StudyInfo> {
        let dir = if bundle_path
            .file_name()
            .is_some_and(|n| n == ninegrid::study::STUDY_MANIFEST)
        {
            bundle_path.parent().unwrap_or(Path::new(".")).to_path_buf()
        } else {
            bundle_path.to_path_buf()
        };
        let dir = dir.canonicalize().map_err(|e| {
            ninegrid::Error::BundleInvalid(format!("{}: {e}", bundle_path.display()))
        })?;

        let _guard = self.load_lock.lock().expect("lock poisoned");
        let bundle = StudyBundle::load(&dir)?;
        if let Some(existing) = self.study(&bundle.study_id) {
            if existing.dir == dir {
                return Ok(existing.info());
            }
            return Err(ApiError::Conflict(format!(
                "study `{}` is already loaded from {}",
                bundle.study_id,
                existing.dir.display()
            )));
        }
        let handle = StudyHandle::open(&dir)?;
        let info = handle.info();
        self.insert(handle);
        self.persist()?;
        log::info!("loaded study `{}` from {}", info.study_id, dir.display());
        Ok(info)
    }

    pub fn study(&self, study_id: &str) -> Option<Arc<StudyHandle>> {
        self.studies
            .read()
            .expect("lock poisoned")
            .get(study_id)
            .cloned()
    }

    fn require_study(&self, study_id: &str) -> ApiResult<Arc<StudyHandle>> {
        self.study(study_id)
            .ok_or_else(|| ninegrid::Error::NotFound(format!("study `{study_id}`")).into())
    }

    pub fn create_session(&self, study_id: &str) -> ApiResult<SessionView> {
        let study = self.require_study(study_id)?;
        let view = study.create_session()?;
        self.sessions
            .write()
            .expect("lock poisoned")
            .insert(view.session_id.clone(), study_id.to_string());
        Ok(view)
    }

    pub fn session_study(&self, session_id: &str) -> ApiResult<Arc<StudyHandle>> {
        let study_id = self
            .sessions
            .read()
            .expect("lock poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ninegrid::Error::NotFound(format!("session `{session_id}`")))?;
        self.require_study(&study_id)
    }

    pub fn session(&self, session_id: &str) -> ApiResult<SessionView> {
        self.session_study(session_id)?
            .session(session_id)
            .ok_or_else(|| ninegrid::Error::NotFound(format!("session `{session_id}`")).into())
    }

    pub fn question(&self, session_id: &str, n: usize) -> ApiResult<QuestionView> {
        self.session_study(session_id)?.question(session_id, n)
    }

    pub fn answer(&self, session_id: &str, n: usize, slot: i64) -> ApiResult<AnswerAck> {
        self.session_study(session_id)?.answer(session_id, n, slot)
    }

    pub fn tally(&self, study_id: &str) -> ApiResult<TallyView> {
        self.require_study(study_id)?.tally()
    }

    /// Resolves a media path inside a study bundle, refusing anything outside `media/`.
    pub fn media_path(&self, study_id: &str, rel: &str) -> ApiResult<PathBuf> {
        let study = self.require_study(study_id)?;
        let rel_path = Path::new(rel);
        let safe = rel_path.starts_with(ninegrid::study::MEDIA_DIR)
            && rel_path
                .components()
                .all(|c| matches!(c, std::path::Component::Normal(_)));
        if !safe {
            return Err(ninegrid::Error::NotFound(rel.to_string()).into());
        }
        Ok(study.dir.join(rel_path))
    }
}
