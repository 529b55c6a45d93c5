//! Bridge to model scorers living outside this process.
//!
//! Protocol: the scorer reads one `{"id": .., "path": ..}` object per line on
//! stdin and answers with one `{"id": .., "score": ..}` object per line on
//! stdout. A sidecar JSONL file with the answer shape can stand in for the
//! subprocess.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scoring::{ScoreTable, ScorerDescriptor, ScorerKind, I2PA_PREFIX};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Deserialize)]
struct ScoreLine {
    id: String,
    score: serde_json::Value,
}

#[derive(Debug, Clone)]
pub enum ExternalSource {
    /// Shell command run through `sh -c`.
    Command(String),
    /// JSONL file already holding the answers.
    Sidecar(PathBuf),
}

/// A score outside the range its scorer declares.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeWarning {
    pub id: String,
    pub score: f64,
    pub low: f64,
    pub high: f64,
}

impl std::fmt::Display for RangeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "score {} for `{}` lies outside [{}, {}]",
            self.score, self.id, self.low, self.high
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExternalScores<T> {
    pub table: ScoreTable<T>,
    pub warnings: Vec<RangeWarning>,
}

fn parse_line<T: Scalar>(lineno: usize, line: &str) -> Result<(String, T)> {
    let rec: ScoreLine = serde_json::from_str(line).map_err(|e| {
        Error::ScorerFailed(format!(
            "line {lineno} is not a score record ({e}): {line:?}"
        ))
    })?;
    let raw = match &rec.score {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => s.parse::<f64>().ok(),
        _ => None,
    };
    let raw = raw.ok_or_else(|| Error::InvalidScore {
        id: rec.id.clone(),
        reason: format!("{} is not a number", rec.score),
    })?;
    let value = T::from(raw).filter(|v| v.is_finite());
    match value {
        Some(v) if raw.is_finite() => Ok((rec.id, v)),
        _ => Err(Error::InvalidScore {
            id: rec.id,
            reason: format!("{raw} is not finite"),
        }),
    }
}

fn parse_output<T: Scalar>(text: &str) -> Result<Vec<(String, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(i + 1, l))
        .collect()
}

fn run_command(command: &str, requests: &[ScoreRequest]) -> Result<String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::ScorerFailed(format!("cannot start `{command}`: {e}")))?;

    let mut payload = Vec::new();
    for req in requests {
        serde_json::to_writer(&mut payload, req)?;
        payload.push(b'\n');
    }
    let mut stdin = child.stdin.take().expect("stdin piped");
    let writer = thread::spawn(move || {
        // A scorer may exit without draining stdin; a broken pipe is not our failure.
        let _ = stdin.write_all(&payload);
    });
    let output = child.wait_with_output()?;
    writer.join().expect("stdin writer panicked");

    if !output.status.success() {
        return Err(Error::ScorerFailed(format!(
            "`{command}` exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    String::from_utf8(output.stdout)
        .map_err(|_| Error::ScorerFailed(format!("`{command}` wrote non-UTF-8 output")))
}

fn range_for(scorer_id: &str) -> Option<(f64, f64)> {
    scorer_id.starts_with(I2PA_PREFIX).then_some((-5.0, 5.0))
}

/// Collects scores for `requests` from an external scorer.
pub fn run_external_scorer<T: Scalar>(
    desc: &ScorerDescriptor,
    source: &ExternalSource,
    set_id: &str,
    requests: &[ScoreRequest],
) -> Result<ExternalScores<T>> {
    if desc.kind != ScorerKind::External {
        return Err(Error::InvalidInput(format!(
            "`{}` is not an external scorer",
            desc.scorer_id
        )));
    }
    let text = match source {
        ExternalSource::Command(cmd) => run_command(cmd, requests)?,
        ExternalSource::Sidecar(path) => read_sidecar(path)?,
    };
    let entries = parse_output::<T>(&text)?;
    let ids: Vec<String> = requests.iter().map(|r| r.id.clone()).collect();
    let table = ScoreTable::new(desc.scorer_id.clone(), set_id, entries, &ids)?;

    let mut warnings = Vec::new();
    if let Some((low, high)) = range_for(&desc.scorer_id) {
        for (id, v) in &table.scores {
            let score = v.to_f64().unwrap_or(f64::NAN);
            if !(low..=high).contains(&score) {
                let w = RangeWarning {
                    id: id.clone(),
                    score,
                    low,
                    high,
                };
                log::warn!("{}: {w}", desc.scorer_id);
                warnings.push(w);
            }
        }
    }
    Ok(ExternalScores { table, warnings })
}

fn read_sidecar(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::ScorerFailed(format!("cannot read sidecar {}: {e}", path.display())))
}
