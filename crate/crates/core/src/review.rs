//! Human review of revised files.
//!
//! Each run lives in `<store>/runs/<id>/`: `meta.json`, `comparisons.json`
//! and an append-only `decisions.jsonl`. Effective state is a fold over the
//! log; nothing in it is rewritten.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::compare::{ComparisonReport, Decision};
use crate::error::{Error, Result};
use crate::orchestrator::mirror_tree;

const META_FILE: &str = "meta.json";
const COMPARISONS_FILE: &str = "comparisons.json";
const LOG_FILE: &str = "decisions.jsonl";
const FINAL_DIR: &str = "final";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Accept,
    Reject,
    Edit,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accept => "ACCEPT",
            Verdict::Reject => "REJECT",
            Verdict::Edit => "EDIT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub file_location: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub timestamp: String,
}

impl ReviewDecision {
    pub fn new(
        file_location: &str,
        verdict: Verdict,
        edited_content: Option<String>,
        note: Option<String>,
    ) -> Result<Self> {
        match (verdict, &edited_content) {
            (Verdict::Edit, None) => {
                return Err(Error::Validation("EDIT requires edited_content".into()))
            }
            (Verdict::Accept | Verdict::Reject, Some(_)) => {
                return Err(Error::Validation(format!(
                    "{} must not carry edited_content",
                    verdict.as_str()
                )))
            }
            _ => {}
        }
        Ok(ReviewDecision {
            file_location: file_location.to_string(),
            verdict,
            edited_content,
            note,
            timestamp: now(),
        })
    }

    fn as_decision(&self) -> Decision {
        match self.verdict {
            Verdict::Accept => Decision::Accepted,
            Verdict::Reject => Decision::Rejected,
            Verdict::Edit => Decision::Edited {
                content: self.edited_content.clone().unwrap_or_default(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogRecord {
    Decision(ReviewDecision),
    Applied { timestamp: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub id: String,
    pub label: String,
    pub created_at: String,
    pub original_root: PathBuf,
    pub revised_root: PathBuf,
    /// Require a decision on every file, not only flagged ones.
    pub review_all: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileStatus {
    pub file_location: String,
    pub flags: usize,
    pub decision: Decision,
}

impl FileStatus {
    pub fn is_pending(&self) -> bool {
        self.decision == Decision::Pending
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub files: Vec<FileStatus>,
    pub applied: bool,
    /// Files that must be decided before apply is allowed.
    pub blocking: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub label: String,
    pub created_at: String,
    pub files: usize,
    pub flagged: usize,
    pub pending: usize,
    pub applied: bool,
    pub review_all: bool,
}

/// File-backed review store. Writes are serialized through one lock.
#[derive(Debug)]
pub struct ReviewStore {
    root: PathBuf,
    lock: Mutex<()>,
}

impl ReviewStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let runs = root.join("runs");
        fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
        Ok(ReviewStore {
            root,
            lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn run_dir(&self, id: &str) -> Result<PathBuf> {
        let valid = !id.is_empty()
            && id != "."
            && id != ".."
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
        if !valid {
            return Err(Error::NotFound(format!("run {id:?}")));
        }
        Ok(self.root.join("runs").join(id))
    }

    /// Registers a run, replacing any earlier run with the same id.
    pub fn create_run(
        &self,
        id: &str,
        label: &str,
        original_root: &Path,
        revised_root: &Path,
        comparisons: &[ComparisonReport],
        review_all: bool,
    ) -> Result<RunSummary> {
        let _guard = self.lock.lock().expect("review lock");
        let dir = self.run_dir(id)?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let absolute = |p: &Path| p.canonicalize().map_err(|e| Error::io(p, e));
        let meta = RunMeta {
            id: id.to_string(),
            label: label.to_string(),
            created_at: now(),
            original_root: absolute(original_root)?,
            revised_root: absolute(revised_root)?,
            review_all,
        };
        let mut sorted = comparisons.to_vec();
        sorted.sort_by(|a, b| a.file_location.cmp(&b.file_location));
        write_json(&dir.join(META_FILE), &meta)?;
        write_json(&dir.join(COMPARISONS_FILE), &sorted)?;
        fs::write(dir.join(LOG_FILE), "").map_err(|e| Error::io(dir.join(LOG_FILE), e))?;
        drop(_guard);
        self.summary(id)
    }

    fn meta(&self, id: &str) -> Result<RunMeta> {
        let path = self.run_dir(id)?.join(META_FILE);
        if !path.is_file() {
            return Err(Error::NotFound(format!("run {id:?}")));
        }
        read_json(&path)
    }

    fn comparisons(&self, id: &str) -> Result<Vec<ComparisonReport>> {
        read_json(&self.run_dir(id)?.join(COMPARISONS_FILE))
    }

    fn log(&self, id: &str) -> Result<Vec<LogRecord>> {
        let path = self.run_dir(id)?.join(LOG_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }

    fn append(&self, id: &str, record: &LogRecord) -> Result<()> {
        let path = self.run_dir(id)?.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        file.write_all(line.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        file.sync_data().map_err(|e| Error::io(&path, e))
    }

    pub fn list_runs(&self) -> Result<Vec<RunSummary>> {
        let runs = self.root.join("runs");
        let mut ids = Vec::new();
        for entry in fs::read_dir(&runs).map_err(|e| Error::io(&runs, e))? {
            let entry = entry.map_err(|e| Error::io(&runs, e))?;
            if entry.path().join(META_FILE).is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        let mut out = ids
            .iter()
            .map(|id| self.summary(id))
            .collect::<Result<Vec<_>>>()?;
        out.sort_by(|a, b| (&a.created_at, &a.id).cmp(&(&b.created_at, &b.id)));
        Ok(out)
    }

    pub fn summary(&self, id: &str) -> Result<RunSummary> {
        let meta = self.meta(id)?;
        let state = self.state(id)?;
        Ok(RunSummary {
            id: meta.id,
            label: meta.label,
            created_at: meta.created_at,
            files: state.files.len(),
            flagged: state.files.iter().filter(|f| f.flags > 0).count(),
            pending: state.files.iter().filter(|f| f.is_pending()).count(),
            applied: state.applied,
            review_all: meta.review_all,
        })
    }

    /// Folds the decision log over the run's files.
    pub fn state(&self, id: &str) -> Result<RunState> {
        let meta = self.meta(id)?;
        let mut files: BTreeMap<String, FileStatus> = self
            .comparisons(id)?
            .into_iter()
            .map(|c| {
                let status = FileStatus {
                    file_location: c.file_location.clone(),
                    flags: c.flags.len(),
                    decision: Decision::Pending,
                };
                (c.file_location, status)
            })
            .collect();
        let mut applied = false;
        for record in self.log(id)? {
            match record {
                LogRecord::Decision(d) => {
                    if let Some(f) = files.get_mut(&d.file_location) {
                        f.decision = d.as_decision();
                    }
                }
                LogRecord::Applied { .. } => applied = true,
            }
        }
        let files: Vec<FileStatus> = files.into_values().collect();
        let blocking = files
            .iter()
            .filter(|f| f.is_pending() && (meta.review_all || f.flags > 0))
            .map(|f| f.file_location.clone())
            .collect();
        Ok(RunState {
            run_id: id.to_string(),
            files,
            applied,
            blocking,
        })
    }

    pub fn comparison(&self, id: &str, file_location: &str) -> Result<ComparisonReport> {
        let mut report = self
            .comparisons(id)?
            .into_iter()
            .find(|c| c.file_location == file_location)
            .ok_or_else(|| Error::NotFound(format!("file {file_location:?} in run {id:?}")))?;
        let state = self.state(id)?;
        if let Some(f) = state
            .files
            .iter()
            .find(|f| f.file_location == file_location)
        {
            report.decision = f.decision.clone();
        }
        Ok(report)
    }

    pub fn record_decision(&self, id: &str, decision: ReviewDecision) -> Result<RunState> {
        let _guard = self.lock.lock().expect("review lock");
        let state = self.state(id)?;
        if !state
            .files
            .iter()
            .any(|f| f.file_location == decision.file_location)
        {
            return Err(Error::NotFound(format!(
                "file {:?} in run {id:?}",
                decision.file_location
            )));
        }
        if state.applied {
            return Err(Error::Conflict(format!("run {id:?} is already applied")));
        }
        // Re-check the invariant for decisions built without `ReviewDecision::new`.
        ReviewDecision::new(
            &decision.file_location,
            decision.verdict,
            decision.edited_content.clone(),
            None,
        )?;
        self.append(id, &LogRecord::Decision(decision))?;
        self.state(id)
    }

    /// Writes the final tree and marks the run applied. Re-applying
    /// rebuilds the same tree.
    pub fn apply_run(&self, id: &str) -> Result<PathBuf> {
        let _guard = self.lock.lock().expect("review lock");
        let meta = self.meta(id)?;
        let state = self.state(id)?;
        if !state.blocking.is_empty() {
            return Err(Error::GateBlocked(state.blocking));
        }
        let final_root = self.run_dir(id)?.join(FINAL_DIR);
        mirror_tree(&meta.revised_root, &final_root)?;
        for file in &state.files {
            let target = final_root.join(&file.file_location);
            match &file.decision {
                Decision::Rejected => {
                    let original = meta.original_root.join(&file.file_location);
                    if original.is_file() {
                        fs::copy(&original, &target).map_err(|e| Error::io(&target, e))?;
                    } else if target.exists() {
                        fs::remove_file(&target).map_err(|e| Error::io(&target, e))?;
                    }
                }
                Decision::Edited { content } => {
                    fs::write(&target, content).map_err(|e| Error::io(&target, e))?;
                }
                Decision::Accepted | Decision::Pending => {}
            }
        }
        if !state.applied {
            self.append(id, &LogRecord::Applied { timestamp: now() })?;
        }
        Ok(final_root)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
