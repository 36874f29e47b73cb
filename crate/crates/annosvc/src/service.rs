use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, PoisonError, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use altogether_core::corpus::{Corpus, EmbeddingMatrix, RoundStats, TextEmbedder};
use altogether_core::io::read_jsonl;

use crate::error::{Result, ServiceError};
use crate::state::{Event, State};
use crate::types::{Assignment, CreateProject, NextTask, Project, Submission, SubmitReceipt};

/// Image embeddings plus a caption embedder, enabling the alignment
/// column of the round statistics.
#[derive(Clone)]
pub struct Alignment {
    pub embeddings: EmbeddingMatrix,
    pub embedder: Arc<dyn TextEmbedder>,
}

struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    fn append(&mut self, ev: &Event) -> Result<()> {
        let mut line = serde_json::to_vec(ev).map_err(std::io::Error::from)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// Thread-safe annotation service.
///
/// Reads take a shared lock on the in-memory state. Every mutation holds
/// the log lock from validation through commit: the event is checked
/// against the current state, appended (and synced) to the log, and only
/// then applied, so the log never contains an event the state rejected and
/// the state never runs ahead of the log.
pub struct Service {
    state: RwLock<State>,
    log: Mutex<Option<EventLog>>,
    alignment: Option<Alignment>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl Service {
    /// A service with no persistence.
    pub fn in_memory() -> Self {
        Service {
            state: RwLock::new(State::default()),
            log: Mutex::new(None),
            alignment: None,
        }
    }

    /// Open (or create) the event log at `path`, replaying and re-validating
    /// every event already in it.
    pub fn open(path: &Path) -> Result<Self> {
        let state = if path.exists() {
            replay(path)?
        } else {
            State::default()
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        log::info!(
            "event log {} opened with {} projects",
            path.display(),
            state.projects().len()
        );
        Ok(Service {
            state: RwLock::new(state),
            log: Mutex::new(Some(EventLog {
                path: path.to_path_buf(),
                file,
            })),
            alignment: None,
        })
    }

    pub fn with_alignment(mut self, alignment: Alignment) -> Self {
        self.alignment = Some(alignment);
        self
    }

    pub fn log_path(&self) -> Option<PathBuf> {
        self.log
            .lock()
            .unwrap_or_else(PoisonError::into_inner)
            .as_ref()
            .map(|l| l.path.clone())
    }

    fn read<T>(&self, f: impl FnOnce(&State) -> Result<T>) -> Result<T> {
        f(&self.state.read().unwrap_or_else(PoisonError::into_inner))
    }

    fn commit(&self, plan: impl FnOnce(&State) -> Result<Event>) -> Result<Event> {
        let mut log = self.log.lock().unwrap_or_else(PoisonError::into_inner);
        let ev = self.read(plan)?;
        if let Some(l) = log.as_mut() {
            l.append(&ev)?;
        }
        self.state
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .apply(&ev)?;
        Ok(ev)
    }

    pub fn create_project(&self, req: CreateProject) -> Result<Project> {
        let items = match (req.items, req.items_path) {
            (Some(items), None) => items,
            (None, Some(path)) => Corpus::ingest_pairs(&path)?.items().to_vec(),
            _ => {
                return Err(ServiceError::Invalid(
                    "give exactly one of items and items_path".into(),
                ))
            }
        };
        let ev = self.commit(|s| s.plan_create(&req.name, req.vendors, items))?;
        let Event::ProjectCreated { project_id, .. } = ev else {
            unreachable!("plan_create yields ProjectCreated")
        };
        self.project(&project_id)
    }

    pub fn open_round(&self, project_id: &str, round_no: u32) -> Result<Vec<Assignment>> {
        let ev = self.commit(|s| s.plan_open(project_id, round_no))?;
        let Event::RoundOpened { assignments, .. } = ev else {
            unreachable!("plan_open yields RoundOpened")
        };
        Ok(assignments)
    }

    pub fn next_task(&self, project_id: &str, annotator: &str) -> Result<NextTask> {
        self.read(|s| s.next_task(project_id, annotator))
    }

    /// Validate and store a submission. Of two concurrent submissions for
    /// the same assignment the first to commit wins; the other receives
    /// [`ServiceError::AlreadySubmitted`].
    pub fn submit(&self, assignment_id: &str, submission: Submission) -> Result<SubmitReceipt> {
        let ts = now();
        self.commit(|s| s.plan_submit(assignment_id, submission, ts))?;
        self.read(|s| {
            let a = s.assignment_view(assignment_id)?;
            let record = s
                .corpus(&a.project_id)?
                .round(&a.item_id, a.round_no)
                .cloned()
                .expect("record committed above");
            Ok(SubmitReceipt {
                assignment_id: assignment_id.to_string(),
                record,
            })
        })
    }

    pub fn project(&self, project_id: &str) -> Result<Project> {
        self.read(|s| s.project(project_id))
    }

    pub fn projects(&self) -> Vec<Project> {
        self.read(|s| Ok(s.projects())).unwrap_or_default()
    }

    pub fn assignments(&self, project_id: &str, round_no: u32) -> Result<Vec<Assignment>> {
        self.read(|s| s.assignments(project_id, round_no))
    }

    pub fn stats(&self, project_id: &str) -> Result<Vec<RoundStats>> {
        let alignment = self
            .alignment
            .as_ref()
            .map(|a| (&a.embeddings, a.embedder.as_ref() as &dyn TextEmbedder));
        self.read(|s| s.stats(project_id, alignment))
    }

    /// A snapshot of one project's corpus.
    pub fn corpus(&self, project_id: &str) -> Result<Corpus> {
        self.read(|s| s.corpus(project_id).cloned())
    }
}

/// Rebuild state from an event log, checking every event as if it were
/// being submitted fresh.
pub fn replay(path: &Path) -> Result<State> {
    let events = read_jsonl::<Event>(path).map_err(|e| match e {
        altogether_core::io::JsonlError::Io(e) => ServiceError::Io(e),
        altogether_core::io::JsonlError::Parse { line, source } => ServiceError::Replay {
            line,
            detail: source.to_string(),
        },
    })?;
    let mut state = State::default();
    for (line, ev) in events {
        let fail = |e: ServiceError| ServiceError::Replay {
            line,
            detail: e.to_string(),
        };
        state.check(&ev).map_err(fail)?;
        state.apply(&ev).map_err(fail)?;
    }
    Ok(state)
}
