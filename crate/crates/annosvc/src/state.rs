use std::collections::{BTreeMap, BTreeSet, HashMap};

use altogether_core::corpus::{
    round_stats, Corpus, EmbeddingMatrix, ImageItem, RoundStats, TextEmbedder,
};
use altogether_core::textproc::{starting_prompt_check, STARTING_PROMPTS};
use serde::{Deserialize, Serialize};

use crate::checklist::{unmet_keys, CHECKLIST};
use crate::error::{Result, ServiceError, Violation};
use crate::types::{Assignment, AssignmentState, NextTask, Project, Submission, TaskView};

/// A committed state change. The event log is a sequence of these, and the
/// in-memory state is exactly their replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ProjectCreated {
        project_id: String,
        name: String,
        vendors: Vec<String>,
        items: Vec<ImageItem>,
    },
    RoundOpened {
        project_id: String,
        round_no: u32,
        assignments: Vec<Assignment>,
    },
    Submitted {
        assignment_id: String,
        submission: Submission,
        ts: f64,
    },
}

#[derive(Debug, Clone)]
struct ProjectState {
    project: Project,
    corpus: Corpus,
    assignments: Vec<Assignment>,
}

impl ProjectState {
    fn pending(&self, round: u32) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|a| a.round_no == round && a.state == AssignmentState::Open)
            .map(|a| a.item_id.clone())
            .collect()
    }
}

/// Vendor for the item at `index` in round `round` (2 or later): items
/// start split across vendors and every round shifts each item to the next
/// vendor, so with two vendors each item alternates.
pub fn vendor_for(vendors: &[String], index: usize, round: u32) -> &str {
    &vendors[(index + round as usize - 2) % vendors.len()]
}

/// Projects, their corpora and assignments.
#[derive(Debug, Clone, Default)]
pub struct State {
    projects: BTreeMap<String, ProjectState>,
    assignment_index: HashMap<String, (String, usize)>,
}

impl State {
    fn project_state(&self, id: &str) -> Result<&ProjectState> {
        self.projects
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("project {id}")))
    }

    fn assignment(&self, id: &str) -> Result<(&ProjectState, &Assignment)> {
        let (pid, i) = self
            .assignment_index
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("assignment {id}")))?;
        let p = &self.projects[pid];
        Ok((p, &p.assignments[*i]))
    }

    pub fn assignment_view(&self, id: &str) -> Result<Assignment> {
        Ok(self.assignment(id)?.1.clone())
    }

    pub fn project(&self, id: &str) -> Result<Project> {
        Ok(self.project_state(id)?.project.clone())
    }

    pub fn projects(&self) -> Vec<Project> {
        self.projects.values().map(|p| p.project.clone()).collect()
    }

    pub fn corpus(&self, project_id: &str) -> Result<&Corpus> {
        Ok(&self.project_state(project_id)?.corpus)
    }

    pub fn assignments(&self, project_id: &str, round_no: u32) -> Result<Vec<Assignment>> {
        Ok(self
            .project_state(project_id)?
            .assignments
            .iter()
            .filter(|a| a.round_no == round_no)
            .cloned()
            .collect())
    }

    pub fn plan_create(
        &self,
        name: &str,
        vendors: Vec<String>,
        items: Vec<ImageItem>,
    ) -> Result<Event> {
        let ev = Event::ProjectCreated {
            project_id: format!("p{}", self.projects.len() + 1),
            name: name.to_string(),
            vendors,
            items,
        };
        self.check(&ev)?;
        Ok(ev)
    }

    pub fn plan_open(&self, project_id: &str, round_no: u32) -> Result<Event> {
        let p = self.project_state(project_id)?;
        let assignments = p
            .project
            .item_ids
            .iter()
            .enumerate()
            .map(|(i, item)| Assignment {
                id: format!("{project_id}-r{round_no}-{}", i + 1),
                project_id: project_id.to_string(),
                round_no,
                item_id: item.clone(),
                vendor: vendor_for(&p.project.vendors, i, round_no.max(2)).to_string(),
                state: AssignmentState::Open,
            })
            .collect();
        let ev = Event::RoundOpened {
            project_id: project_id.to_string(),
            round_no,
            assignments,
        };
        self.check(&ev)?;
        Ok(ev)
    }

    pub fn plan_submit(
        &self,
        assignment_id: &str,
        submission: Submission,
        ts: f64,
    ) -> Result<Event> {
        let ev = Event::Submitted {
            assignment_id: assignment_id.to_string(),
            submission,
            ts,
        };
        self.check(&ev)?;
        Ok(ev)
    }

    /// Validate an event against the current state without applying it.
    /// Replay runs every logged event through this, so a log containing a
    /// submission that breaks the checklist or prompt rules is refused.
    pub fn check(&self, ev: &Event) -> Result<()> {
        match ev {
            Event::ProjectCreated {
                project_id,
                name,
                vendors,
                items,
            } => {
                if name.trim().is_empty() {
                    return Err(ServiceError::Invalid(
                        "project name must not be empty".into(),
                    ));
                }
                if self.projects.values().any(|p| &p.project.name == name) {
                    return Err(ServiceError::ProjectExists(name.clone()));
                }
                if self.projects.contains_key(project_id) {
                    return Err(ServiceError::Invalid(format!(
                        "project id {project_id} is taken"
                    )));
                }
                if vendors.is_empty() || vendors.iter().any(|v| v.trim().is_empty()) {
                    return Err(ServiceError::Invalid(
                        "vendor list must be non-empty names".into(),
                    ));
                }
                if vendors.iter().collect::<BTreeSet<_>>().len() != vendors.len() {
                    return Err(ServiceError::Invalid(
                        "vendor names must be distinct".into(),
                    ));
                }
                if items.is_empty() {
                    return Err(ServiceError::Invalid(
                        "a project needs at least one item".into(),
                    ));
                }
                Corpus::from_items(items.iter().cloned())?;
                Ok(())
            }
            Event::RoundOpened {
                project_id,
                round_no,
                assignments,
            } => {
                let p = self.project_state(project_id)?;
                let current = p.project.current_round;
                if *round_no != current + 1 {
                    return Err(ServiceError::RoundSequence {
                        project: project_id.clone(),
                        current,
                        requested: *round_no,
                    });
                }
                let pending = p.pending(current);
                if !pending.is_empty() {
                    return Err(ServiceError::RoundIncomplete {
                        round: current,
                        pending,
                    });
                }
                let expected = p.project.item_ids.len();
                let well_formed = assignments.len() == expected
                    && assignments.iter().enumerate().all(|(i, a)| {
                        a.project_id == *project_id
                            && a.round_no == *round_no
                            && a.item_id == p.project.item_ids[i]
                            && a.vendor == vendor_for(&p.project.vendors, i, *round_no)
                            && a.state == AssignmentState::Open
                            && !self.assignment_index.contains_key(&a.id)
                    });
                if !well_formed {
                    return Err(ServiceError::Invalid(format!(
                        "round {round_no} assignments do not follow the vendor rotation"
                    )));
                }
                Ok(())
            }
            Event::Submitted {
                assignment_id,
                submission,
                ts,
            } => {
                let (p, a) = self.assignment(assignment_id)?;
                if a.state == AssignmentState::Submitted {
                    return Err(ServiceError::AlreadySubmitted(assignment_id.clone()));
                }
                let violations = submission_violations(a, submission);
                if !violations.is_empty() {
                    return Err(ServiceError::Rejected(violations));
                }
                p.corpus.prepare_round(
                    &a.item_id,
                    a.round_no,
                    &submission.caption,
                    &submission.annotator,
                    *ts,
                )?;
                Ok(())
            }
        }
    }

    /// Apply an event that has passed [`State::check`].
    pub fn apply(&mut self, ev: &Event) -> Result<()> {
        match ev {
            Event::ProjectCreated {
                project_id,
                name,
                vendors,
                items,
            } => {
                let corpus = Corpus::from_items(items.iter().cloned())?;
                let project = Project {
                    id: project_id.clone(),
                    name: name.clone(),
                    item_ids: items.iter().map(|i| i.id.clone()).collect(),
                    vendors: vendors.clone(),
                    current_round: 1,
                };
                self.projects.insert(
                    project_id.clone(),
                    ProjectState {
                        project,
                        corpus,
                        assignments: Vec::new(),
                    },
                );
            }
            Event::RoundOpened {
                project_id,
                round_no,
                assignments,
            } => {
                let p = self
                    .projects
                    .get_mut(project_id)
                    .ok_or_else(|| ServiceError::NotFound(format!("project {project_id}")))?;
                for a in assignments {
                    self.assignment_index
                        .insert(a.id.clone(), (project_id.clone(), p.assignments.len()));
                    p.assignments.push(a.clone());
                }
                p.project.current_round = *round_no;
            }
            Event::Submitted {
                assignment_id,
                submission,
                ts,
            } => {
                let (pid, i) = self
                    .assignment_index
                    .get(assignment_id)
                    .cloned()
                    .ok_or_else(|| ServiceError::NotFound(format!("assignment {assignment_id}")))?;
                let p = self.projects.get_mut(&pid).expect("indexed project exists");
                let a = &mut p.assignments[i];
                p.corpus.record_round_at(
                    &a.item_id,
                    a.round_no,
                    &submission.caption,
                    &submission.annotator,
                    *ts,
                )?;
                a.state = AssignmentState::Submitted;
            }
        }
        Ok(())
    }

    /// The first open assignment of the current round held by `annotator`
    /// (a vendor name), in item order. Repeated calls return the same task
    /// until it is submitted.
    pub fn next_task(&self, project_id: &str, annotator: &str) -> Result<NextTask> {
        let p = self.project_state(project_id)?;
        let Some(a) = p
            .assignments
            .iter()
            .find(|a| a.state == AssignmentState::Open && a.vendor == annotator)
        else {
            return Ok(NextTask::Empty);
        };
        let item = p
            .corpus
            .get(&a.item_id)
            .expect("assignment item is in the corpus");
        let previous = p
            .corpus
            .round(&a.item_id, a.round_no - 1)
            .expect("previous round is complete before a round opens");
        Ok(NextTask::Task {
            task: TaskView {
                assignment_id: a.id.clone(),
                project_id: project_id.to_string(),
                round_no: a.round_no,
                item_id: a.item_id.clone(),
                image_ref: item.image_ref.clone(),
                alt_text: item.alt_text.clone(),
                previous_caption: previous.caption.clone(),
                checklist: CHECKLIST.to_vec(),
                starting_prompts: STARTING_PROMPTS.to_vec(),
            },
        })
    }

    /// Round statistics for every completed round, oldest first.
    pub fn stats(
        &self,
        project_id: &str,
        alignment: Option<(&EmbeddingMatrix, &dyn TextEmbedder)>,
    ) -> Result<Vec<RoundStats>> {
        let p = self.project_state(project_id)?;
        (1..=p.project.current_round)
            .filter(|&r| p.pending(r).is_empty())
            .map(|r| Ok(round_stats(&p.corpus, r, alignment)?))
            .collect()
    }
}

fn submission_violations(a: &Assignment, s: &Submission) -> Vec<Violation> {
    let mut out: Vec<Violation> = unmet_keys(&s.checklist)
        .into_iter()
        .map(|key| {
            let detail = match s.checklist.get(&key) {
                Some(false) => "step not confirmed",
                Some(true) => "not a checklist step",
                None => "step missing",
            };
            Violation {
                kind: "checklist",
                key,
                detail: detail.into(),
            }
        })
        .collect();
    if !starting_prompt_check(&s.caption).is_accepted() {
        out.push(Violation {
            kind: "starting_prompt",
            key: "caption".into(),
            detail: format!(
                "caption must open with one of: {}",
                STARTING_PROMPTS.join("; ")
            ),
        });
    }
    if s.annotator != a.vendor {
        out.push(Violation {
            kind: "annotator",
            key: "annotator".into(),
            detail: format!(
                "assignment {} belongs to {:?}, not {:?}",
                a.id, a.vendor, s.annotator
            ),
        });
    }
    out
}
