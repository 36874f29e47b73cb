//! Multi-round annotation service for alt-text re-alignment.
//!
//! A project is a set of image items plus a vendor list. Round 1 of every
//! item is its alt-text. Each later round is opened for the whole project
//! at once, assigns every item to a vendor (rotating, so with two vendors
//! each item goes to the other vendor than last round), and serves the
//! previous round's caption as the starting text. Submissions are accepted
//! only with the full guideline checklist confirmed and a recommended
//! starting prompt.
//!
//! State lives in memory and is persisted as an append-only JSONL event
//! log; [`Service::open`] replays and re-validates the log at startup.
//!
//! | Method | Path | Body / query |
//! |---|---|---|
//! | `GET` | `/health` | |
//! | `POST` | `/projects` | [`CreateProject`] |
//! | `GET` | `/projects`, `/projects/{id}` | |
//! | `POST` | `/projects/{id}/rounds` | [`OpenRound`] |
//! | `GET` | `/projects/{id}/tasks/next` | `?annotator=` |
//! | `POST` | `/assignments/{id}/submit` | [`Submission`] |
//! | `GET` | `/projects/{id}/stats` | |

mod checklist;
mod error;
mod http;
mod service;
mod state;
mod types;

pub use checklist::{complete as complete_checklist, unmet_keys, ChecklistItem, CHECKLIST};
pub use error::{Result, ServiceError, Violation};
pub use http::{router, serve, spawn, ApiError};
pub use service::{replay, Alignment, Service};
pub use state::{vendor_for, Event, State};
pub use types::{
    Assignment, AssignmentState, CreateProject, NextTask, OpenRound, Project, Submission,
    SubmitReceipt, TaskView,
};
