use std::collections::BTreeMap;
use std::path::PathBuf;

use altogether_core::corpus::{ImageItem, RoundRecord};
use serde::{Deserialize, Serialize};

use crate::checklist::ChecklistItem;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub name: String,
    pub item_ids: Vec<String>,
    pub vendors: Vec<String>,
    pub current_round: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentState {
    Open,
    Submitted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: String,
    pub project_id: String,
    pub round_no: u32,
    pub item_id: String,
    pub vendor: String,
    pub state: AssignmentState,
}

/// Body of `POST /projects`. Exactly one of `items` and `items_path` must
/// be given; `items_path` names an items JSONL file readable by the server.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateProject {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<Vec<ImageItem>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items_path: Option<PathBuf>,
    pub vendors: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OpenRound {
    pub round_no: u32,
}

/// Body of `POST /assignments/{id}/submit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub caption: String,
    pub checklist: BTreeMap<String, bool>,
    pub annotator: String,
}

/// Everything an annotator needs to work on one assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskView {
    pub assignment_id: String,
    pub project_id: String,
    pub round_no: u32,
    pub item_id: String,
    pub image_ref: String,
    pub alt_text: String,
    pub previous_caption: String,
    pub checklist: Vec<ChecklistItem>,
    pub starting_prompts: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextTask {
    Task { task: TaskView },
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitReceipt {
    pub assignment_id: String,
    pub record: RoundRecord,
}
