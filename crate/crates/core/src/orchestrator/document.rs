use serde::{Deserialize, Serialize};

use crate::ids::{AssignmentId, Millis, TaskId, WorkerId};
use crate::instructions;
use crate::scaffold::StepKind;
use crate::submission::EmailSubmission;
use crate::tone::{taxonomy, Taxonomy, ToneTuple};

use super::state::{Assignment, AssignmentKind, AssignmentStatus, Pipeline, BALLOT_STAGE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotCandidates {
    pub a: String,
    pub b: String,
}

/// Everything a worker client needs to render the current step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDocument {
    pub assignment_id: AssignmentId,
    pub task_id: TaskId,
    pub worker_id: WorkerId,
    pub kind: AssignmentKind,
    pub stage: String,
    /// `None` once the assignment accepts nothing more.
    pub allowed_payload: Option<StepKind>,
    pub instructions: String,
    pub email: EmailSubmission,
    pub taxonomy: Taxonomy,
    pub deadline: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_tone: Option<ToneTuple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latest_draft: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<BallotCandidates>,
    pub refinement_required: bool,
}

impl TaskDocument {
    pub(crate) fn build(a: &Assignment, p: &Pipeline) -> Self {
        let refinement_required = a.kind == AssignmentKind::Ballot && p.config.iterations.refinement_enabled();
        let stage = a.stage();
        let open = a.status == AssignmentStatus::Live;
        let allowed_payload = match (&a.session, open) {
            (_, false) => None,
            (Some(s), true) => s.stage.expected_kind(),
            (None, true) => Some(StepKind::Vote),
        };
        let template = match stage {
            BALLOT_STAGE if refinement_required => "await_ballot_refine",
            other => other,
        };
        let candidates = match (a.kind, &p.pair) {
            (AssignmentKind::Ballot, Some(pair)) => Some(BallotCandidates {
                a: pair.a.improved_text.clone(),
                b: pair.b.improved_text.clone(),
            }),
            _ => None,
        };
        TaskDocument {
            assignment_id: a.assignment_id.clone(),
            task_id: a.task_id.clone(),
            worker_id: a.worker_id.clone(),
            kind: a.kind,
            stage: stage.to_string(),
            allowed_payload,
            instructions: instructions::render(template, &p.email).unwrap_or_default(),
            email: p.email.clone(),
            taxonomy: taxonomy(),
            deadline: a.deadline,
            current_tone: a.session.as_ref().and_then(|s| s.current_tone),
            latest_draft: a.session.as_ref().and_then(|s| s.drafts.last().cloned()),
            candidates,
            refinement_required,
        }
    }
}
