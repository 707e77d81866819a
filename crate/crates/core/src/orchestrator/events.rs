use serde::{Deserialize, Serialize};

use crate::consensus::{Ballot, CandidatePair, FinalSelection, PipelineResult};
use crate::ids::{AssignmentId, Millis, TaskId};
use crate::provider::WorkerProfile;
use crate::scaffold::{ScaffoldOutcome, StepPayload};
use crate::submission::EmailSubmission;

use super::config::PipelineConfig;
use super::state::AssignmentKind;

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: Millis,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    EmailSubmitted {
        task_id: TaskId,
        email: EmailSubmission,
        config: PipelineConfig,
    },
    TaskAssigned {
        assignment_id: AssignmentId,
        task_id: TaskId,
        worker: WorkerProfile,
        assignment_kind: AssignmentKind,
        deadline: Millis,
    },
    StepRecorded {
        assignment_id: AssignmentId,
        payload: StepPayload,
        payload_hash: String,
    },
    TaskCompleted {
        assignment_id: AssignmentId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outcome: Option<ScaffoldOutcome>,
    },
    TaskExpired {
        assignment_id: AssignmentId,
    },
    PairSelected {
        task_id: TaskId,
        pair: CandidatePair,
    },
    BallotRecorded {
        assignment_id: AssignmentId,
        ballot: Ballot,
    },
    ResultFinalized {
        task_id: TaskId,
        selection: FinalSelection,
        result: PipelineResult,
    },
    PipelineFailed {
        task_id: TaskId,
        reason: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::EmailSubmitted { .. } => "email_submitted",
            EventKind::TaskAssigned { .. } => "task_assigned",
            EventKind::StepRecorded { .. } => "step_recorded",
            EventKind::TaskCompleted { .. } => "task_completed",
            EventKind::TaskExpired { .. } => "task_expired",
            EventKind::PairSelected { .. } => "pair_selected",
            EventKind::BallotRecorded { .. } => "ballot_recorded",
            EventKind::ResultFinalized { .. } => "result_finalized",
            EventKind::PipelineFailed { .. } => "pipeline_failed",
        }
    }
}
