//! Orchestrator state and the single fold that builds it from events.
//!
//! Live command handling and replay both go through [`OrchestratorState::apply`],
//! so a state rebuilt from a log is the state that wrote it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{Ballot, CandidatePair, FinalSelection, PipelineResult, PANEL_SIZE};
use crate::ids::{AssignmentId, Millis, TaskId, WorkerId};
use crate::scaffold::{self, ScaffoldOutcome, ScaffoldTaskState, StepPayload};
use crate::submission::EmailSubmission;

use super::config::PipelineConfig;
use super::events::{Event, EventKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("corrupt event log at seq {seq}: {reason}")]
pub struct CorruptLog {
    pub seq: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentKind {
    Scaffold,
    Ballot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStatus {
    Live,
    Completed,
    Expired,
}

/// What a worker gets back for an accepted step. Stored so an identical
/// retry can be answered with the original.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepAck {
    pub assignment_id: AssignmentId,
    pub task_id: TaskId,
    pub step_seq: u64,
    pub payload_hash: String,
    /// Stage the assignment moved to.
    pub stage: String,
    pub assignment_complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub assignment_id: AssignmentId,
    pub task_id: TaskId,
    pub worker_id: WorkerId,
    pub kind: AssignmentKind,
    pub issued_at: Millis,
    pub deadline: Millis,
    pub status: AssignmentStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<ScaffoldTaskState>,
    pub acks: Vec<StepAck>,
}

pub const BALLOT_STAGE: &str = "await_ballot";
pub const DONE_STAGE: &str = "done";

impl Assignment {
    pub fn stage(&self) -> &'static str {
        match (&self.session, self.status) {
            (Some(s), _) => s.stage.as_str(),
            (None, AssignmentStatus::Completed) => DONE_STAGE,
            (None, _) => BALLOT_STAGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum PipelineState {
    Submitted,
    Scaffolding { completed: u8 },
    PairSelected,
    Balloting { completed: u8 },
    Complete,
    Failed { reason: String },
}

impl PipelineState {
    pub fn label(&self) -> &'static str {
        match self {
            PipelineState::Submitted => "submitted",
            PipelineState::Scaffolding { .. } => "scaffolding",
            PipelineState::PairSelected => "pair_selected",
            PipelineState::Balloting { .. } => "balloting",
            PipelineState::Complete => "complete",
            PipelineState::Failed { .. } => "failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, PipelineState::Complete | PipelineState::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: String,
    pub at: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStatus {
    pub task_id: TaskId,
    #[serde(flatten)]
    pub state: PipelineState,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub task_id: TaskId,
    pub email: EmailSubmission,
    pub config: PipelineConfig,
    pub state: PipelineState,
    pub transitions: Vec<Transition>,
    /// Everyone ever assigned to this email, in either phase.
    pub workers: BTreeSet<WorkerId>,
    pub assignments: Vec<AssignmentId>,
    pub outcomes: Vec<ScaffoldOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<CandidatePair>,
    pub ballots: Vec<Ballot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<FinalSelection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<PipelineResult>,
    pub expirations: u32,
    pub event_count: u64,
}

impl Pipeline {
    pub fn status(&self) -> PipelineStatus {
        PipelineStatus {
            task_id: self.task_id.clone(),
            state: self.state.clone(),
            transitions: self.transitions.clone(),
        }
    }

    fn enter(&mut self, state: PipelineState, at: Millis) {
        if self.state.label() != state.label() {
            self.transitions.push(Transition {
                state: state.label().to_string(),
                at,
            });
        }
        self.state = state;
    }

    /// The assignment kind currently accepting workers, if any.
    pub fn open_phase(&self) -> Option<AssignmentKind> {
        match self.state {
            PipelineState::Scaffolding { .. } => Some(AssignmentKind::Scaffold),
            PipelineState::PairSelected | PipelineState::Balloting { .. } => Some(AssignmentKind::Ballot),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OrchestratorState {
    pub last_seq: u64,
    pub tasks_issued: u64,
    pub assignments_issued: u64,
    pub pipelines: BTreeMap<TaskId, Pipeline>,
    pub assignments: BTreeMap<AssignmentId, Assignment>,
}

impl OrchestratorState {
    /// Serialized form used for snapshots and equality checks.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    /// Unfilled slots of the pipeline's open phase.
    pub fn open_slots(&self, pipeline: &Pipeline) -> usize {
        let Some(kind) = pipeline.open_phase() else {
            return 0;
        };
        let taken = pipeline
            .assignments
            .iter()
            .filter_map(|id| self.assignments.get(id))
            .filter(|a| a.kind == kind && a.status != AssignmentStatus::Expired)
            .count();
        PANEL_SIZE.saturating_sub(taken)
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), CorruptLog> {
        let corrupt = |reason: String| CorruptLog {
            seq: event.seq,
            reason,
        };
        if event.seq != self.last_seq + 1 {
            return Err(corrupt(format!("expected seq {}", self.last_seq + 1)));
        }
        let at = event.at;

        match &event.kind {
            EventKind::EmailSubmitted {
                task_id,
                email,
                config,
            } => {
                if self.pipelines.contains_key(task_id) {
                    return Err(corrupt(format!("duplicate task {task_id}")));
                }
                let mut p = Pipeline {
                    task_id: task_id.clone(),
                    email: email.clone(),
                    config: config.clone(),
                    state: PipelineState::Submitted,
                    transitions: vec![Transition {
                        state: PipelineState::Submitted.label().to_string(),
                        at,
                    }],
                    workers: BTreeSet::new(),
                    assignments: Vec::new(),
                    outcomes: Vec::new(),
                    pair: None,
                    ballots: Vec::new(),
                    selection: None,
                    result: None,
                    expirations: 0,
                    event_count: 1,
                };
                // slots open immediately
                p.enter(PipelineState::Scaffolding { completed: 0 }, at);
                self.pipelines.insert(task_id.clone(), p);
                self.tasks_issued += 1;
            }

            EventKind::TaskAssigned {
                assignment_id,
                task_id,
                worker,
                assignment_kind,
                deadline,
            } => {
                if self.assignments.contains_key(assignment_id) {
                    return Err(corrupt(format!("duplicate assignment {assignment_id}")));
                }
                let p = self
                    .pipelines
                    .get(task_id)
                    .ok_or_else(|| corrupt(format!("unknown task {task_id}")))?;
                if p.workers.contains(&worker.worker_id) {
                    return Err(corrupt(format!("worker {} reused on {task_id}", worker.worker_id)));
                }
                if p.open_phase() != Some(*assignment_kind) || self.open_slots(p) == 0 {
                    return Err(corrupt(format!("no open {assignment_kind:?} slot on {task_id}")));
                }
                let session = match assignment_kind {
                    AssignmentKind::Scaffold => Some(
                        scaffold::start_task(task_id.clone(), &p.email, worker.worker_id.clone())
                            .map_err(|e| corrupt(e.to_string()))?,
                    ),
                    AssignmentKind::Ballot => None,
                };
                let p = self.pipelines.get_mut(task_id).expect("checked above");
                p.workers.insert(worker.worker_id.clone());
                p.assignments.push(assignment_id.clone());
                p.event_count += 1;
                if p.state == PipelineState::PairSelected {
                    p.enter(PipelineState::Balloting { completed: 0 }, at);
                }
                self.assignments.insert(
                    assignment_id.clone(),
                    Assignment {
                        assignment_id: assignment_id.clone(),
                        task_id: task_id.clone(),
                        worker_id: worker.worker_id.clone(),
                        kind: *assignment_kind,
                        issued_at: at,
                        deadline: *deadline,
                        status: AssignmentStatus::Live,
                        session,
                        acks: Vec::new(),
                    },
                );
                self.assignments_issued += 1;
            }

            EventKind::StepRecorded {
                assignment_id,
                payload,
                payload_hash,
            } => {
                let a = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| corrupt(format!("unknown assignment {assignment_id}")))?;
                if a.status != AssignmentStatus::Live {
                    return Err(corrupt(format!("step on non-live assignment {assignment_id}")));
                }
                let (stage, complete) = match (&mut a.session, payload) {
                    (Some(session), _) => {
                        let next = session.advance(payload).map_err(|e| corrupt(e.to_string()))?;
                        *session = next;
                        (session.stage.as_str(), session.stage == scaffold::Stage::Done)
                    }
                    (None, StepPayload::Vote { .. }) => (DONE_STAGE, true),
                    (None, other) => {
                        return Err(corrupt(format!("{} step on a ballot assignment", other.kind())))
                    }
                };
                a.acks.push(StepAck {
                    assignment_id: assignment_id.clone(),
                    task_id: a.task_id.clone(),
                    step_seq: event.seq,
                    payload_hash: payload_hash.clone(),
                    stage: stage.to_string(),
                    assignment_complete: complete,
                });
                let task_id = a.task_id.clone();
                self.pipeline_mut(&task_id, event.seq)?.event_count += 1;
            }

            EventKind::TaskCompleted {
                assignment_id,
                outcome,
            } => {
                let a = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| corrupt(format!("unknown assignment {assignment_id}")))?;
                if a.status != AssignmentStatus::Live {
                    return Err(corrupt(format!("completing non-live assignment {assignment_id}")));
                }
                a.status = AssignmentStatus::Completed;
                let kind = a.kind;
                let task_id = a.task_id.clone();
                let p = self.pipeline_mut(&task_id, event.seq)?;
                p.event_count += 1;
                match (kind, outcome) {
                    (AssignmentKind::Scaffold, Some(o)) => {
                        p.outcomes.push(o.clone());
                        let completed = p.outcomes.len() as u8;
                        p.enter(PipelineState::Scaffolding { completed }, at);
                    }
                    (AssignmentKind::Ballot, None) => {}
                    _ => return Err(corrupt("outcome does not match assignment kind".into())),
                }
            }

            EventKind::TaskExpired { assignment_id } => {
                let a = self
                    .assignments
                    .get_mut(assignment_id)
                    .ok_or_else(|| corrupt(format!("unknown assignment {assignment_id}")))?;
                if a.status != AssignmentStatus::Live {
                    return Err(corrupt(format!("expiring non-live assignment {assignment_id}")));
                }
                a.status = AssignmentStatus::Expired;
                let task_id = a.task_id.clone();
                let p = self.pipeline_mut(&task_id, event.seq)?;
                p.expirations += 1;
                p.event_count += 1;
            }

            EventKind::PairSelected { task_id, pair } => {
                let p = self.pipeline_mut(task_id, event.seq)?;
                if p.outcomes.len() != PANEL_SIZE {
                    return Err(corrupt("pair selected before three outcomes".into()));
                }
                p.pair = Some(pair.clone());
                p.event_count += 1;
                p.enter(PipelineState::PairSelected, at);
            }

            EventKind::BallotRecorded {
                assignment_id,
                ballot,
            } => {
                let a = self
                    .assignments
                    .get(assignment_id)
                    .ok_or_else(|| corrupt(format!("unknown assignment {assignment_id}")))?;
                if a.kind != AssignmentKind::Ballot || a.worker_id != ballot.worker_id {
                    return Err(corrupt("ballot does not match its assignment".into()));
                }
                let task_id = a.task_id.clone();
                let p = self.pipeline_mut(&task_id, event.seq)?;
                p.ballots.push(ballot.clone());
                p.event_count += 1;
                let completed = p.ballots.len() as u8;
                p.enter(PipelineState::Balloting { completed }, at);
            }

            EventKind::ResultFinalized {
                task_id,
                selection,
                result,
            } => {
                let p = self.pipeline_mut(task_id, event.seq)?;
                if p.ballots.len() != PANEL_SIZE {
                    return Err(corrupt("result finalized before three ballots".into()));
                }
                p.selection = Some(selection.clone());
                p.result = Some(result.clone());
                p.event_count += 1;
                p.enter(PipelineState::Complete, at);
            }

            EventKind::PipelineFailed { task_id, reason } => {
                let p = self.pipeline_mut(task_id, event.seq)?;
                if p.state.is_terminal() {
                    return Err(corrupt(format!("{task_id} already terminal")));
                }
                p.event_count += 1;
                p.enter(
                    PipelineState::Failed {
                        reason: reason.clone(),
                    },
                    at,
                );
            }
        }

        self.last_seq = event.seq;
        Ok(())
    }

    fn pipeline_mut(&mut self, task_id: &TaskId, seq: u64) -> Result<&mut Pipeline, CorruptLog> {
        self.pipelines.get_mut(task_id).ok_or_else(|| CorruptLog {
            seq,
            reason: format!("unknown task {task_id}"),
        })
    }
}

/// Rebuilds state from a complete log starting at seq 1.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<OrchestratorState, CorruptLog> {
    replay_onto(OrchestratorState::default(), events)
}

/// Continues from a snapshot with the events that follow it.
pub fn replay_onto<'a>(
    mut state: OrchestratorState,
    events: impl IntoIterator<Item = &'a Event>,
) -> Result<OrchestratorState, CorruptLog> {
    for e in events {
        state.apply(e)?;
    }
    Ok(state)
}
