//! Drives emails through submission, scaffolding, pair selection, balloting
//! and completion.
//!
//! Commands validate against the current state, then emit events; every
//! state change happens by applying those events. Callers supply `now` on
//! each command so the orchestrator never reads a clock itself.

mod config;
mod document;
mod events;
mod state;

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::debug;

use crate::consensus::{self, Ballot, ConsensusError, PipelineResult, PANEL_SIZE};
use crate::ids::{AssignmentId, Millis, TaskId, WorkerId};
use crate::provider::{qualifies, InvalidProfile, QualificationPolicy, WorkerProfile};
use crate::scaffold::{ScaffoldError, Stage, StepKind, StepPayload};
use crate::store::{self, FileStore, StoreError};
use crate::submission::{ContextMode, EmailSubmission, InvalidSubmission};

pub use config::{ContextRequirement, Iterations, PipelineConfig, DEFAULT_TASK_DEADLINE_MS};
pub use document::{BallotCandidates, TaskDocument};
pub use events::{Event, EventKind};
pub use state::{
    replay, replay_onto, Assignment, AssignmentKind, AssignmentStatus, CorruptLog, OrchestratorState, Pipeline,
    PipelineState, PipelineStatus, StepAck, Transition,
};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    InvalidSubmission(#[from] InvalidSubmission),
    #[error("context mode {actual:?} does not satisfy {required:?}")]
    ContextModeRejected {
        required: ContextRequirement,
        actual: ContextMode,
    },
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("unknown assignment {0}")]
    UnknownAssignment(AssignmentId),
    #[error("worker {0} does not meet the qualification policy")]
    UnqualifiedWorker(WorkerId),
    #[error(transparent)]
    InvalidProfile(#[from] InvalidProfile),
    #[error("assignment {0} is expired, completed or no longer active")]
    StaleAssignment(AssignmentId),
    #[error("assignment {assignment} belongs to another worker than {worker}")]
    WorkerMismatch {
        assignment: AssignmentId,
        worker: WorkerId,
    },
    #[error(transparent)]
    Step(#[from] ScaffoldError),
    #[error("ballot refinement is {}", if *.required { "required" } else { "not allowed" })]
    InvalidBallot { required: bool },
    #[error("task {0} is already complete or failed")]
    PipelineClosed(TaskId),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Corrupt(#[from] CorruptLog),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl OrchestratorError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            OrchestratorError::InvalidSubmission(_) => "invalid_submission",
            OrchestratorError::ContextModeRejected { .. } => "context_mode_rejected",
            OrchestratorError::UnknownTask(_) => "unknown_task",
            OrchestratorError::UnknownAssignment(_) => "unknown_assignment",
            OrchestratorError::UnqualifiedWorker(_) => "unqualified_worker",
            OrchestratorError::InvalidProfile(_) => "invalid_worker_profile",
            OrchestratorError::StaleAssignment(_) => "stale_assignment",
            OrchestratorError::WorkerMismatch { .. } => "worker_mismatch",
            OrchestratorError::Step(e) => match e {
                ScaffoldError::InvalidSubmission(_) => "invalid_submission",
                ScaffoldError::StageViolation { .. } => "stage_violation",
                ScaffoldError::EmptyPayload { .. } => "empty_payload",
                ScaffoldError::TargetToneMissingIntensity => "target_tone_missing_intensity",
                ScaffoldError::UnchangedText { .. } => "unchanged_text",
                ScaffoldError::NotDone { .. } => "not_done",
            },
            OrchestratorError::InvalidBallot { .. } => "invalid_ballot",
            OrchestratorError::PipelineClosed(_) => "pipeline_closed",
            OrchestratorError::Consensus(_) => "consensus_error",
            OrchestratorError::Corrupt(_) => "corrupt_log",
            OrchestratorError::Store(_) => "store_error",
        }
    }
}

pub type Result<T, E = OrchestratorError> = std::result::Result<T, E>;

/// Response to an accepted (or idempotently retried) step.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StepReceipt {
    pub ack: StepAck,
    pub status: PipelineStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResultView {
    Ready(Box<PipelineResult>),
    Pending(PipelineStatus),
}

/// Hex SHA-256 of the payload's JSON encoding.
pub fn payload_hash(payload: &StepPayload) -> String {
    let bytes = serde_json::to_vec(payload).expect("payload serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
pub struct Orchestrator {
    state: OrchestratorState,
    log: Vec<Event>,
    default_policy: QualificationPolicy,
    store: Option<FileStore>,
    snapshot_every: u64,
}

impl Default for Orchestrator {
    fn default() -> Self {
        Self::new(QualificationPolicy::default())
    }
}

impl Orchestrator {
    /// In-memory orchestrator. `default_policy` gates workers when no email
    /// has open work to judge them against.
    pub fn new(default_policy: QualificationPolicy) -> Self {
        Self {
            state: OrchestratorState::default(),
            log: Vec::new(),
            default_policy,
            store: None,
            snapshot_every: 0,
        }
    }

    /// Opens (or creates) a store directory and resumes from it. A snapshot
    /// is written every `snapshot_every` events; 0 disables snapshots.
    pub fn open(dir: impl AsRef<Path>, default_policy: QualificationPolicy, snapshot_every: u64) -> Result<Self> {
        let state = store::load(&dir)?;
        let store = FileStore::open(&dir)?;
        Ok(Self {
            state,
            log: Vec::new(),
            default_policy,
            store: Some(store),
            snapshot_every,
        })
    }

    pub fn from_state(state: OrchestratorState, default_policy: QualificationPolicy) -> Self {
        Self {
            state,
            log: Vec::new(),
            default_policy,
            store: None,
            snapshot_every: 0,
        }
    }

    pub fn state(&self) -> &OrchestratorState {
        &self.state
    }

    /// Events emitted by this instance (the full log when started empty).
    pub fn events(&self) -> &[Event] {
        &self.log
    }

    pub fn default_policy(&self) -> &QualificationPolicy {
        &self.default_policy
    }

    fn emit(&mut self, at: Millis, kind: EventKind) -> Result<u64> {
        let event = Event {
            seq: self.state.last_seq + 1,
            at,
            kind,
        };
        self.state.apply(&event)?;
        if let Some(store) = &mut self.store {
            store.append(std::slice::from_ref(&event))?;
            if self.snapshot_every > 0 && event.seq.is_multiple_of(self.snapshot_every) {
                store.write_snapshot(&self.state)?;
            }
        }
        debug!(seq = event.seq, kind = event.kind.name(), "event");
        let seq = event.seq;
        self.log.push(event);
        Ok(seq)
    }

    fn pipeline(&self, task_id: &TaskId) -> Result<&Pipeline> {
        self.state
            .pipelines
            .get(task_id)
            .ok_or_else(|| OrchestratorError::UnknownTask(task_id.clone()))
    }

    fn assignment(&self, id: &AssignmentId) -> Result<&Assignment> {
        self.state
            .assignments
            .get(id)
            .ok_or_else(|| OrchestratorError::UnknownAssignment(id.clone()))
    }

    pub fn submit(&mut self, email: EmailSubmission, config: PipelineConfig, now: Millis) -> Result<TaskId> {
        email.validate()?;
        let mode = email.context_mode();
        if !config.context_mode_required.admits(mode) {
            return Err(OrchestratorError::ContextModeRejected {
                required: config.context_mode_required,
                actual: mode,
            });
        }
        let task_id = TaskId::from_counter(self.state.tasks_issued + 1);
        self.emit(
            now,
            EventKind::EmailSubmitted {
                task_id: task_id.clone(),
                email,
                config,
            },
        )?;
        Ok(task_id)
    }

    /// Hands the worker the oldest open slot they are eligible for.
    pub fn next_task(&mut self, worker: &WorkerProfile, now: Millis) -> Result<Option<Assignment>> {
        self.claim(worker, None, now)
    }

    /// Like [`next_task`](Self::next_task) but restricted to one email when
    /// `only` is given; used by providers that post work per email.
    pub fn claim(&mut self, worker: &WorkerProfile, only: Option<&TaskId>, now: Millis) -> Result<Option<Assignment>> {
        worker.validate()?;
        if let Some(t) = only {
            self.pipeline(t)?;
        }
        let mut saw_candidate = false;
        let mut pick = None;
        for p in self.state.pipelines.values() {
            if only.is_some_and(|t| *t != p.task_id) {
                continue;
            }
            if p.workers.contains(&worker.worker_id) || self.state.open_slots(p) == 0 {
                continue;
            }
            saw_candidate = true;
            if qualifies(worker, &p.config.qualification) {
                pick = Some((p.task_id.clone(), p.open_phase().expect("open slots imply a phase"), p.config.task_deadline_ms));
                break;
            }
        }

        let Some((task_id, kind, deadline_ms)) = pick else {
            if saw_candidate || !qualifies(worker, &self.default_policy) {
                return Err(OrchestratorError::UnqualifiedWorker(worker.worker_id.clone()));
            }
            return Ok(None);
        };

        let assignment_id = AssignmentId::from_counter(self.state.assignments_issued + 1);
        self.emit(
            now,
            EventKind::TaskAssigned {
                assignment_id: assignment_id.clone(),
                task_id,
                worker: worker.clone(),
                assignment_kind: kind,
                deadline: now.saturating_add(deadline_ms),
            },
        )?;
        Ok(Some(self.state.assignments[&assignment_id].clone()))
    }

    pub fn submit_step(
        &mut self,
        assignment_id: &AssignmentId,
        worker_id: &WorkerId,
        payload: StepPayload,
        now: Millis,
    ) -> Result<StepReceipt> {
        let a = self.assignment(assignment_id)?;
        if a.worker_id != *worker_id {
            return Err(OrchestratorError::WorkerMismatch {
                assignment: assignment_id.clone(),
                worker: worker_id.clone(),
            });
        }
        let hash = payload_hash(&payload);
        if let Some(ack) = a.acks.iter().find(|k| k.payload_hash == hash) {
            let ack = ack.clone();
            let status = self.pipeline(&ack.task_id)?.status();
            return Ok(StepReceipt { ack, status });
        }

        let task_id = a.task_id.clone();
        let pipeline = self.pipeline(&task_id)?;
        if a.status != AssignmentStatus::Live || now > a.deadline || pipeline.state.is_terminal() {
            return Err(OrchestratorError::StaleAssignment(assignment_id.clone()));
        }

        match a.kind {
            AssignmentKind::Scaffold => {
                let session = a.session.as_ref().expect("scaffold assignments carry a session");
                // Dry-run so rejected steps leave no trace in the log.
                let next = session.advance(&payload)?;
                self.emit(
                    now,
                    EventKind::StepRecorded {
                        assignment_id: assignment_id.clone(),
                        payload,
                        payload_hash: hash,
                    },
                )?;
                if next.stage == Stage::Done {
                    let outcome = next.finalize(self.state.last_seq + 1)?;
                    self.emit(
                        now,
                        EventKind::TaskCompleted {
                            assignment_id: assignment_id.clone(),
                            outcome: Some(outcome),
                        },
                    )?;
                    let outcomes = &self.pipeline(&task_id)?.outcomes;
                    if outcomes.len() == PANEL_SIZE {
                        let pair = consensus::select_pair(outcomes)?;
                        self.emit(
                            now,
                            EventKind::PairSelected {
                                task_id: task_id.clone(),
                                pair,
                            },
                        )?;
                    }
                }
            }
            AssignmentKind::Ballot => {
                let StepPayload::Vote { choice, refined_text } = &payload else {
                    return Err(ScaffoldError::StageViolation {
                        expected: Some(StepKind::Vote),
                        got: payload.kind(),
                    }
                    .into());
                };
                let required = pipeline.config.iterations.refinement_enabled();
                match refined_text {
                    Some(t) if !required || t.trim().is_empty() => {
                        return Err(OrchestratorError::InvalidBallot { required })
                    }
                    None if required => return Err(OrchestratorError::InvalidBallot { required }),
                    _ => {}
                }
                let ballot = Ballot {
                    worker_id: worker_id.clone(),
                    choice: *choice,
                    refined_text: refined_text.clone(),
                    completed_at: 0,
                };
                self.emit(
                    now,
                    EventKind::StepRecorded {
                        assignment_id: assignment_id.clone(),
                        payload,
                        payload_hash: hash,
                    },
                )?;
                let ballot = Ballot {
                    completed_at: self.state.last_seq + 1,
                    ..ballot
                };
                self.emit(
                    now,
                    EventKind::BallotRecorded {
                        assignment_id: assignment_id.clone(),
                        ballot,
                    },
                )?;
                self.emit(
                    now,
                    EventKind::TaskCompleted {
                        assignment_id: assignment_id.clone(),
                        outcome: None,
                    },
                )?;
                self.finalize_if_ready(&task_id, now)?;
            }
        }

        let a = self.assignment(assignment_id)?;
        let ack = a.acks.last().expect("step just recorded").clone();
        let status = self.pipeline(&task_id)?.status();
        Ok(StepReceipt { ack, status })
    }

    fn finalize_if_ready(&mut self, task_id: &TaskId, now: Millis) -> Result<()> {
        let p = self.pipeline(task_id)?;
        if p.ballots.len() != PANEL_SIZE {
            return Ok(());
        }
        let pair = p.pair.as_ref().expect("ballots only after pair selection");
        for b in &p.ballots {
            if let Some(o) = p.outcomes.iter().find(|o| o.worker_id == b.worker_id) {
                return Err(ConsensusError::WorkerOverlap(o.worker_id.clone()).into());
            }
        }
        let selection = consensus::tally(&p.ballots, pair, p.config.iterations.refinement_enabled())?;
        // counts the ResultFinalized event itself
        let event_count = p.event_count + 1;
        let result = consensus::compose_result(task_id, &p.email, &p.outcomes, pair, &p.ballots, &selection, event_count);
        self.emit(
            now,
            EventKind::ResultFinalized {
                task_id: task_id.clone(),
                selection,
                result,
            },
        )?;
        Ok(())
    }

    /// Expires live assignments whose deadline has passed, reopening their
    /// slots. Expired workers stay barred from that email.
    pub fn expire_overdue(&mut self, now: Millis) -> Result<Vec<AssignmentId>> {
        let overdue: Vec<AssignmentId> = self
            .state
            .assignments
            .values()
            .filter(|a| a.status == AssignmentStatus::Live && now > a.deadline)
            .map(|a| a.assignment_id.clone())
            .collect();
        for id in &overdue {
            self.emit(
                now,
                EventKind::TaskExpired {
                    assignment_id: id.clone(),
                },
            )?;
            let task_id = self.state.assignments[id].task_id.clone();
            let p = self.pipeline(&task_id)?;
            if let Some(limit) = p.config.max_reassignments {
                if p.expirations > limit && !p.state.is_terminal() {
                    let reason = format!("more than {limit} expired assignments");
                    self.emit(now, EventKind::PipelineFailed { task_id, reason })?;
                }
            }
        }
        Ok(overdue)
    }

    /// Marks a pipeline failed, e.g. when no eligible worker remains.
    pub fn fail(&mut self, task_id: &TaskId, reason: &str, now: Millis) -> Result<PipelineStatus> {
        if self.pipeline(task_id)?.state.is_terminal() {
            return Err(OrchestratorError::PipelineClosed(task_id.clone()));
        }
        self.emit(
            now,
            EventKind::PipelineFailed {
                task_id: task_id.clone(),
                reason: reason.to_string(),
            },
        )?;
        Ok(self.pipeline(task_id)?.status())
    }

    pub fn status(&self, task_id: &TaskId) -> Result<PipelineStatus> {
        Ok(self.pipeline(task_id)?.status())
    }

    pub fn result(&self, task_id: &TaskId) -> Result<ResultView> {
        let p = self.pipeline(task_id)?;
        Ok(match &p.result {
            Some(r) => ResultView::Ready(Box::new(r.clone())),
            None => ResultView::Pending(p.status()),
        })
    }

    pub fn task_document(&self, assignment_id: &AssignmentId) -> Result<TaskDocument> {
        let a = self.assignment(assignment_id)?;
        let p = self.pipeline(&a.task_id)?;
        Ok(TaskDocument::build(a, p))
    }

    /// Writes a snapshot now, if a store is attached.
    pub fn snapshot(&self) -> Result<()> {
        if let Some(store) = &self.store {
            store.write_snapshot(&self.state)?;
        }
        Ok(())
    }
}
