//! Batch simulation: drives a set of emails to completion with simulated
//! workers on a logical clock.
//!
//! Each round every idle bot asks for work, then every bot whose latency has
//! elapsed submits its whole step sequence. Overdue assignments are expired
//! between rounds. A round that starts with every bot idle and in which none
//! can claim means no eligible worker remains, and the open emails are
//! failed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{Margin, PairRationale, PipelineResult, PANEL_SIZE};
use crate::ids::{AssignmentId, Millis, TaskId, WorkerId};
use crate::orchestrator::{
    AssignmentKind, Orchestrator, OrchestratorError, PipelineConfig, PipelineStatus, ResultView, StepReceipt,
    TaskDocument,
};
use crate::scaffold::StepPayload;
use crate::submission::EmailSubmission;

use super::bots::{sim_worker_respond, BotProfile};
use super::lexicon::LexiconSet;
use super::{qualifies, WorkerProfile};

/// Length of one simulation round on the logical clock.
pub const TICK_MS: Millis = 60_000;
pub const FAILED_NO_WORKERS: &str = "no eligible workers remain";

/// Error surfaced by a backend, reduced to its stable code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {message}")]
pub struct BackendError {
    pub code: String,
    pub message: String,
}

impl From<OrchestratorError> for BackendError {
    fn from(e: OrchestratorError) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("need at least {needed} distinct qualified workers, have {available}")]
    InsufficientWorkers { needed: usize, available: usize },
    #[error("bot {bot} references unknown lexicon {lexicon:?}")]
    UnknownLexicon { bot: WorkerId, lexicon: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl SimError {
    pub fn code(&self) -> &str {
        match self {
            SimError::InsufficientWorkers { .. } => "insufficient_workers",
            SimError::UnknownLexicon { .. } => "unknown_lexicon",
            SimError::Backend(e) => &e.code,
        }
    }
}

/// The command surface a simulation needs. Implemented in-process by
/// [`Orchestrator`] and over HTTP by the API crate.
pub trait Backend {
    fn submit(&mut self, email: &EmailSubmission, config: &PipelineConfig, now: Millis) -> Result<TaskId, BackendError>;
    fn next_task(&mut self, worker: &WorkerProfile, now: Millis) -> Result<Option<TaskDocument>, BackendError>;
    fn submit_step(
        &mut self,
        assignment: &AssignmentId,
        worker: &WorkerId,
        payload: &StepPayload,
        now: Millis,
    ) -> Result<StepReceipt, BackendError>;
    fn expire_overdue(&mut self, now: Millis) -> Result<Vec<AssignmentId>, BackendError>;
    fn fail(&mut self, task: &TaskId, reason: &str, now: Millis) -> Result<PipelineStatus, BackendError>;
    fn status(&mut self, task: &TaskId) -> Result<PipelineStatus, BackendError>;
    fn result(&mut self, task: &TaskId) -> Result<Option<PipelineResult>, BackendError>;
}

impl Backend for Orchestrator {
    fn submit(&mut self, email: &EmailSubmission, config: &PipelineConfig, now: Millis) -> Result<TaskId, BackendError> {
        Ok(Orchestrator::submit(self, email.clone(), config.clone(), now)?)
    }

    fn next_task(&mut self, worker: &WorkerProfile, now: Millis) -> Result<Option<TaskDocument>, BackendError> {
        match Orchestrator::next_task(self, worker, now)? {
            Some(a) => Ok(Some(self.task_document(&a.assignment_id)?)),
            None => Ok(None),
        }
    }

    fn submit_step(
        &mut self,
        assignment: &AssignmentId,
        worker: &WorkerId,
        payload: &StepPayload,
        now: Millis,
    ) -> Result<StepReceipt, BackendError> {
        Ok(Orchestrator::submit_step(self, assignment, worker, payload.clone(), now)?)
    }

    fn expire_overdue(&mut self, now: Millis) -> Result<Vec<AssignmentId>, BackendError> {
        Ok(Orchestrator::expire_overdue(self, now)?)
    }

    fn fail(&mut self, task: &TaskId, reason: &str, now: Millis) -> Result<PipelineStatus, BackendError> {
        Ok(Orchestrator::fail(self, task, reason, now)?)
    }

    fn status(&mut self, task: &TaskId) -> Result<PipelineStatus, BackendError> {
        Ok(Orchestrator::status(self, task)?)
    }

    fn result(&mut self, task: &TaskId) -> Result<Option<PipelineResult>, BackendError> {
        Ok(match Orchestrator::result(self, task)? {
            ResultView::Ready(r) => Some(*r),
            ResultView::Pending(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationEmail {
    /// Free-form name, e.g. the fixture file stem.
    pub label: String,
    pub email: EmailSubmission,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailReport {
    pub label: String,
    pub task_id: TaskId,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<Margin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rationale: Option<PairRationale>,
    /// Scaffold verdicts in completion order, `Y`/`N`.
    pub verdict_pattern: String,
    pub scaffold_workers: Vec<WorkerId>,
    pub ballot_workers: Vec<WorkerId>,
    pub expired_assignments: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<PipelineResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub complete: usize,
    pub failed: usize,
    pub by_margin: BTreeMap<String, usize>,
    pub by_rationale: BTreeMap<String, usize>,
    pub by_verdict_pattern: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub iterations: u8,
    pub rounds: u64,
    pub emails: Vec<EmailReport>,
    pub aggregate: Aggregate,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct InFlight {
    doc: TaskDocument,
    steps: Vec<StepPayload>,
    due: Millis,
}

#[derive(Default)]
struct Tracking {
    verdicts: Vec<bool>,
    scaffold: Vec<WorkerId>,
    ballot: Vec<WorkerId>,
    expired: u32,
}

/// Runs the simulation on a fresh in-memory orchestrator.
pub fn run_simulation(
    emails: &[SimulationEmail],
    bots: &[BotProfile],
    lexicons: &LexiconSet,
    config: &PipelineConfig,
    seed: u64,
) -> Result<SimulationReport, SimError> {
    let mut orch = Orchestrator::new(config.qualification.clone());
    run_simulation_on(&mut orch, emails, bots, lexicons, config, seed)
}

pub fn run_simulation_on<B: Backend + ?Sized>(
    backend: &mut B,
    emails: &[SimulationEmail],
    bots: &[BotProfile],
    lexicons: &LexiconSet,
    config: &PipelineConfig,
    seed: u64,
) -> Result<SimulationReport, SimError> {
    for bot in bots {
        if let Some(missing) = bot.lexicon_refs().find(|l| !lexicons.contains(l)) {
            return Err(SimError::UnknownLexicon {
                bot: bot.worker.worker_id.clone(),
                lexicon: missing.to_string(),
            });
        }
    }
    let eligible: BTreeSet<&WorkerId> = bots
        .iter()
        .filter(|b| b.worker.validate().is_ok() && qualifies(&b.worker, &config.qualification))
        .map(|b| &b.worker.worker_id)
        .collect();
    let needed = 2 * PANEL_SIZE;
    if eligible.len() < needed {
        return Err(SimError::InsufficientWorkers {
            needed,
            available: eligible.len(),
        });
    }
    // Only eligible bots, first occurrence of each id.
    let mut seen = BTreeSet::new();
    let roster: Vec<&BotProfile> = bots
        .iter()
        .filter(|b| eligible.contains(&b.worker.worker_id) && seen.insert(&b.worker.worker_id))
        .collect();

    let mut now: Millis = 0;
    let mut tasks = Vec::with_capacity(emails.len());
    for e in emails {
        tasks.push(backend.submit(&e.email, config, now)?);
    }
    let mut open: BTreeSet<TaskId> = tasks.iter().cloned().collect();
    let mut tracking: BTreeMap<TaskId, Tracking> = tasks.iter().map(|t| (t.clone(), Tracking::default())).collect();
    let mut in_flight: Vec<Option<InFlight>> = roster.iter().map(|_| None).collect();
    let mut rounds = 0u64;

    while !open.is_empty() {
        rounds += 1;
        let busy = in_flight.iter().any(Option::is_some);
        let mut claimed = 0usize;
        for (bot, slot) in roster.iter().zip(in_flight.iter_mut()) {
            if slot.is_some() {
                continue;
            }
            let Some(doc) = backend.next_task(&bot.worker, now)? else {
                continue;
            };
            claimed += 1;
            let steps = sim_worker_respond(bot, &doc, lexicons, seed);
            let due = now + TICK_MS * Millis::from(bot.latency_steps);
            *slot = Some(InFlight { doc, steps, due });
        }

        for (bot, slot) in roster.iter().zip(in_flight.iter_mut()) {
            let Some(job) = slot.take_if(|j| j.due <= now) else {
                continue;
            };
            deliver(backend, bot, job, now, &mut tracking)?;
        }

        for id in backend.expire_overdue(now)? {
            if let Some(job) = in_flight.iter().flatten().find(|j| j.doc.assignment_id == id) {
                if let Some(t) = tracking.get_mut(&job.doc.task_id) {
                    t.expired += 1;
                }
            }
        }

        let mut finished = Vec::new();
        for t in &open {
            if backend.status(t)?.state.is_terminal() {
                finished.push(t.clone());
            }
        }
        for t in finished {
            open.remove(&t);
        }

        // Every bot was idle and none could claim: nothing will change.
        if !busy && claimed == 0 && !open.is_empty() {
            for t in std::mem::take(&mut open) {
                backend.fail(&t, FAILED_NO_WORKERS, now)?;
            }
        }
        now += TICK_MS;
    }

    let mut report = SimulationReport {
        seed,
        iterations: config.iterations.count(),
        rounds,
        emails: Vec::with_capacity(tasks.len()),
        aggregate: Aggregate::default(),
    };
    for (e, task_id) in emails.iter().zip(&tasks) {
        let status = backend.status(task_id)?;
        let result = backend.result(task_id)?;
        let track = tracking.remove(task_id).unwrap_or_default();
        let agg = &mut report.aggregate;
        let label = status.state.label();
        if label == "complete" {
            agg.complete += 1;
        } else {
            agg.failed += 1;
        }
        let pattern: String = track.verdicts.iter().map(|v| if *v { 'Y' } else { 'N' }).collect();
        if let Some(r) = &result {
            *agg.by_margin.entry(r.audit.margin.as_str().to_string()).or_default() += 1;
            *agg.by_rationale.entry(r.audit.pair_rationale.as_str().to_string()).or_default() += 1;
        }
        if track.verdicts.len() == PANEL_SIZE {
            *agg.by_verdict_pattern.entry(pattern.clone()).or_default() += 1;
        }
        report.emails.push(EmailReport {
            label: e.label.clone(),
            task_id: task_id.clone(),
            status: label.to_string(),
            margin: result.as_ref().map(|r| r.audit.margin),
            rationale: result.as_ref().map(|r| r.audit.pair_rationale),
            verdict_pattern: pattern,
            scaffold_workers: track.scaffold,
            ballot_workers: track.ballot,
            expired_assignments: track.expired,
            result,
        });
    }
    Ok(report)
}

fn deliver<B: Backend + ?Sized>(
    backend: &mut B,
    bot: &BotProfile,
    job: InFlight,
    now: Millis,
    tracking: &mut BTreeMap<TaskId, Tracking>,
) -> Result<(), SimError> {
    let worker = &bot.worker.worker_id;
    let mut verdict = None;
    for step in &job.steps {
        match backend.submit_step(&job.doc.assignment_id, worker, step, now) {
            Ok(receipt) => {
                if let StepPayload::Verdict { correct } = step {
                    verdict = Some(*correct);
                }
                if receipt.ack.assignment_complete {
                    let t = tracking.entry(job.doc.task_id.clone()).or_default();
                    match job.doc.kind {
                        AssignmentKind::Scaffold => {
                            t.scaffold.push(worker.clone());
                            t.verdicts.extend(verdict);
                        }
                        AssignmentKind::Ballot => t.ballot.push(worker.clone()),
                    }
                }
            }
            // too slow: the slot was (or will be) reassigned
            Err(e) if e.code == "stale_assignment" => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
