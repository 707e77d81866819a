//! Mock of an MTurk-style marketplace.
//!
//! The requester side posts a HIT per open slot, polls for responses and can
//! expire HITs. Responses come from canned fixture workers. The bridge
//! ([`MockTurkProvider`]) claims a slot for each responding worker and feeds
//! their steps through the orchestrator like any other client.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::Choice;
use crate::ids::{Millis, TaskId};
use crate::orchestrator::{AssignmentKind, BallotCandidates, Orchestrator, OrchestratorError};
use crate::scaffold::StepPayload;
use crate::submission::EmailSubmission;

use super::WorkerProfile;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HitId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitRequest {
    pub task_id: TaskId,
    pub kind: AssignmentKind,
    pub email: EmailSubmission,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<BallotCandidates>,
    pub refinement_required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitStatus {
    Open,
    Answered,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitResponse {
    pub hit_id: HitId,
    pub worker: WorkerProfile,
    pub payloads: Vec<StepPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedBallot {
    pub choice: Choice,
    /// Used only when the HIT asks for a refinement; `{text}` is replaced by
    /// the chosen version.
    #[serde(default)]
    pub refinement: Option<String>,
}

/// One canned worker. Scaffold payload texts may use `{body}` for the
/// original email body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedWorker {
    pub profile: WorkerProfile,
    #[serde(default)]
    pub scaffold: Option<Vec<StepPayload>>,
    #[serde(default)]
    pub ballot: Option<CannedBallot>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TurkFixture {
    pub workers: Vec<CannedWorker>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TurkError {
    #[error("unknown HIT {0:?}")]
    UnknownHit(HitId),
}

#[derive(Debug)]
struct HitRecord {
    request: HitRequest,
    status: HitStatus,
}

#[derive(Debug, Default)]
struct ClientState {
    hits: BTreeMap<HitId, HitRecord>,
    /// (email, fixture worker index) pairs already used.
    served: BTreeSet<(TaskId, usize)>,
    posted: u64,
}

/// Requester-side client. Interior locking makes it safe to poll from
/// several threads.
#[derive(Debug)]
pub struct MockTurkClient {
    fixture: TurkFixture,
    state: Mutex<ClientState>,
}

fn fill(text: &str, body: &str) -> String {
    text.replace("{body}", body)
}

impl MockTurkClient {
    pub fn new(fixture: TurkFixture) -> Self {
        Self {
            fixture,
            state: Mutex::new(ClientState::default()),
        }
    }

    pub fn post_task(&self, request: HitRequest) -> HitId {
        let mut st = self.state.lock().expect("mock client lock");
        st.posted += 1;
        let id = HitId(format!("hit-{:06}", st.posted));
        st.hits.insert(
            id.clone(),
            HitRecord {
                request,
                status: HitStatus::Open,
            },
        );
        id
    }

    pub fn status(&self, hit: &HitId) -> Result<HitStatus, TurkError> {
        let st = self.state.lock().expect("mock client lock");
        st.hits
            .get(hit)
            .map(|h| h.status.clone())
            .ok_or_else(|| TurkError::UnknownHit(hit.clone()))
    }

    /// Responses for an open HIT: the first canned worker able to do this
    /// kind of work who has not yet served the same email. Empty when
    /// nobody is left or the HIT is no longer open.
    pub fn fetch_responses(&self, hit: &HitId) -> Result<Vec<HitResponse>, TurkError> {
        let mut st = self.state.lock().expect("mock client lock");
        let record = st.hits.get(hit).ok_or_else(|| TurkError::UnknownHit(hit.clone()))?;
        if record.status != HitStatus::Open {
            return Ok(Vec::new());
        }
        let req = record.request.clone();
        let pick = self.fixture.workers.iter().enumerate().find(|(i, w)| {
            !st.served.contains(&(req.task_id.clone(), *i))
                && match req.kind {
                    AssignmentKind::Scaffold => w.scaffold.is_some(),
                    AssignmentKind::Ballot => w.ballot.is_some(),
                }
        });
        let Some((idx, worker)) = pick else {
            return Ok(Vec::new());
        };
        let body = &req.email.body;
        let payloads = match req.kind {
            AssignmentKind::Scaffold => worker
                .scaffold
                .iter()
                .flatten()
                .map(|p| match p {
                    StepPayload::DirectImprovement { text } => StepPayload::DirectImprovement { text: fill(text, body) },
                    StepPayload::Revision { text } => StepPayload::Revision { text: fill(text, body) },
                    StepPayload::Refinement { text } => StepPayload::Refinement { text: fill(text, body) },
                    other => other.clone(),
                })
                .collect(),
            AssignmentKind::Ballot => {
                let canned = worker.ballot.as_ref().expect("filtered above");
                let chosen = req.candidates.as_ref().map(|c| match canned.choice {
                    Choice::A => c.a.as_str(),
                    Choice::B => c.b.as_str(),
                });
                let refined_text = req.refinement_required.then(|| {
                    let template = canned.refinement.as_deref().unwrap_or("{text}\n\nWith thanks.");
                    template.replace("{text}", chosen.unwrap_or(body))
                });
                vec![StepPayload::Vote {
                    choice: canned.choice,
                    refined_text,
                }]
            }
        };
        st.served.insert((req.task_id.clone(), idx));
        st.hits.get_mut(hit).expect("present").status = HitStatus::Answered;
        Ok(vec![HitResponse {
            hit_id: hit.clone(),
            worker: worker.profile.clone(),
            payloads,
        }])
    }

    pub fn expire(&self, hit: &HitId) -> Result<(), TurkError> {
        let mut st = self.state.lock().expect("mock client lock");
        let h = st.hits.get_mut(hit).ok_or_else(|| TurkError::UnknownHit(hit.clone()))?;
        if h.status == HitStatus::Open {
            h.status = HitStatus::Expired;
        }
        Ok(())
    }

    pub fn open_hits(&self) -> Vec<(HitId, HitRequest)> {
        let st = self.state.lock().expect("mock client lock");
        st.hits
            .iter()
            .filter(|(_, h)| h.status == HitStatus::Open)
            .map(|(id, h)| (id.clone(), h.request.clone()))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error(transparent)]
    Turk(#[from] TurkError),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PumpStats {
    pub posted: usize,
    pub responses: usize,
    /// Responses whose worker could not be given a slot (unqualified,
    /// already served the email, or the slot was gone).
    pub rejected: usize,
    pub steps: usize,
}

/// Bridges the mock marketplace and the orchestrator.
#[derive(Debug)]
pub struct MockTurkProvider {
    client: MockTurkClient,
}

impl MockTurkProvider {
    pub fn new(client: MockTurkClient) -> Self {
        Self { client }
    }

    pub fn client(&self) -> &MockTurkClient {
        &self.client
    }

    /// One polling pass: post HITs for unposted open slots, collect
    /// responses and push them through the orchestrator.
    pub fn pump(&mut self, orch: &mut Orchestrator, now: Millis) -> Result<PumpStats, ProviderError> {
        let mut stats = PumpStats::default();

        let mut outstanding: BTreeMap<(TaskId, AssignmentKind), usize> = BTreeMap::new();
        for (_, req) in self.client.open_hits() {
            *outstanding.entry((req.task_id, req.kind)).or_default() += 1;
        }
        let state = orch.state();
        let mut to_post = Vec::new();
        for p in state.pipelines.values() {
            let Some(kind) = p.open_phase() else { continue };
            let have = outstanding.get(&(p.task_id.clone(), kind)).copied().unwrap_or(0);
            for _ in have..state.open_slots(p) {
                to_post.push(HitRequest {
                    task_id: p.task_id.clone(),
                    kind,
                    email: p.email.clone(),
                    candidates: p.pair.as_ref().map(|pair| BallotCandidates {
                        a: pair.a.improved_text.clone(),
                        b: pair.b.improved_text.clone(),
                    }),
                    refinement_required: kind == AssignmentKind::Ballot
                        && p.config.iterations.refinement_enabled(),
                });
            }
        }
        for req in to_post {
            self.client.post_task(req);
            stats.posted += 1;
        }

        for (hit, req) in self.client.open_hits() {
            let phase = orch.state().pipelines.get(&req.task_id).and_then(|p| p.open_phase());
            if phase != Some(req.kind) {
                self.client.expire(&hit)?;
                continue;
            }
            for resp in self.client.fetch_responses(&hit)? {
                stats.responses += 1;
                let claimed = match orch.claim(&resp.worker, Some(&req.task_id), now) {
                    Ok(Some(a)) => a,
                    Ok(_) | Err(OrchestratorError::UnqualifiedWorker(_)) => {
                        stats.rejected += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                for payload in resp.payloads {
                    orch.submit_step(&claimed.assignment_id, &resp.worker.worker_id, payload, now)?;
                    stats.steps += 1;
                }
            }
        }
        Ok(stats)
    }
}
