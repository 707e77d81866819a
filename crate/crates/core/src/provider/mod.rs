//! Worker sources: qualification, deterministic simulated workers, and a
//! mock of an external crowd marketplace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::WorkerId;

pub mod bots;
pub mod lexicon;
pub mod mturk;
pub mod sim;

pub use bots::{sim_worker_respond, BotProfile, EditRule, ToneRule, VerdictRule};
pub use lexicon::{Lexicon, LexiconSet};
pub use mturk::{HitId, MockTurkClient, MockTurkProvider, PumpStats, TurkFixture};
pub use sim::{run_simulation, run_simulation_on, Backend, BackendError, SimError, SimulationEmail, SimulationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Education {
    HighSchool,
    Undergraduate,
    Graduate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub worker_id: WorkerId,
    /// Fraction of past work the platform approved, in `[0, 1]`.
    pub approval_rating: f64,
    /// Region code, e.g. `US`.
    pub locale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub education: Option<Education>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_speaker: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("approval rating {0} is outside [0, 1]")]
pub struct InvalidProfile(pub f64);

impl WorkerProfile {
    pub fn new(worker_id: impl Into<WorkerId>, approval_rating: f64, locale: &str) -> Self {
        Self {
            worker_id: worker_id.into(),
            approval_rating,
            locale: locale.to_string(),
            education: None,
            native_speaker: None,
        }
    }

    pub fn validate(&self) -> Result<(), InvalidProfile> {
        if (0.0..=1.0).contains(&self.approval_rating) {
            Ok(())
        } else {
            Err(InvalidProfile(self.approval_rating))
        }
    }
}

/// Who may take work. Kept as data so deployments can relax it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationPolicy {
    pub min_approval: f64,
    pub locales: Vec<String>,
}

impl Default for QualificationPolicy {
    fn default() -> Self {
        Self {
            min_approval: 0.95,
            locales: vec!["US".to_string()],
        }
    }
}

pub fn qualifies(worker: &WorkerProfile, policy: &QualificationPolicy) -> bool {
    worker.approval_rating >= policy.min_approval
        && policy
            .locales
            .iter()
            .any(|l| l.eq_ignore_ascii_case(worker.locale.trim()))
}
