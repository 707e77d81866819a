//! Crowd-powered email tone improvement.
//!
//! Three workers each identify an email's tone, decide whether it is right,
//! and improve the text through a fixed sequence of steps. Two of the three
//! versions go to a ballot of three different workers, and the winner is
//! returned with the tone assessment that produced it.
//!
//! - [`tone`]: the closed tone taxonomy and similarity metric
//! - [`scaffold`]: one worker's identification-to-improvement state machine
//! - [`consensus`]: pair selection, ballot tally and result composition
//! - [`orchestrator`]: event-sourced pipeline driver with task assignment
//! - [`provider`]: qualification, simulated workers, mock marketplace
//! - [`store`]: event log and snapshot files

pub mod consensus;
pub mod ids;
pub mod instructions;
pub mod orchestrator;
pub mod provider;
pub mod scaffold;
pub mod store;
pub mod submission;
pub mod tone;

pub use consensus::{
    compose_result, select_pair, tally, Ballot, CandidatePair, Choice, FinalSelection, Margin, PairRationale,
    PipelineResult,
};
pub use ids::{AssignmentId, Millis, TaskId, WorkerId};
pub use orchestrator::{
    Iterations, Orchestrator, OrchestratorError, PipelineConfig, PipelineState, PipelineStatus, TaskDocument,
};
pub use provider::{qualifies, QualificationPolicy, WorkerProfile};
pub use scaffold::{ScaffoldOutcome, ScaffoldTaskState, Stage, StepKind, StepPayload};
pub use submission::{ContextMode, EmailSubmission};
pub use tone::{parse_tone, taxonomy, tone_similarity, Intensity, PrimaryTone, SecondaryTone, ToneTuple};
