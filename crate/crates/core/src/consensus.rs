//! Consensus over the three scaffold outcomes.
//!
//! Pair selection keeps the two versions that share the majority verdict, or,
//! when the verdict is unanimous, the two whose tones are most alike. Three
//! fresh workers then vote between the pair (optionally refining their pick)
//! and the majority wins 2-1 or 3-0.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{TaskId, WorkerId};
use crate::scaffold::ScaffoldOutcome;
use crate::submission::EmailSubmission;
use crate::tone::{rated_intensity, tone_similarity, Intensity, PrimaryTone, SecondaryTone, ToneTuple};

pub const PANEL_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRationale {
    MajorityYes,
    MajorityNo,
    UnanimousSimilarity,
}

impl PairRationale {
    pub fn as_str(self) -> &'static str {
        match self {
            PairRationale::MajorityYes => "majority_yes",
            PairRationale::MajorityNo => "majority_no",
            PairRationale::UnanimousSimilarity => "unanimous_similarity",
        }
    }
}

impl fmt::Display for PairRationale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Margin {
    TwoOfThree,
    Unanimous,
}

impl Margin {
    pub fn as_str(self) -> &'static str {
        match self {
            Margin::TwoOfThree => "two_of_three",
            Margin::Unanimous => "unanimous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("expected exactly {PANEL_SIZE} {what}, got {got}")]
    Arity { what: &'static str, got: usize },
    #[error("worker {0} appears more than once")]
    DuplicateWorker(WorkerId),
    #[error("ballot worker {0} also authored a scaffold outcome")]
    WorkerOverlap(WorkerId),
    #[error("ballot from {worker} {}", if *.expected { "is missing its refinement" } else { "carries a refinement but refinement is disabled" })]
    RefinementMismatch { worker: WorkerId, expected: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub a: ScaffoldOutcome,
    pub b: ScaffoldOutcome,
    pub rationale: PairRationale,
    /// Present only for unanimous verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<u8>,
}

impl CandidatePair {
    pub fn version(&self, choice: Choice) -> &ScaffoldOutcome {
        match choice {
            Choice::A => &self.a,
            Choice::B => &self.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub worker_id: WorkerId,
    pub choice: Choice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_text: Option<String>,
    pub completed_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalSelection {
    pub winner: Choice,
    pub margin: Margin,
    pub final_text: String,
    pub alternates: Vec<String>,
}

fn check_distinct<'a>(workers: impl Iterator<Item = &'a WorkerId>) -> Result<(), ConsensusError> {
    let mut seen = BTreeSet::new();
    for w in workers {
        if !seen.insert(w) {
            return Err(ConsensusError::DuplicateWorker(w.clone()));
        }
    }
    Ok(())
}

fn by_completion(outcomes: &[ScaffoldOutcome]) -> Vec<&ScaffoldOutcome> {
    let mut sorted: Vec<_> = outcomes.iter().collect();
    sorted.sort_by(|x, y| (x.completed_at, &x.worker_id).cmp(&(y.completed_at, &y.worker_id)));
    sorted
}

/// The tone compared when all three verdicts agree: the target for a
/// unanimous "no", the current tone for a unanimous "yes".
fn compared_tone(o: &ScaffoldOutcome) -> &ToneTuple {
    match (&o.target_tone, o.verdict) {
        (Some(t), false) => t,
        _ => &o.current_tone,
    }
}

pub fn select_pair(outcomes: &[ScaffoldOutcome]) -> Result<CandidatePair, ConsensusError> {
    if outcomes.len() != PANEL_SIZE {
        return Err(ConsensusError::Arity {
            what: "scaffold outcomes",
            got: outcomes.len(),
        });
    }
    check_distinct(outcomes.iter().map(|o| &o.worker_id))?;

    let sorted = by_completion(outcomes);
    let yes = sorted.iter().filter(|o| o.verdict).count();

    if yes == 1 || yes == 2 {
        let majority = yes == 2;
        let mut pick = sorted.iter().filter(|o| o.verdict == majority);
        let (a, b) = (pick.next().unwrap(), pick.next().unwrap());
        return Ok(CandidatePair {
            a: (*a).clone(),
            b: (*b).clone(),
            rationale: if majority {
                PairRationale::MajorityYes
            } else {
                PairRationale::MajorityNo
            },
            similarity: None,
        });
    }

    // Pairs in lexicographic completion order; the first maximum wins ties.
    let mut best: Option<(usize, usize, u8)> = None;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let score = tone_similarity(compared_tone(sorted[i]), compared_tone(sorted[j]));
        if best.is_none_or(|(_, _, s)| score > s) {
            best = Some((i, j, score));
        }
    }
    let (i, j, score) = best.expect("three candidate pairs");
    Ok(CandidatePair {
        a: sorted[i].clone(),
        b: sorted[j].clone(),
        rationale: PairRationale::UnanimousSimilarity,
        similarity: Some(score),
    })
}

pub fn tally(
    ballots: &[Ballot],
    pair: &CandidatePair,
    refinement_enabled: bool,
) -> Result<FinalSelection, ConsensusError> {
    if ballots.len() != PANEL_SIZE {
        return Err(ConsensusError::Arity {
            what: "ballots",
            got: ballots.len(),
        });
    }
    check_distinct(ballots.iter().map(|b| &b.worker_id))?;
    // Only the pair's authors are visible here; the orchestrator enforces the
    // wider rule against all three scaffold authors.
    if let Some(b) = ballots
        .iter()
        .find(|b| b.worker_id == pair.a.worker_id || b.worker_id == pair.b.worker_id)
    {
        return Err(ConsensusError::WorkerOverlap(b.worker_id.clone()));
    }
    if let Some(b) = ballots
        .iter()
        .find(|b| b.refined_text.is_some() != refinement_enabled)
    {
        return Err(ConsensusError::RefinementMismatch {
            worker: b.worker_id.clone(),
            expected: refinement_enabled,
        });
    }

    let votes_a = ballots.iter().filter(|b| b.choice == Choice::A).count();
    let (winner, votes) = if votes_a >= 2 {
        (Choice::A, votes_a)
    } else {
        (Choice::B, PANEL_SIZE - votes_a)
    };
    let margin = if votes == PANEL_SIZE {
        Margin::Unanimous
    } else {
        Margin::TwoOfThree
    };

    let (final_text, alternates) = if refinement_enabled {
        let mut majority: Vec<&Ballot> = ballots.iter().filter(|b| b.choice == winner).collect();
        majority.sort_by(|x, y| (x.completed_at, &x.worker_id).cmp(&(y.completed_at, &y.worker_id)));
        let mut texts = majority
            .into_iter()
            .map(|b| b.refined_text.clone().expect("checked above"));
        let first = texts.next().expect("majority is non-empty");
        (first, texts.collect())
    } else {
        (pair.version(winner).improved_text.clone(), Vec::new())
    };

    Ok(FinalSelection {
        winner,
        margin,
        final_text,
        alternates,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginalTone {
    pub primary: PrimaryTone,
    pub secondary: SecondaryTone,
    #[serde(with = "rated_intensity")]
    pub intensity: Option<Intensity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovedEmail {
    pub subject: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub worker_ids: Vec<WorkerId>,
    pub pair_rationale: PairRationale,
    pub margin: Margin,
    pub event_count: u64,
}

/// The requester-facing output document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub task_id: TaskId,
    pub original_tone: OriginalTone,
    pub tone_was_correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tone: Option<ToneTuple>,
    pub improved_email: ImprovedEmail,
    pub notes: Vec<String>,
    pub alternates: Vec<String>,
    pub audit: Audit,
}

/// Builds the output from the winning lineage: tone data and notes come from
/// the scaffold author of the version the ballot panel picked.
pub fn compose_result(
    task_id: &TaskId,
    email: &EmailSubmission,
    outcomes: &[ScaffoldOutcome],
    pair: &CandidatePair,
    ballots: &[Ballot],
    selection: &FinalSelection,
    event_count: u64,
) -> PipelineResult {
    let author = pair.version(selection.winner);
    let mut sorted_ballots: Vec<&Ballot> = ballots.iter().collect();
    sorted_ballots.sort_by(|x, y| (x.completed_at, &x.worker_id).cmp(&(y.completed_at, &y.worker_id)));

    let worker_ids = by_completion(outcomes)
        .into_iter()
        .map(|o| o.worker_id.clone())
        .chain(sorted_ballots.into_iter().map(|b| b.worker_id.clone()))
        .collect();

    PipelineResult {
        task_id: task_id.clone(),
        original_tone: OriginalTone {
            primary: author.current_tone.primary,
            secondary: author.current_tone.secondary,
            intensity: author.current_tone.intensity,
        },
        tone_was_correct: author.verdict,
        target_tone: if author.verdict { None } else { author.target_tone },
        improved_email: ImprovedEmail {
            subject: email.subject.clone(),
            body: selection.final_text.clone(),
        },
        notes: author.notes.clone(),
        alternates: selection.alternates.clone(),
        audit: Audit {
            worker_ids,
            pair_rationale: pair.rationale,
            margin: selection.margin,
            event_count,
        },
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn outcome(worker: &str, verdict: bool, tone: ToneTuple, completed_at: u64) -> ScaffoldOutcome {
        ScaffoldOutcome {
            worker_id: worker.into(),
            current_tone: if verdict { tone } else { ToneTuple { intensity: None, ..tone } },
            verdict,
            target_tone: (!verdict).then_some(tone),
            notes: vec![format!("note from {worker}")],
            improved_text: format!("text by {worker}"),
            draft_history: vec![format!("text by {worker}")],
            completed_at,
        }
    }

    pub fn ballot(worker: &str, choice: Choice, refined: Option<&str>, at: u64) -> Ballot {
        Ballot {
            worker_id: worker.into(),
            choice,
            refined_text: refined.map(str::to_string),
            completed_at: at,
        }
    }
}
