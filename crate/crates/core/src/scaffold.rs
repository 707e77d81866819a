//! One worker's tone-identification-to-improvement task as a value-level
//! state machine.
//!
//! ```text
//! AwaitCurrentTone -> AwaitVerdict -+-(yes)-> Yes_AwaitScope -> Yes_AwaitImprovement ------------------------> Done
//!                                   +-(no)--> No_AwaitTargetTone -> No_AwaitImprovementList -> No_AwaitRevision -> No_AwaitRefinement -> Done
//! ```
//!
//! Every stage accepts exactly one payload kind, so no stage can be skipped
//! or repeated.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::Choice;
use crate::ids::{TaskId, WorkerId};
use crate::submission::{EmailSubmission, InvalidSubmission};
use crate::tone::ToneTuple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    AwaitCurrentTone,
    AwaitVerdict,
    YesAwaitScope,
    YesAwaitImprovement,
    NoAwaitTargetTone,
    NoAwaitImprovementList,
    NoAwaitRevision,
    NoAwaitRefinement,
    Done,
}

impl Stage {
    /// The only payload kind this stage accepts; `None` once done.
    pub fn expected_kind(self) -> Option<StepKind> {
        Some(match self {
            Stage::AwaitCurrentTone => StepKind::CurrentTone,
            Stage::AwaitVerdict => StepKind::Verdict,
            Stage::YesAwaitScope => StepKind::ScopeNote,
            Stage::YesAwaitImprovement => StepKind::DirectImprovement,
            Stage::NoAwaitTargetTone => StepKind::TargetTone,
            Stage::NoAwaitImprovementList => StepKind::ImprovementList,
            Stage::NoAwaitRevision => StepKind::Revision,
            Stage::NoAwaitRefinement => StepKind::Refinement,
            Stage::Done => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::AwaitCurrentTone => "await_current_tone",
            Stage::AwaitVerdict => "await_verdict",
            Stage::YesAwaitScope => "yes_await_scope",
            Stage::YesAwaitImprovement => "yes_await_improvement",
            Stage::NoAwaitTargetTone => "no_await_target_tone",
            Stage::NoAwaitImprovementList => "no_await_improvement_list",
            Stage::NoAwaitRevision => "no_await_revision",
            Stage::NoAwaitRefinement => "no_await_refinement",
            Stage::Done => "done",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    CurrentTone,
    Verdict,
    ScopeNote,
    DirectImprovement,
    TargetTone,
    ImprovementList,
    Revision,
    Refinement,
    Vote,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::CurrentTone => "current_tone",
            StepKind::Verdict => "verdict",
            StepKind::ScopeNote => "scope_note",
            StepKind::DirectImprovement => "direct_improvement",
            StepKind::TargetTone => "target_tone",
            StepKind::ImprovementList => "improvement_list",
            StepKind::Revision => "revision",
            StepKind::Refinement => "refinement",
            StepKind::Vote => "vote",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A worker's submission for one stage. Tagged by `kind` on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepPayload {
    CurrentTone { tone: ToneTuple },
    /// `correct` is the yes/no answer to "is the current tone right?".
    Verdict { correct: bool },
    ScopeNote { notes: Vec<String> },
    DirectImprovement { text: String },
    TargetTone { tone: ToneTuple },
    ImprovementList { items: Vec<String> },
    Revision { text: String },
    Refinement { text: String },
    /// Consensus ballot; never valid for a scaffold task.
    Vote {
        choice: Choice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refined_text: Option<String>,
    },
}

impl StepPayload {
    pub fn kind(&self) -> StepKind {
        match self {
            StepPayload::CurrentTone { .. } => StepKind::CurrentTone,
            StepPayload::Verdict { .. } => StepKind::Verdict,
            StepPayload::ScopeNote { .. } => StepKind::ScopeNote,
            StepPayload::DirectImprovement { .. } => StepKind::DirectImprovement,
            StepPayload::TargetTone { .. } => StepKind::TargetTone,
            StepPayload::ImprovementList { .. } => StepKind::ImprovementList,
            StepPayload::Revision { .. } => StepKind::Revision,
            StepPayload::Refinement { .. } => StepKind::Refinement,
            StepPayload::Vote { .. } => StepKind::Vote,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaffoldError {
    #[error(transparent)]
    InvalidSubmission(#[from] InvalidSubmission),
    #[error("stage expects {}, got {got}", expected.map(StepKind::as_str).unwrap_or("nothing"))]
    StageViolation {
        expected: Option<StepKind>,
        got: StepKind,
    },
    #[error("{kind} payload is empty or contains blank entries")]
    EmptyPayload { kind: StepKind },
    #[error("target tone must carry an intensity")]
    TargetToneMissingIntensity,
    #[error("{kind} text is identical to the original email")]
    UnchangedText { kind: StepKind },
    #[error("task is still at stage {stage}")]
    NotDone { stage: Stage },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldTaskState {
    pub email_ref: TaskId,
    pub worker_id: WorkerId,
    pub original_body: String,
    pub stage: Stage,
    pub current_tone: Option<ToneTuple>,
    pub verdict: Option<bool>,
    pub target_tone: Option<ToneTuple>,
    pub scope_notes: Vec<String>,
    pub improvement_items: Vec<String>,
    pub drafts: Vec<String>,
}

/// What one scaffold worker hands to the consensus phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldOutcome {
    pub worker_id: WorkerId,
    pub current_tone: ToneTuple,
    pub verdict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tone: Option<ToneTuple>,
    pub notes: Vec<String>,
    pub improved_text: String,
    pub draft_history: Vec<String>,
    /// Event sequence number at which the outcome was finalized; consensus
    /// tie-breaks order by it.
    pub completed_at: u64,
}

pub fn start_task(
    email_ref: TaskId,
    email: &EmailSubmission,
    worker_id: WorkerId,
) -> Result<ScaffoldTaskState, ScaffoldError> {
    email.validate()?;
    Ok(ScaffoldTaskState {
        email_ref,
        worker_id,
        original_body: email.body.clone(),
        stage: Stage::AwaitCurrentTone,
        current_tone: None,
        verdict: None,
        target_tone: None,
        scope_notes: Vec::new(),
        improvement_items: Vec::new(),
        drafts: Vec::new(),
    })
}

fn non_blank_list(kind: StepKind, items: &[String]) -> Result<(), ScaffoldError> {
    if items.is_empty() || items.iter().any(|s| s.trim().is_empty()) {
        return Err(ScaffoldError::EmptyPayload { kind });
    }
    Ok(())
}

impl ScaffoldTaskState {
    pub fn advance(&self, step: &StepPayload) -> Result<ScaffoldTaskState, ScaffoldError> {
        let expected = self.stage.expected_kind();
        if expected != Some(step.kind()) {
            return Err(ScaffoldError::StageViolation {
                expected,
                got: step.kind(),
            });
        }

        let mut next = self.clone();
        match step {
            StepPayload::CurrentTone { tone } => {
                next.current_tone = Some(*tone);
                next.stage = Stage::AwaitVerdict;
            }
            StepPayload::Verdict { correct } => {
                next.verdict = Some(*correct);
                next.stage = if *correct {
                    Stage::YesAwaitScope
                } else {
                    Stage::NoAwaitTargetTone
                };
            }
            StepPayload::ScopeNote { notes } => {
                non_blank_list(StepKind::ScopeNote, notes)?;
                next.scope_notes = notes.clone();
                next.stage = Stage::YesAwaitImprovement;
            }
            StepPayload::TargetTone { tone } => {
                if tone.intensity.is_none() {
                    return Err(ScaffoldError::TargetToneMissingIntensity);
                }
                next.target_tone = Some(*tone);
                next.stage = Stage::NoAwaitImprovementList;
            }
            StepPayload::ImprovementList { items } => {
                non_blank_list(StepKind::ImprovementList, items)?;
                next.improvement_items = items.clone();
                next.stage = Stage::NoAwaitRevision;
            }
            StepPayload::DirectImprovement { text }
            | StepPayload::Revision { text }
            | StepPayload::Refinement { text } => {
                let kind = step.kind();
                if text.trim().is_empty() {
                    return Err(ScaffoldError::EmptyPayload { kind });
                }
                if text.trim() == self.original_body.trim() {
                    return Err(ScaffoldError::UnchangedText { kind });
                }
                next.drafts.push(text.clone());
                next.stage = match self.stage {
                    Stage::NoAwaitRevision => Stage::NoAwaitRefinement,
                    _ => Stage::Done,
                };
            }
            // rejected by the kind check above
            StepPayload::Vote { .. } => unreachable!("vote never matches a scaffold stage"),
        }
        Ok(next)
    }

    pub fn finalize(&self, completed_at: u64) -> Result<ScaffoldOutcome, ScaffoldError> {
        if self.stage != Stage::Done {
            return Err(ScaffoldError::NotDone { stage: self.stage });
        }
        // Done implies these were set on the way.
        let verdict = self.verdict.expect("verdict set before Done");
        let notes = if verdict {
            self.scope_notes.clone()
        } else {
            self.improvement_items.clone()
        };
        Ok(ScaffoldOutcome {
            worker_id: self.worker_id.clone(),
            current_tone: self.current_tone.expect("current tone set before Done"),
            verdict,
            target_tone: if verdict { None } else { self.target_tone },
            notes,
            improved_text: self.drafts.last().cloned().expect("a draft exists at Done"),
            draft_history: self.drafts.clone(),
            completed_at,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submission::sample_email;
    use crate::tone::{Intensity, PrimaryTone, SecondaryTone};
    use proptest::prelude::*;

    fn tone(i: Option<Intensity>) -> ToneTuple {
        ToneTuple::new(PrimaryTone::Formal, SecondaryTone::CourteousRespectfulPolite, i)
    }

    fn fresh() -> ScaffoldTaskState {
        start_task("ct-1".into(), &sample_email(), "w1".into()).unwrap()
    }

    fn yes_script() -> Vec<StepPayload> {
        vec![
            StepPayload::CurrentTone { tone: tone(None) },
            StepPayload::Verdict { correct: true },
            StepPayload::ScopeNote { notes: vec!["add a greeting".into()] },
            StepPayload::DirectImprovement { text: "Hi, could you send me the report?".into() },
        ]
    }

    fn no_script() -> Vec<StepPayload> {
        vec![
            StepPayload::CurrentTone { tone: tone(Some(Intensity::Somewhat)) },
            StepPayload::Verdict { correct: false },
            StepPayload::TargetTone { tone: tone(Some(Intensity::Very)) },
            StepPayload::ImprovementList { items: vec!["soften demand".into(), "add thanks".into()] },
            StepPayload::Revision { text: "Could you send the report?".into() },
            StepPayload::Refinement { text: "Could you please send the report? Thank you.".into() },
        ]
    }

    fn run(script: &[StepPayload]) -> Result<ScaffoldTaskState, ScaffoldError> {
        script.iter().try_fold(fresh(), |s, p| s.advance(p))
    }

    #[test]
    fn start_requires_valid_email() {
        assert_eq!(fresh().stage, Stage::AwaitCurrentTone);
        let mut e = sample_email();
        e.body.clear();
        assert!(matches!(
            start_task("ct-1".into(), &e, "w1".into()),
            Err(ScaffoldError::InvalidSubmission(_))
        ));
    }

    #[test]
    fn verdict_before_tone_is_violation() {
        let err = fresh().advance(&StepPayload::Verdict { correct: true }).unwrap_err();
        assert_eq!(
            err,
            ScaffoldError::StageViolation {
                expected: Some(StepKind::CurrentTone),
                got: StepKind::Verdict
            }
        );
    }

    #[test]
    fn no_branch_and_drafts() {
        let s = run(&no_script()[..2]).unwrap();
        assert_eq!(s.stage, Stage::NoAwaitTargetTone);
        let done = run(&no_script()).unwrap();
        assert_eq!(done.stage, Stage::Done);
        assert_eq!(
            done.drafts,
            vec![
                "Could you send the report?".to_string(),
                "Could you please send the report? Thank you.".to_string()
            ]
        );
        let out = done.finalize(9).unwrap();
        assert!(!out.verdict);
        assert_eq!(out.target_tone.unwrap().intensity, Some(Intensity::Very));
        assert_eq!(out.notes.len(), 2);
        assert_eq!(out.improved_text, "Could you please send the report? Thank you.");
        assert_eq!(out.completed_at, 9);
    }

    #[test]
    fn yes_path_outcome() {
        let out = run(&yes_script()).unwrap().finalize(1).unwrap();
        assert!(out.verdict);
        assert_eq!(out.target_tone, None);
        assert_eq!(out.notes, vec!["add a greeting".to_string()]);
        assert_eq!(out.improved_text, "Hi, could you send me the report?");
    }

    #[test]
    fn empty_scope_note() {
        let s = run(&yes_script()[..2]).unwrap();
        assert_eq!(s.stage, Stage::YesAwaitScope);
        assert_eq!(
            s.advance(&StepPayload::ScopeNote { notes: vec![] }).unwrap_err(),
            ScaffoldError::EmptyPayload { kind: StepKind::ScopeNote }
        );
        assert!(s.advance(&StepPayload::ScopeNote { notes: vec!["  ".into()] }).is_err());
    }

    #[test]
    fn target_tone_needs_intensity() {
        let s = run(&no_script()[..2]).unwrap();
        assert_eq!(
            s.advance(&StepPayload::TargetTone { tone: tone(None) }).unwrap_err(),
            ScaffoldError::TargetToneMissingIntensity
        );
    }

    #[test]
    fn unchanged_text_rejected() {
        let s = run(&yes_script()[..3]).unwrap();
        let err = s
            .advance(&StepPayload::DirectImprovement { text: format!("  {}\n", sample_email().body) })
            .unwrap_err();
        assert_eq!(err, ScaffoldError::UnchangedText { kind: StepKind::DirectImprovement });
    }

    #[test]
    fn finalize_before_done() {
        let s = run(&yes_script()[..1]).unwrap();
        assert_eq!(
            s.finalize(0).unwrap_err(),
            ScaffoldError::NotDone { stage: Stage::AwaitVerdict }
        );
    }

    #[test]
    fn done_rejects_everything() {
        let done = run(&yes_script()).unwrap();
        for p in no_script().iter().chain(yes_script().iter()) {
            assert!(matches!(done.advance(p), Err(ScaffoldError::StageViolation { expected: None, .. })));
        }
    }

    #[test]
    fn payload_wire_format() {
        let p = StepPayload::TargetTone { tone: tone(Some(Intensity::QuiteClose)) };
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"kind":"target_tone","tone":{"primary":"formal","secondary":"courteous/respectful/polite","intensity":"quite close"}})
        );
        let v: StepPayload = serde_json::from_str(r#"{"kind":"verdict","correct":false}"#).unwrap();
        assert_eq!(v, StepPayload::Verdict { correct: false });
    }

    fn arb_payload() -> impl Strategy<Value = StepPayload> {
        let text = prop_oneof![Just("Send me the report now!".to_string()), "[a-z ]{0,8}"];
        let list = proptest::collection::vec(prop_oneof![Just(String::new()), "[a-z]{1,5}"], 0..3);
        let t = (any::<bool>(), 0..4usize).prop_map(|(f, i)| {
            ToneTuple::new(
                if f { PrimaryTone::Formal } else { PrimaryTone::Informal },
                SecondaryTone::Serious,
                Intensity::ALL.get(i).copied(),
            )
        });
        prop_oneof![
            t.clone().prop_map(|tone| StepPayload::CurrentTone { tone }),
            any::<bool>().prop_map(|correct| StepPayload::Verdict { correct }),
            list.clone().prop_map(|notes| StepPayload::ScopeNote { notes }),
            text.clone().prop_map(|text| StepPayload::DirectImprovement { text }),
            t.prop_map(|tone| StepPayload::TargetTone { tone }),
            list.prop_map(|items| StepPayload::ImprovementList { items }),
            text.clone().prop_map(|text| StepPayload::Revision { text }),
            text.prop_map(|text| StepPayload::Refinement { text }),
            Just(StepPayload::Vote { choice: Choice::A, refined_text: None }),
        ]
    }

    proptest! {
        // Feed random payload sequences, keeping only accepted ones; whenever
        // Done is reached the visited stage path must be one of the two legal
        // paths.
        #[test]
        fn done_only_via_legal_paths(steps in proptest::collection::vec(arb_payload(), 0..60)) {
            let yes = [Stage::AwaitCurrentTone, Stage::AwaitVerdict, Stage::YesAwaitScope, Stage::YesAwaitImprovement, Stage::Done];
            let no = [Stage::AwaitCurrentTone, Stage::AwaitVerdict, Stage::NoAwaitTargetTone, Stage::NoAwaitImprovementList, Stage::NoAwaitRevision, Stage::NoAwaitRefinement, Stage::Done];
            let mut state = fresh();
            let mut path = vec![state.stage];
            let mut last_text = None;
            for p in &steps {
                if let Ok(next) = state.advance(p) {
                    if let StepPayload::DirectImprovement { text } | StepPayload::Refinement { text } | StepPayload::Revision { text } = p {
                        last_text = Some(text.clone());
                    }
                    state = next;
                    path.push(state.stage);
                }
            }
            if state.stage == Stage::Done {
                prop_assert!(path == yes || path == no);
                let out = state.finalize(0).unwrap();
                prop_assert_eq!(Some(out.improved_text), last_text);
                prop_assert_eq!(out.target_tone.is_some(), !out.verdict);
                prop_assert!(!out.notes.is_empty());
            } else {
                prop_assert!(yes.starts_with(&path) || no.starts_with(&path));
            }
        }
    }
}
