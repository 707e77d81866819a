//! Deterministic simulated workers.
//!
//! A bot's answers are a pure function of its profile, the task document and
//! the run seed. Edits are crude text transforms; the engine never judges
//! edit quality, only protocol legality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consensus::Choice;
use crate::orchestrator::{AssignmentKind, TaskDocument};
use crate::scaffold::StepPayload;
use crate::submission::{EmailSubmission, Hierarchy, RelationshipType};
use crate::tone::{Intensity, PrimaryTone, SecondaryTone, ToneTuple};

use super::lexicon::{LexiconSet, BUILTIN};
use super::WorkerProfile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum VerdictRule {
    AlwaysYes,
    AlwaysNo,
    /// "No" when the lexicon reads the body as harsh (cold, enraged or
    /// pushy); "yes" otherwise.
    Keyword { lexicon: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ToneRule {
    /// Surface features: exclamation marks, casual markers, builtin lexicon.
    #[default]
    Features,
    Fixed { tone: ToneTuple },
    Lexicon { lexicon: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EditRule {
    AppendSignoff,
    SoftenExclamations,
    /// Placeholders: `{body}`, `{subject}`, `{sender}`, `{recipient}`.
    TemplateRewrite { template: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotProfile {
    #[serde(flatten)]
    pub worker: WorkerProfile,
    pub verdict_rule: VerdictRule,
    #[serde(default)]
    pub tone_rule: ToneRule,
    pub edit_rule: EditRule,
    /// Simulation ticks between claiming a task and answering it.
    #[serde(default)]
    pub latency_steps: u32,
}

impl BotProfile {
    pub fn new(id: &str, verdict_rule: VerdictRule, edit_rule: EditRule) -> Self {
        Self {
            worker: WorkerProfile::new(id, 0.98, "US"),
            verdict_rule,
            tone_rule: ToneRule::Features,
            edit_rule,
            latency_steps: 0,
        }
    }

    pub fn lexicon_refs(&self) -> impl Iterator<Item = &str> {
        let v = match &self.verdict_rule {
            VerdictRule::Keyword { lexicon } => Some(lexicon.as_str()),
            _ => None,
        };
        let t = match &self.tone_rule {
            ToneRule::Lexicon { lexicon } => Some(lexicon.as_str()),
            _ => None,
        };
        v.into_iter().chain(t)
    }
}

fn rng_for(seed: u64, bot: &BotProfile, doc: &TaskDocument) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(bot.worker.worker_id.as_str().as_bytes());
    h.update([0]);
    h.update(doc.task_id.as_str().as_bytes());
    h.update([0]);
    h.update(doc.assignment_id.as_str().as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(bytes))
}

const HARSH: [SecondaryTone; 3] = [
    SecondaryTone::ColdUnfriendly,
    SecondaryTone::Enraged,
    SecondaryTone::EmotionalPersuasive,
];

const CASUAL_MARKERS: [&str; 6] = ["hey", "lol", "haha", "gonna", "thx", "!!"];

fn feature_tone(body: &str, lexicons: &LexiconSet) -> ToneTuple {
    let lower = body.to_lowercase();
    let bangs = body.matches('!').count();
    let casual = CASUAL_MARKERS.iter().any(|m| lower.contains(m)) || bangs > 2;
    let primary = if casual {
        PrimaryTone::Informal
    } else {
        PrimaryTone::Formal
    };
    let secondary = lexicons
        .get(BUILTIN)
        .and_then(|lx| lx.lookup(body))
        .map(|t| t.secondary)
        .unwrap_or(if bangs >= 2 {
            SecondaryTone::EmotionalPersuasive
        } else {
            SecondaryTone::Serious
        });
    ToneTuple::new(primary, secondary, None)
}

fn current_tone(bot: &BotProfile, body: &str, lexicons: &LexiconSet, rng: &mut ChaCha8Rng) -> ToneTuple {
    let base = match &bot.tone_rule {
        ToneRule::Features => feature_tone(body, lexicons),
        ToneRule::Fixed { tone } => *tone,
        ToneRule::Lexicon { lexicon } => lexicons
            .get(lexicon)
            .and_then(|lx| lx.lookup(body))
            .unwrap_or_else(|| feature_tone(body, lexicons)),
    };
    // bots rate the current intensity three times out of four
    let intensity = match rng.random_range(0..4) {
        0 => None,
        i => base.intensity.or(Some(Intensity::ALL[i - 1])),
    };
    ToneTuple { intensity, ..base }
}

fn verdict(bot: &BotProfile, body: &str, lexicons: &LexiconSet) -> bool {
    match &bot.verdict_rule {
        VerdictRule::AlwaysYes => true,
        VerdictRule::AlwaysNo => false,
        VerdictRule::Keyword { lexicon } => !lexicons
            .get(lexicon)
            .and_then(|lx| lx.lookup(body))
            .is_some_and(|t| HARSH.contains(&t.secondary)),
    }
}

fn target_tone(email: &EmailSubmission, rng: &mut ChaCha8Rng) -> ToneTuple {
    let (primary, options): (_, &[SecondaryTone]) = match (email.relationship_type, email.hierarchy) {
        (Some(RelationshipType::FriendsFamily), _) => (
            PrimaryTone::Informal,
            &[SecondaryTone::LightHumorousFriendliness, SecondaryTone::EnthusiasticCheerful],
        ),
        (Some(RelationshipType::Strangers), _) | (_, Some(Hierarchy::Senior)) => (
            PrimaryTone::Formal,
            &[SecondaryTone::CourteousRespectfulPolite, SecondaryTone::AppreciativeThankful],
        ),
        _ => (
            PrimaryTone::Formal,
            &[SecondaryTone::AppreciativeThankful, SecondaryTone::CourteousRespectfulPolite],
        ),
    };
    // mostly the first option, so unanimous panels usually agree
    let secondary = if rng.random_range(0..4) == 0 { options[1] } else { options[0] };
    let intensity = Intensity::ALL[rng.random_range(0..Intensity::ALL.len())];
    ToneTuple::new(primary, secondary, Some(intensity))
}

const SIGNOFF: &str = "Thank you for your time.\nBest regards";
const APPRECIATION: &str = "I appreciate your help.";

/// Second-pass edit: adds a line of appreciation ahead of any sign-off.
fn polish(text: &str) -> String {
    let text = text.trim_end();
    if text.contains(APPRECIATION) {
        return text.to_string();
    }
    match text.strip_suffix(SIGNOFF) {
        Some(head) => format!("{}\n\n{APPRECIATION}\n\n{SIGNOFF}", head.trim_end()),
        None => format!("{text}\n\n{APPRECIATION}"),
    }
}

fn apply_edit(rule: &EditRule, text: &str, email: &EmailSubmission) -> String {
    match rule {
        EditRule::AppendSignoff if text.trim_end().ends_with(SIGNOFF) => text.to_string(),
        EditRule::AppendSignoff => format!("{}\n\n{SIGNOFF}", text.trim_end()),
        EditRule::SoftenExclamations => {
            let softened = text
                .replace("ASAP", "when you have a moment")
                .replace("asap", "when you have a moment")
                .replace('!', ".");
            if softened.trim_start().to_lowercase().starts_with("hi") {
                softened
            } else {
                format!("Hi,\n\n{softened}")
            }
        }
        EditRule::TemplateRewrite { template } => template
            .replace("{body}", text.trim())
            .replace("{subject}", &email.subject)
            .replace("{sender}", &email.sender_relationship)
            .replace("{recipient}", &email.recipient_relationship),
    }
}

/// Guarantees the draft differs from the original body.
fn ensure_changed(draft: String, original: &str) -> String {
    if draft.trim() == original.trim() || draft.trim().is_empty() {
        format!("{}\n\nThank you.", original.trim_end())
    } else {
        draft
    }
}

fn scope_notes(rule: &EditRule) -> Vec<String> {
    match rule {
        EditRule::AppendSignoff => vec!["The email ends abruptly; add a courteous closing.".into()],
        EditRule::SoftenExclamations => vec![
            "Exclamation marks read as demanding.".into(),
            "Open with a greeting.".into(),
        ],
        EditRule::TemplateRewrite { .. } => vec!["Restructure with a proper salutation and sign-off.".into()],
    }
}

/// Produces the full ordered payload sequence a bot submits for a task.
///
/// Scaffold tasks yield 4 payloads on the yes path and 6 on the no path;
/// ballot tasks yield a single vote, refined when the document asks for it.
pub fn sim_worker_respond(bot: &BotProfile, doc: &TaskDocument, lexicons: &LexiconSet, seed: u64) -> Vec<StepPayload> {
    let mut rng = rng_for(seed, bot, doc);
    let email = &doc.email;
    let body = &email.body;

    match doc.kind {
        AssignmentKind::Ballot => {
            let choice = if rng.random_bool(0.5) { Choice::A } else { Choice::B };
            let refined_text = doc.refinement_required.then(|| {
                let chosen = doc
                    .candidates
                    .as_ref()
                    .map(|c| match choice {
                        Choice::A => c.a.as_str(),
                        Choice::B => c.b.as_str(),
                    })
                    .unwrap_or(body);
                ensure_changed(polish(&apply_edit(&bot.edit_rule, chosen, email)), body)
            });
            vec![StepPayload::Vote { choice, refined_text }]
        }
        AssignmentKind::Scaffold => {
            let tone = current_tone(bot, body, lexicons, &mut rng);
            let correct = verdict(bot, body, lexicons);
            let mut steps = vec![StepPayload::CurrentTone { tone }, StepPayload::Verdict { correct }];
            if correct {
                steps.push(StepPayload::ScopeNote {
                    notes: scope_notes(&bot.edit_rule),
                });
                steps.push(StepPayload::DirectImprovement {
                    text: ensure_changed(apply_edit(&bot.edit_rule, body, email), body),
                });
            } else {
                let target = target_tone(email, &mut rng);
                let mut items = scope_notes(&bot.edit_rule);
                items.push(format!("Shift the tone towards {target}."));
                let revision = ensure_changed(apply_edit(&bot.edit_rule, body, email), body);
                let refinement = ensure_changed(polish(&revision), body);
                steps.push(StepPayload::TargetTone { tone: target });
                steps.push(StepPayload::ImprovementList { items });
                steps.push(StepPayload::Revision { text: revision });
                steps.push(StepPayload::Refinement { text: refinement });
            }
            steps
        }
    }
}
