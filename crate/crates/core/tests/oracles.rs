//! Worked values computed by hand-rolled references and frozen here.

use crowdtone_core::consensus::{select_pair, PairRationale};
use crowdtone_core::provider::{run_simulation, BotProfile, EditRule, LexiconSet, SimulationEmail, VerdictRule};
use crowdtone_core::scaffold::ScaffoldOutcome;
use crowdtone_core::submission::EmailSubmission;
use crowdtone_core::tone::parse_tone;
use crowdtone_core::PipelineConfig;

/// Similarity computed on the canonical label strings, independent of the
/// enum implementation.
fn reference_similarity(a: (&str, &str, &str), b: (&str, &str, &str)) -> u8 {
    let mut s = 0;
    if a.0 == b.0 {
        s += 4;
    }
    if a.1 == b.1 {
        s += 2;
    }
    if !a.2.is_empty() && a.2 == b.2 {
        s += 1;
    }
    s
}

/// Index pair with the highest similarity; the earliest pair wins ties.
fn reference_best_pair(tones: [(&str, &str, &str); 3]) -> ((usize, usize), u8) {
    let mut best = ((0, 1), reference_similarity(tones[0], tones[1]));
    for (i, j) in [(0, 2), (1, 2)] {
        let s = reference_similarity(tones[i], tones[j]);
        if s > best.1 {
            best = ((i, j), s);
        }
    }
    best
}

fn outcome(worker: &str, verdict: bool, target: (&str, &str, &str), completed_at: u64) -> ScaffoldOutcome {
    let tone = parse_tone(target.0, target.1, Some(target.2)).unwrap();
    ScaffoldOutcome {
        worker_id: worker.into(),
        current_tone: tone,
        verdict,
        target_tone: (!verdict).then_some(tone),
        notes: vec![],
        improved_text: format!("text by {worker}"),
        draft_history: vec![],
        completed_at,
    }
}

#[test]
fn unanimous_no_pair_by_similarity() {
    let tones = [
        ("formal", "serious", "very"),
        ("formal", "serious", "somewhat"),
        ("informal", "enraged", "very"),
    ];
    // frozen reference output
    assert_eq!(reference_similarity(tones[0], tones[1]), 6);
    assert_eq!(reference_similarity(tones[0], tones[2]), 1);
    assert_eq!(reference_similarity(tones[1], tones[2]), 0);
    assert_eq!(reference_best_pair(tones), ((0, 1), 6));

    let outcomes: Vec<_> = tones
        .iter()
        .enumerate()
        .map(|(i, t)| outcome(&format!("w{i}"), false, *t, 10 + i as u64))
        .collect();
    let pair = select_pair(&outcomes).unwrap();
    assert_eq!(pair.rationale, PairRationale::UnanimousSimilarity);
    assert_eq!(pair.similarity, Some(6));
    assert_eq!((pair.a.worker_id.as_str(), pair.b.worker_id.as_str()), ("w0", "w1"));
}

/// Verdict-count reference: two of one kind forms the pair.
fn reference_rationale(verdicts: &str) -> &'static str {
    match verdicts.matches('Y').count() {
        2 => "majority_yes",
        1 => "majority_no",
        _ => "unanimous_similarity",
    }
}

#[test]
fn bot_verdicts_no_no_yes_give_majority_no() {
    assert_eq!(reference_rationale("NNY"), "majority_no");

    let bots = vec![
        BotProfile::new("no-1", VerdictRule::AlwaysNo, EditRule::SoftenExclamations),
        BotProfile::new("no-2", VerdictRule::AlwaysNo, EditRule::AppendSignoff),
        BotProfile::new("yes-1", VerdictRule::AlwaysYes, EditRule::AppendSignoff),
        BotProfile::new("ballot-1", VerdictRule::AlwaysYes, EditRule::AppendSignoff),
        BotProfile::new("ballot-2", VerdictRule::AlwaysYes, EditRule::AppendSignoff),
        BotProfile::new("ballot-3", VerdictRule::AlwaysYes, EditRule::AppendSignoff),
    ];
    let emails = [SimulationEmail {
        label: "late-report".into(),
        email: EmailSubmission {
            sender_relationship: "manager".into(),
            recipient_relationship: "direct report".into(),
            subject: "Report".into(),
            body: "The report is late again. Fix it!".into(),
            context_note: "Third late report this quarter".into(),
            ..Default::default()
        },
    }];
    let report = run_simulation(&emails, &bots, &LexiconSet::default(), &PipelineConfig::default(), 7).unwrap();
    let e = &report.emails[0];
    assert_eq!(e.verdict_pattern, "NNY");
    assert_eq!(
        e.rationale.map(|r| r.as_str()),
        Some(reference_rationale(&e.verdict_pattern))
    );
}
