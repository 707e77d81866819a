//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use crowdtone_core::provider::{BotProfile, EditRule, SimulationEmail, VerdictRule};
use crowdtone_core::{parse_tone, EmailSubmission, ScaffoldOutcome, WorkerId};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// The fixture email corpus, in file-name order.
pub fn corpus() -> Vec<SimulationEmail> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir().join("emails"))
        .expect("fixture emails")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| SimulationEmail {
            label: p.file_stem().unwrap().to_string_lossy().into_owned(),
            email: serde_json::from_str::<EmailSubmission>(&std::fs::read_to_string(&p).unwrap()).unwrap(),
        })
        .collect()
}

/// `n` qualified bots cycling through the verdict and edit rules.
pub fn bots(n: usize) -> Vec<BotProfile> {
    (0..n)
        .map(|i| {
            let v = match i % 3 {
                0 => VerdictRule::AlwaysYes,
                1 => VerdictRule::AlwaysNo,
                _ => VerdictRule::Keyword { lexicon: "builtin".into() },
            };
            let e = if i % 2 == 0 { EditRule::AppendSignoff } else { EditRule::SoftenExclamations };
            BotProfile::new(&format!("bench-{i:03}"), v, e)
        })
        .collect()
}

/// Three scaffold outcomes with the given verdicts and target tones.
pub fn outcomes(verdicts: [bool; 3], tones: [(&str, &str, &str); 3]) -> Vec<ScaffoldOutcome> {
    (0..3)
        .map(|k| {
            let tone = parse_tone(tones[k].0, tones[k].1, Some(tones[k].2)).unwrap();
            ScaffoldOutcome {
                worker_id: WorkerId::from(format!("w{k}")),
                current_tone: tone,
                verdict: verdicts[k],
                target_tone: (!verdicts[k]).then_some(tone),
                notes: vec!["note".into()],
                improved_text: format!("version {k}"),
                draft_history: vec![format!("version {k}")],
                completed_at: k as u64 + 1,
            }
        })
        .collect()
}
