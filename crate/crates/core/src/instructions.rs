use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::submission::EmailSubmission;

const SOURCE: &str = include_str!("../resources/instructions.v1.toml");

#[derive(Debug, Deserialize)]
struct Templates {
    version: u32,
    stages: BTreeMap<String, String>,
}

fn templates() -> &'static Templates {
    static CELL: OnceLock<Templates> = OnceLock::new();
    CELL.get_or_init(|| toml::from_str(SOURCE).expect("bundled instruction templates parse"))
}

pub fn version() -> u32 {
    templates().version
}

/// Renders the instructions for a stage name (see `scaffold::Stage::as_str`
/// plus `await_ballot`, `await_ballot_refine` and `done`).
pub fn render(stage: &str, email: &EmailSubmission) -> Option<String> {
    let raw = templates().stages.get(stage)?;
    Some(
        raw.trim()
            .replace("{sender}", &email.sender_relationship)
            .replace("{recipient}", &email.recipient_relationship)
            .replace("{subject}", &email.subject),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaffold::Stage;
    use crate::submission::sample_email;

    #[test]
    fn every_stage_has_text() {
        let stages = [
            Stage::AwaitCurrentTone,
            Stage::AwaitVerdict,
            Stage::YesAwaitScope,
            Stage::YesAwaitImprovement,
            Stage::NoAwaitTargetTone,
            Stage::NoAwaitImprovementList,
            Stage::NoAwaitRevision,
            Stage::NoAwaitRefinement,
            Stage::Done,
        ];
        for s in stages {
            assert!(render(s.as_str(), &sample_email()).is_some(), "{s}");
        }
        assert!(render("await_ballot", &sample_email()).is_some());
        assert!(render("await_ballot_refine", &sample_email()).is_some());
        assert_eq!(version(), 1);
    }

    #[test]
    fn first_stage_reads_as_recipient() {
        let text = render("await_current_tone", &sample_email()).unwrap();
        assert!(text.contains("as if you were its recipient (manager)"));
        assert!(!text.contains('{'));
    }
}
