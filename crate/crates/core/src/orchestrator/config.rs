use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ids::Millis;
use crate::provider::QualificationPolicy;
use crate::submission::ContextMode;

/// Total improvement iterations per email. Three means every ballot also
/// carries a refinement of the chosen version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Iterations {
    #[default]
    Two,
    Three,
}

impl Iterations {
    pub fn refinement_enabled(self) -> bool {
        self == Iterations::Three
    }

    pub fn count(self) -> u8 {
        match self {
            Iterations::Two => 2,
            Iterations::Three => 3,
        }
    }

    pub fn from_count(n: u8) -> Option<Self> {
        match n {
            2 => Some(Iterations::Two),
            3 => Some(Iterations::Three),
            _ => None,
        }
    }
}

impl Serialize for Iterations {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.count())
    }
}

impl<'de> Deserialize<'de> for Iterations {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = u8::deserialize(d)?;
        Iterations::from_count(n)
            .ok_or_else(|| serde::de::Error::custom(format!("iterations must be 2 or 3, got {n}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextRequirement {
    #[default]
    Any,
    MinimalOnly,
    MaximumOnly,
}

impl ContextRequirement {
    pub fn admits(self, mode: ContextMode) -> bool {
        match self {
            ContextRequirement::Any => true,
            ContextRequirement::MinimalOnly => mode == ContextMode::Minimal,
            ContextRequirement::MaximumOnly => mode == ContextMode::Maximum,
        }
    }
}

pub const DEFAULT_TASK_DEADLINE_MS: Millis = 30 * 60 * 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub iterations: Iterations,
    pub context_mode_required: ContextRequirement,
    pub task_deadline_ms: Millis,
    pub qualification: QualificationPolicy,
    /// Expirations tolerated per email before it is failed; `None` retries forever.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_reassignments: Option<u32>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            iterations: Iterations::Two,
            context_mode_required: ContextRequirement::Any,
            task_deadline_ms: DEFAULT_TASK_DEADLINE_MS,
            qualification: QualificationPolicy::default(),
            max_reassignments: None,
        }
    }
}

impl PipelineConfig {
    pub fn with_iterations(iterations: Iterations) -> Self {
        Self {
            iterations,
            ..Self::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterations_wire() {
        assert_eq!(serde_json::to_string(&Iterations::Three).unwrap(), "3");
        assert!(serde_json::from_str::<Iterations>("4").is_err());
        let cfg: PipelineConfig = serde_json::from_str(r#"{"iterations":3}"#).unwrap();
        assert!(cfg.iterations.refinement_enabled());
        assert_eq!(cfg.task_deadline_ms, 1_800_000);
        assert_eq!(cfg.qualification.min_approval, 0.95);
    }

    #[test]
    fn context_gate() {
        assert!(ContextRequirement::Any.admits(ContextMode::Partial));
        assert!(!ContextRequirement::MaximumOnly.admits(ContextMode::Minimal));
        assert!(!ContextRequirement::MinimalOnly.admits(ContextMode::Partial));
    }
}
