use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hierarchy {
    Senior,
    SameLevel,
    Junior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipType {
    FriendsFamily,
    Acquaintances,
    /// Cold emails.
    Strangers,
}

/// How much of the optional context a sender supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    Minimal,
    Partial,
    Maximum,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("mandatory field `{field}` is missing or blank")]
pub struct InvalidSubmission {
    pub field: &'static str,
}

/// An email plus the sender-supplied context around it.
///
/// Mandatory strings default to empty when absent from JSON so that a
/// missing field and a blank one produce the same validation error.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmailSubmission {
    #[serde(default)]
    pub sender_relationship: String,
    #[serde(default)]
    pub recipient_relationship: String,
    #[serde(default)]
    pub subject: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub context_note: String,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipient_gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_native_language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipient_native_language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<Hierarchy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relationship_type: Option<RelationshipType>,
}

impl EmailSubmission {
    pub fn validate(&self) -> Result<(), InvalidSubmission> {
        let mandatory = [
            ("sender_relationship", &self.sender_relationship),
            ("recipient_relationship", &self.recipient_relationship),
            ("subject", &self.subject),
            ("body", &self.body),
            ("context_note", &self.context_note),
        ];
        match mandatory.iter().find(|(_, v)| v.trim().is_empty()) {
            Some((field, _)) => Err(InvalidSubmission { field }),
            None => Ok(()),
        }
    }

    pub fn context_mode(&self) -> ContextMode {
        let present = [
            self.sender_gender.is_some(),
            self.recipient_gender.is_some(),
            self.sender_native_language.is_some(),
            self.recipient_native_language.is_some(),
            self.hierarchy.is_some(),
            self.relationship_type.is_some(),
        ];
        let count = present.iter().filter(|p| **p).count();
        match count {
            0 => ContextMode::Minimal,
            n if n == present.len() => ContextMode::Maximum,
            _ => ContextMode::Partial,
        }
    }
}

#[cfg(test)]
pub(crate) fn sample_email() -> EmailSubmission {
    EmailSubmission {
        sender_relationship: "intern".into(),
        recipient_relationship: "manager".into(),
        subject: "Report".into(),
        body: "Send me the report now!".into(),
        context_note: "Following up on a late report".into(),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_fields_rejected() {
        let mut e = sample_email();
        assert!(e.validate().is_ok());
        e.body = "   \n".into();
        assert_eq!(e.validate().unwrap_err().field, "body");

        let missing: EmailSubmission =
            serde_json::from_str(r#"{"sender_relationship":"a","recipient_relationship":"b","body":"x","context_note":"c"}"#)
                .unwrap();
        assert_eq!(missing.validate().unwrap_err().field, "subject");
    }

    #[test]
    fn context_modes() {
        let mut e = sample_email();
        assert_eq!(e.context_mode(), ContextMode::Minimal);
        e.hierarchy = Some(Hierarchy::Senior);
        assert_eq!(e.context_mode(), ContextMode::Partial);
        e.relationship_type = Some(RelationshipType::Strangers);
        e.sender_gender = Some("f".into());
        e.recipient_gender = Some("m".into());
        e.sender_native_language = Some("English".into());
        e.recipient_native_language = Some("Hindi".into());
        assert_eq!(e.context_mode(), ContextMode::Maximum);
    }
}
