use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Identifies one email's trip through the pipeline.
    TaskId
);
string_id!(
    /// Identifies one unit of work handed to one worker.
    AssignmentId
);
string_id!(WorkerId);

impl TaskId {
    pub(crate) fn from_counter(n: u64) -> Self {
        Self(format!("ct-{n:06}"))
    }
}

impl AssignmentId {
    pub(crate) fn from_counter(n: u64) -> Self {
        Self(format!("as-{n:06}"))
    }
}

/// Milliseconds on whatever clock the caller drives the orchestrator with.
pub type Millis = u64;
