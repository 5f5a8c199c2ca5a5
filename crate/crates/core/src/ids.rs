use core::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                Self(v)
            }
        }
    };
}

id_type!(
    /// Identifier of a simulated human rater.
    RaterId
);
id_type!(
    /// Identifier of a note (generated, adapted or externally submitted).
    NoteId
);
id_type!(
    /// Identifier of a post that may receive notes.
    PostId
);
id_type!(
    /// Identifier of a writer policy.
    WriterId
);

impl WriterId {
    /// Writer id attached to notes that arrive through the external protocol.
    pub const EXTERNAL: WriterId = WriterId(u64::MAX);
}

/// Who produced a note.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NoteOrigin {
    #[serde(rename = "human")]
    Human,
    #[serde(rename = "human_ai_assisted")]
    HumanAIAssisted,
    #[serde(rename = "fully_ai")]
    FullyAI,
}

impl NoteOrigin {
    pub const ALL: [NoteOrigin; 3] = [
        NoteOrigin::Human,
        NoteOrigin::HumanAIAssisted,
        NoteOrigin::FullyAI,
    ];

    pub fn index(self) -> usize {
        match self {
            NoteOrigin::Human => 0,
            NoteOrigin::HumanAIAssisted => 1,
            NoteOrigin::FullyAI => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoteOrigin::Human => "human",
            NoteOrigin::HumanAIAssisted => "human_ai_assisted",
            NoteOrigin::FullyAI => "fully_ai",
        }
    }

    /// Human-written, with or without AI help.
    pub fn is_human(self) -> bool {
        !matches!(self, NoteOrigin::FullyAI)
    }
}

impl fmt::Display for NoteOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
