use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of injury severity levels in every model.
pub const N_LEVELS: usize = 3;

/// Consolidated injury severity outcome. Index order is fixed as
/// `[major, minor, none]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Major,
    Minor,
    None,
}

impl Level {
    pub const ALL: [Level; N_LEVELS] = [Level::Major, Level::Minor, Level::None];

    pub fn index(self) -> usize {
        match self {
            Level::Major => 0,
            Level::Minor => 1,
            Level::None => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Major => "major",
            Level::Minor => "minor",
            Level::None => "none",
        }
    }

    /// Heading used by estimation tables.
    pub fn label(self) -> &'static str {
        match self {
            Level::Major => "major injury",
            Level::Minor => "minor injury",
            Level::None => "no injury",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "major" => Ok(Level::Major),
            "minor" => Ok(Level::Minor),
            "none" | "no" | "no_injury" => Ok(Level::None),
            other => Err(format!("unknown severity level '{other}'")),
        }
    }
}
