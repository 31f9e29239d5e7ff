//! Binary logic levels, edges and the simulation time quantum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Simulation time in ticks of 1 µs.
pub type Tick = u64;

/// A binary logic level. The language literals map `OK` to [`Level::High`]
/// and `NOK` to [`Level::Low`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    High,
}

impl Level {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Level::High
        } else {
            Level::Low
        }
    }

    pub fn is_high(self) -> bool {
        self == Level::High
    }

    /// Language literal for this level (`OK` / `NOK`).
    pub fn literal(self) -> &'static str {
        match self {
            Level::High => "OK",
            Level::Low => "NOK",
        }
    }

    /// Parse an `OK` / `NOK` literal, case-insensitively.
    pub fn from_literal(s: &str) -> Option<Self> {
        if s.eq_ignore_ascii_case("OK") {
            Some(Level::High)
        } else if s.eq_ignore_ascii_case("NOK") {
            Some(Level::Low)
        } else {
            None
        }
    }
}

impl std::ops::Not for Level {
    type Output = Level;

    fn not(self) -> Level {
        match self {
            Level::High => Level::Low,
            Level::Low => Level::High,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::High => "high",
            Level::Low => "low",
        })
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(Level::High),
            "low" => Ok(Level::Low),
            other => Err(format!("unknown level '{other}' (expected high|low)")),
        }
    }
}

/// Signal transition direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Rising,
    Falling,
}

impl Edge {
    /// The edge (if any) going from `prev` to `next`.
    pub fn between(prev: Level, next: Level) -> Option<Edge> {
        match (prev, next) {
            (Level::Low, Level::High) => Some(Edge::Rising),
            (Level::High, Level::Low) => Some(Edge::Falling),
            _ => None,
        }
    }

    pub fn opposite(self) -> Edge {
        match self {
            Edge::Rising => Edge::Falling,
            Edge::Falling => Edge::Rising,
        }
    }

    /// Short form used in measurement tables (`rise` / `fall`).
    pub fn short(self) -> &'static str {
        match self {
            Edge::Rising => "rise",
            Edge::Falling => "fall",
        }
    }

    /// Language function name (`rising_edge` / `falling_edge`).
    pub fn function_name(self) -> &'static str {
        match self {
            Edge::Rising => "rising_edge",
            Edge::Falling => "falling_edge",
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Edge::Rising => "rising",
            Edge::Falling => "falling",
        })
    }
}

impl FromStr for Edge {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rising" | "rise" | "rising_edge" => Ok(Edge::Rising),
            "falling" | "fall" | "falling_edge" => Ok(Edge::Falling),
            other => Err(format!("unknown edge '{other}' (expected rising|falling)")),
        }
    }
}
