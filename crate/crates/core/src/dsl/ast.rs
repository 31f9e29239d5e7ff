//! Syntax tree of the test-description language.

use std::fmt;

use serde::Serialize;

use crate::level::{Edge, Level, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TimeUnit {
    Ns,
    Us,
    Ms,
    S,
}

impl TimeUnit {
    pub fn from_word(w: &str) -> Option<TimeUnit> {
        match w.to_ascii_lowercase().as_str() {
            "ns" => Some(TimeUnit::Ns),
            "us" => Some(TimeUnit::Us),
            "ms" => Some(TimeUnit::Ms),
            "s" => Some(TimeUnit::S),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::Ns => "ns",
            TimeUnit::Us => "us",
            TimeUnit::Ms => "ms",
            TimeUnit::S => "s",
        }
    }
}

/// A literal duration. Only constructed through [`Duration::new`], which
/// guarantees a strictly positive whole number of 1 µs ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Duration {
    value: u64,
    unit: TimeUnit,
}

impl Duration {
    pub fn new(value: u64, unit: TimeUnit) -> Result<Self, String> {
        if value == 0 {
            return Err("durations must be strictly positive".into());
        }
        let d = Duration { value, unit };
        match unit {
            TimeUnit::Ns if !value.is_multiple_of(1000) => Err(format!(
                "duration {value} ns is not a whole number of 1 us ticks"
            )),
            _ => match d.checked_ticks() {
                Some(_) => Ok(d),
                None => Err(format!("duration {value} {} overflows", unit.as_str())),
            },
        }
    }

    pub fn micros(ticks: Tick) -> Result<Self, String> {
        Self::new(ticks, TimeUnit::Us)
    }

    fn checked_ticks(&self) -> Option<Tick> {
        match self.unit {
            TimeUnit::Ns => Some(self.value / 1000),
            TimeUnit::Us => Some(self.value),
            TimeUnit::Ms => self.value.checked_mul(1_000),
            TimeUnit::S => self.value.checked_mul(1_000_000),
        }
    }

    pub fn ticks(&self) -> Tick {
        self.checked_ticks().expect("validated at construction")
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit.as_str())
    }
}

/// A duration as written: a literal or a reference to a test constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DurationExpr {
    Literal(Duration),
    Constant(String),
}

impl fmt::Display for DurationExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DurationExpr::Literal(d) => d.fmt(f),
            DurationExpr::Constant(c) => f.write_str(c),
        }
    }
}

/// VHDL assertion severities, ordered by gravity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Note,
    Warning,
    Error,
    Failure,
}

impl Severity {
    pub fn from_word(w: &str) -> Option<Severity> {
        match w.to_ascii_uppercase().as_str() {
            "NOTE" => Some(Severity::Note),
            "WARNING" => Some(Severity::Warning),
            "ERROR" => Some(Severity::Error),
            "FAILURE" => Some(Severity::Failure),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Note => "NOTE",
            Severity::Warning => "WARNING",
            Severity::Error => "ERROR",
            Severity::Failure => "FAILURE",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An edge on a named signal, e.g. `falling_edge(vms_atot_2_a)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct EdgeEvent {
    pub edge: Edge,
    pub signal: String,
}

impl fmt::Display for EdgeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.edge.short(), self.signal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TagArm {
    pub tag: String,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopBlock {
    pub arms: Vec<TagArm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Statement {
    Assign {
        signal: String,
        level: Level,
    },
    WaitFor(DurationExpr),
    Assert {
        signal: String,
        expected: Level,
        message: String,
        severity: Severity,
    },
    Measure {
        trigger: EdgeEvent,
        stopper: EdgeEvent,
        name: String,
    },
    Loop(LoopBlock),
    CallMacro {
        name: String,
    },
    StopAfter(DurationExpr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MacroDef {
    pub name: String,
    pub body: Vec<Statement>,
    /// File the macro was defined in.
    pub origin: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstantDecl {
    pub name: String,
    pub value: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProcessAst {
    pub name: String,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestAst {
    pub id: String,
    pub constants: Vec<ConstantDecl>,
    pub processes: Vec<ProcessAst>,
    pub origin: String,
    pub pos: Pos,
}

impl TestAst {
    pub fn constant(&self, name: &str) -> Option<Duration> {
        self.constants
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
            .map(|c| c.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Include {
    pub path: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TestSuiteAst {
    pub includes: Vec<Include>,
    pub macros: Vec<MacroDef>,
    pub tests: Vec<TestAst>,
}

impl TestSuiteAst {
    /// Copy with file origins and source positions cleared, for structural
    /// comparisons across pretty-print round trips.
    pub fn without_locations(&self) -> TestSuiteAst {
        let mut s = self.clone();
        for i in &mut s.includes {
            i.pos = Pos::default();
        }
        for m in &mut s.macros {
            m.origin.clear();
            m.pos = Pos::default();
        }
        for t in &mut s.tests {
            t.origin.clear();
            t.pos = Pos::default();
        }
        s
    }

    pub fn macro_named(&self, name: &str) -> Option<&MacroDef> {
        self.macros.iter().find(|m| m.name.eq_ignore_ascii_case(name))
    }
}

/// Visit every statement, descending into loop arms.
pub fn walk_statements<'a>(body: &'a [Statement], f: &mut dyn FnMut(&'a Statement)) {
    for s in body {
        f(s);
        if let Statement::Loop(l) = s {
            for arm in &l.arms {
                walk_statements(&arm.body, f);
            }
        }
    }
}
