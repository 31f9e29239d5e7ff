//! Signal-map and DUT-model configuration.
//!
//! Both files are small XML documents. The signal map declares every line the
//! test stand can drive or sample; the DUT model describes the netlist that
//! stands in for the safety logic. See `docs/formats.md` for the schemas.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::level::{Edge, Level};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{path}:{line}:{column}: malformed document: {message}")]
    Malformed {
        path: String,
        line: u32,
        column: u32,
        message: String,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: u32,
        message: String,
    },
    #[error("{path}: no signals declared")]
    NoSignals { path: String },
    #[error("{path}:{line}: duplicate signal name '{name}' (collides with '{first}')")]
    DuplicateSignal {
        path: String,
        line: u32,
        name: String,
        first: String,
    },
    #[error("{path}: duplicate identifier '{id}' in DUT model")]
    DuplicateId { path: String, id: String },
    #[error("{path}: reference to undeclared signal or net '{name}' ({context})")]
    Undeclared {
        path: String,
        name: String,
        context: String,
    },
    #[error("{path}: DUT {role} '{name}' must be declared with direction={expected} in the signal map")]
    DirectionMismatch {
        path: String,
        role: &'static str,
        name: String,
        expected: &'static str,
    },
    #[error("{path}: combinational cycle: {}", cycle.join(" -> "))]
    CombinationalCycle { path: String, cycle: Vec<String> },
    #[error("{path}: delay {from} -> {to} has negative length {ticks}")]
    NegativeDelay {
        path: String,
        from: String,
        to: String,
        ticks: i64,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

/// Physical interface adapter of a line. Metadata only: every kind behaves as
/// binary logic in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    Optical,
    Digital24,
    CurrentLoop3w,
    Generic,
}

impl InterfaceKind {
    pub fn token(self) -> &'static str {
        match self {
            InterfaceKind::Optical => "optical",
            InterfaceKind::Digital24 => "digital24",
            InterfaceKind::CurrentLoop3w => "current_loop_3w",
            InterfaceKind::Generic => "generic",
        }
    }
}

impl FromStr for InterfaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "optical" => Ok(InterfaceKind::Optical),
            "digital24" => Ok(InterfaceKind::Digital24),
            "current_loop_3w" => Ok(InterfaceKind::CurrentLoop3w),
            "generic" => Ok(InterfaceKind::Generic),
            _ => Err(format!(
                "unknown kind '{s}' (expected optical|digital24|current_loop_3w|generic)"
            )),
        }
    }
}

/// Whether the test stand drives the line (`Stimulus`, a DUT input) or
/// samples it (`Monitor`, a DUT output).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Stimulus,
    Monitor,
}

impl Direction {
    pub fn token(self) -> &'static str {
        match self {
            Direction::Stimulus => "stimulus",
            Direction::Monitor => "monitor",
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "stimulus" => Ok(Direction::Stimulus),
            "monitor" => Ok(Direction::Monitor),
            _ => Err(format!(
                "unknown direction '{s}' (expected stimulus|monitor)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignalDef {
    pub name: String,
    pub kind: InterfaceKind,
    pub direction: Direction,
    pub default_level: Level,
}

/// Ordered set of signals at the boundary between test stand and DUT.
///
/// Names match case-insensitively but keep their declared spelling.
#[derive(Debug, Clone)]
pub struct SignalMap {
    signals: Vec<SignalDef>,
    source_path: String,
    index: HashMap<String, usize>,
}

impl PartialEq for SignalMap {
    fn eq(&self, other: &Self) -> bool {
        self.signals == other.signals
    }
}

pub(crate) fn fold(name: &str) -> String {
    name.to_ascii_lowercase()
}

impl SignalMap {
    /// Build a map from already-typed definitions, enforcing the map invariants.
    pub fn new(
        signals: Vec<SignalDef>,
        source_path: impl Into<String>,
    ) -> Result<Self, ConfigError> {
        let path = source_path.into();
        Self::build(signals.into_iter().map(|s| (s, 0)).collect(), path)
    }

    fn build(signals: Vec<(SignalDef, u32)>, path: String) -> Result<Self, ConfigError> {
        if signals.is_empty() {
            return Err(ConfigError::NoSignals { path });
        }
        let mut index = HashMap::new();
        let mut defs = Vec::with_capacity(signals.len());
        for (i, (def, line)) in signals.into_iter().enumerate() {
            if def.name.is_empty() {
                return Err(ConfigError::Schema {
                    path,
                    line,
                    message: "signal name must not be empty".into(),
                });
            }
            if let Some(&prev) = index.get(&fold(&def.name)) {
                let first: &SignalDef = &defs[prev];
                return Err(ConfigError::DuplicateSignal {
                    path,
                    line,
                    name: def.name,
                    first: first.name.clone(),
                });
            }
            index.insert(fold(&def.name), i);
            defs.push(def);
        }
        Ok(SignalMap {
            signals: defs,
            source_path: path,
            index,
        })
    }

    pub fn signals(&self) -> &[SignalDef] {
        &self.signals
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Position of a signal in declaration order (case-insensitive lookup).
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(&fold(name)).copied()
    }

    pub fn get(&self, name: &str) -> Option<&SignalDef> {
        self.index_of(name).map(|i| &self.signals[i])
    }

    /// Serialize back to the signal-map schema.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<signals>\n");
        for s in &self.signals {
            let _ = writeln!(
                out,
                "  <signal name=\"{}\" kind=\"{}\" direction=\"{}\" default=\"{}\"/>",
                xml_escape(&s.name),
                s.kind.token(),
                s.direction.token(),
                s.default_level
            );
        }
        out.push_str("</signals>\n");
        out
    }
}

/// Gate function of a combinational node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GateOp {
    And,
    Or,
    Not,
    Buf,
}

impl GateOp {
    pub fn token(self) -> &'static str {
        match self {
            GateOp::And => "AND",
            GateOp::Or => "OR",
            GateOp::Not => "NOT",
            GateOp::Buf => "BUF",
        }
    }
}

impl FromStr for GateOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "AND" => Ok(GateOp::And),
            "OR" => Ok(GateOp::Or),
            "NOT" => Ok(GateOp::Not),
            "BUF" => Ok(GateOp::Buf),
            _ => Err(format!("unknown op '{s}' (expected AND|OR|NOT|BUF)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GateNode {
    pub id: String,
    pub op: GateOp,
    pub operands: Vec<String>,
}

/// A transport delay: `to` follows `from` exactly `ticks` ticks later.
/// `to` names either a DUT output or a fresh internal net.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DelayLine {
    pub from: String,
    pub to: String,
    pub ticks: u64,
}

/// Set/reset latch. Set wins when both are high. The stored level becomes
/// visible on the tick after set/reset settle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatchDef {
    pub id: String,
    pub set: String,
    pub reset: String,
    pub initial: Level,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeSpec {
    pub signal: String,
    pub edge: Edge,
}

/// Reaction-time monitor built into the DUT: arms on the trigger edge, records
/// the time to the response edge, and forces `interlock_output` low once the
/// reaction takes longer than `timeout_ticks`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WatchdogDef {
    pub name: String,
    pub trigger: EdgeSpec,
    pub response: EdgeSpec,
    pub timeout_ticks: u64,
    pub interlock_output: String,
}

/// Netlist standing in for the safety logic under test.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DutModel {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub nodes: Vec<GateNode>,
    pub delays: Vec<DelayLine>,
    pub latches: Vec<LatchDef>,
    pub watchdogs: Vec<WatchdogDef>,
    /// Cold-start level of each input, taken from the signal map.
    pub input_defaults: Vec<Level>,
    #[serde(skip)]
    pub source_path: String,
}

/// Where a net's value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum NetSource {
    Input(usize),
    Node(usize),
    Latch(usize),
    Delay(usize),
}

impl DutModel {
    /// Cross-check the model against `map`, fill in input defaults, and verify
    /// the structural invariants (unique ids, resolved references, no
    /// combinational cycles, positive watchdog timeouts).
    pub fn checked(mut self, map: &SignalMap) -> Result<Self, ConfigError> {
        let path = self.source_path.clone();
        self.input_defaults.clear();
        for name in &self.inputs {
            match map.get(name) {
                None => {
                    return Err(ConfigError::Undeclared {
                        path,
                        name: name.clone(),
                        context: "DUT input".into(),
                    })
                }
                Some(def) if def.direction != Direction::Stimulus => {
                    return Err(ConfigError::DirectionMismatch {
                        path,
                        role: "input",
                        name: name.clone(),
                        expected: "stimulus",
                    })
                }
                Some(def) => self.input_defaults.push(def.default_level),
            }
        }
        for name in &self.outputs {
            match map.get(name) {
                None => {
                    return Err(ConfigError::Undeclared {
                        path,
                        name: name.clone(),
                        context: "DUT output".into(),
                    })
                }
                Some(def) if def.direction != Direction::Monitor => {
                    return Err(ConfigError::DirectionMismatch {
                        path,
                        role: "output",
                        name: name.clone(),
                        expected: "monitor",
                    })
                }
                Some(_) => {}
            }
        }
        self.net_table()?;
        self.combinational_order()?;
        Ok(self)
    }

    /// Map folded net name to its source, rejecting duplicates and dangling
    /// references.
    pub(crate) fn net_table(&self) -> Result<HashMap<String, NetSource>, ConfigError> {
        let path = &self.source_path;
        let mut nets: HashMap<String, NetSource> = HashMap::new();
        let mut define = |name: &str, src: NetSource| -> Result<(), ConfigError> {
            if nets.insert(fold(name), src).is_some() {
                return Err(ConfigError::DuplicateId {
                    path: path.clone(),
                    id: name.to_string(),
                });
            }
            Ok(())
        };
        for (i, n) in self.inputs.iter().enumerate() {
            define(n, NetSource::Input(i))?;
        }
        for (i, n) in self.nodes.iter().enumerate() {
            define(&n.id, NetSource::Node(i))?;
        }
        for (i, l) in self.latches.iter().enumerate() {
            define(&l.id, NetSource::Latch(i))?;
        }
        for (i, d) in self.delays.iter().enumerate() {
            define(&d.to, NetSource::Delay(i))?;
        }

        let output_set: HashSet<String> = self.outputs.iter().map(|o| fold(o)).collect();
        if output_set.len() != self.outputs.len() {
            return Err(ConfigError::Invalid {
                path: path.clone(),
                message: "an output is declared more than once".into(),
            });
        }
        let interlocks: HashSet<String> = self
            .watchdogs
            .iter()
            .map(|w| fold(&w.interlock_output))
            .collect();
        for out in &self.outputs {
            match nets.get(&fold(out)) {
                Some(NetSource::Delay(_)) => {}
                Some(_) => {
                    return Err(ConfigError::Invalid {
                        path: path.clone(),
                        message: format!("output '{out}' must be driven by a delay element"),
                    })
                }
                None if interlocks.contains(&fold(out)) => {}
                None => {
                    return Err(ConfigError::Invalid {
                        path: path.clone(),
                        message: format!("output '{out}' is not driven"),
                    })
                }
            }
        }

        let resolve = |name: &str, context: String| -> Result<(), ConfigError> {
            if nets.contains_key(&fold(name)) {
                Ok(())
            } else {
                Err(ConfigError::Undeclared {
                    path: path.clone(),
                    name: name.to_string(),
                    context,
                })
            }
        };
        for n in &self.nodes {
            let arity_ok = match n.op {
                GateOp::Not | GateOp::Buf => n.operands.len() == 1,
                GateOp::And | GateOp::Or => !n.operands.is_empty(),
            };
            if !arity_ok {
                return Err(ConfigError::Invalid {
                    path: path.clone(),
                    message: format!(
                        "node '{}' ({}) has {} operands",
                        n.id,
                        n.op.token(),
                        n.operands.len()
                    ),
                });
            }
            for op in &n.operands {
                resolve(op, format!("operand of node '{}'", n.id))?;
            }
        }
        for d in &self.delays {
            resolve(&d.from, format!("source of delay to '{}'", d.to))?;
        }
        for l in &self.latches {
            resolve(&l.set, format!("set of latch '{}'", l.id))?;
            resolve(&l.reset, format!("reset of latch '{}'", l.id))?;
        }
        let pins: HashSet<String> = self
            .inputs
            .iter()
            .chain(self.outputs.iter())
            .map(|s| fold(s))
            .collect();
        let mut wd_names = HashSet::new();
        for w in &self.watchdogs {
            if !wd_names.insert(fold(&w.name)) {
                return Err(ConfigError::DuplicateId {
                    path: path.clone(),
                    id: w.name.clone(),
                });
            }
            if w.timeout_ticks < 1 {
                return Err(ConfigError::Invalid {
                    path: path.clone(),
                    message: format!("watchdog '{}' timeout must be >= 1 tick", w.name),
                });
            }
            for s in [&w.trigger.signal, &w.response.signal] {
                if !pins.contains(&fold(s)) {
                    return Err(ConfigError::Undeclared {
                        path: path.clone(),
                        name: s.clone(),
                        context: format!("watchdog '{}' (must be a DUT input or output)", w.name),
                    });
                }
            }
            if !output_set.contains(&fold(&w.interlock_output)) {
                return Err(ConfigError::Undeclared {
                    path: path.clone(),
                    name: w.interlock_output.clone(),
                    context: format!("interlock output of watchdog '{}'", w.name),
                });
            }
        }
        Ok(nets)
    }

    /// Evaluation order of the combinational elements (gate nodes and
    /// zero-tick delays). Latches and delays of one tick or more break cycles.
    pub(crate) fn combinational_order(&self) -> Result<Vec<NetSource>, ConfigError> {
        let nets = self.net_table()?;
        let deps = |src: NetSource| -> Vec<NetSource> {
            let names: Vec<&String> = match src {
                NetSource::Node(i) => self.nodes[i].operands.iter().collect(),
                NetSource::Delay(i) if self.delays[i].ticks == 0 => vec![&self.delays[i].from],
                _ => Vec::new(),
            };
            names
                .into_iter()
                .map(|n| nets[&fold(n)])
                .filter(|s| is_combinational(self, *s))
                .collect()
        };
        let name_of = |src: NetSource| -> String {
            match src {
                NetSource::Input(i) => self.inputs[i].clone(),
                NetSource::Node(i) => self.nodes[i].id.clone(),
                NetSource::Latch(i) => self.latches[i].id.clone(),
                NetSource::Delay(i) => self.delays[i].to.clone(),
            }
        };

        let items: Vec<NetSource> = (0..self.nodes.len())
            .map(NetSource::Node)
            .chain(
                (0..self.delays.len())
                    .filter(|&i| self.delays[i].ticks == 0)
                    .map(NetSource::Delay),
            )
            .collect();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark: HashMap<NetSource, u8> = HashMap::new();
        let mut order = Vec::with_capacity(items.len());
        for &root in &items {
            if mark.get(&root).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack: Vec<(NetSource, Vec<NetSource>)> = vec![(root, deps(root))];
            mark.insert(root, 1);
            while let Some((cur, pending)) = stack.last_mut() {
                if let Some(next) = pending.pop() {
                    match mark.get(&next).copied().unwrap_or(0) {
                        0 => {
                            mark.insert(next, 1);
                            let d = deps(next);
                            stack.push((next, d));
                        }
                        1 => {
                            let start = stack.iter().position(|(s, _)| *s == next).unwrap_or(0);
                            let mut cycle: Vec<String> =
                                stack[start..].iter().map(|(s, _)| name_of(*s)).collect();
                            cycle.push(name_of(next));
                            return Err(ConfigError::CombinationalCycle {
                                path: self.source_path.clone(),
                                cycle,
                            });
                        }
                        _ => {}
                    }
                } else {
                    let done = *cur;
                    mark.insert(done, 2);
                    order.push(done);
                    stack.pop();
                }
            }
        }
        Ok(order)
    }

    /// Serialize to the DUT-model schema.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<dut>\n");
        for i in &self.inputs {
            let _ = writeln!(out, "  <input name=\"{}\"/>", xml_escape(i));
        }
        for o in &self.outputs {
            let _ = writeln!(out, "  <output name=\"{}\"/>", xml_escape(o));
        }
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "  <node id=\"{}\" op=\"{}\" operands=\"{}\"/>",
                xml_escape(&n.id),
                n.op.token(),
                xml_escape(&n.operands.join(" "))
            );
        }
        for d in &self.delays {
            let _ = writeln!(
                out,
                "  <delay from=\"{}\" to=\"{}\" ticks=\"{}\"/>",
                xml_escape(&d.from),
                xml_escape(&d.to),
                d.ticks
            );
        }
        for l in &self.latches {
            let _ = writeln!(
                out,
                "  <latch id=\"{}\" set=\"{}\" reset=\"{}\" initial=\"{}\"/>",
                xml_escape(&l.id),
                xml_escape(&l.set),
                xml_escape(&l.reset),
                l.initial
            );
        }
        for w in &self.watchdogs {
            let _ = writeln!(
                out,
                "  <watchdog name=\"{}\" trigger=\"{}\" trigger-edge=\"{}\" response=\"{}\" response-edge=\"{}\" timeout=\"{}\" interlock=\"{}\"/>",
                xml_escape(&w.name),
                xml_escape(&w.trigger.signal),
                w.trigger.edge,
                xml_escape(&w.response.signal),
                w.response.edge,
                w.timeout_ticks,
                xml_escape(&w.interlock_output)
            );
        }
        out.push_str("</dut>\n");
        out
    }
}

fn is_combinational(model: &DutModel, src: NetSource) -> bool {
    match src {
        NetSource::Node(_) => true,
        NetSource::Delay(i) => model.delays[i].ticks == 0,
        _ => false,
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Attribute reader over one element that rejects unknown attributes.
struct Attrs<'a, 'input> {
    node: roxmltree::Node<'a, 'input>,
    path: &'a str,
    line: u32,
}

impl<'a, 'input> Attrs<'a, 'input> {
    fn new(
        node: roxmltree::Node<'a, 'input>,
        path: &'a str,
        allowed: &[&str],
    ) -> Result<Self, ConfigError> {
        let line = node.document().text_pos_at(node.range().start).row;
        for a in node.attributes() {
            if !allowed.contains(&a.name()) {
                return Err(ConfigError::Schema {
                    path: path.to_string(),
                    line,
                    message: format!(
                        "unknown attribute '{}' on <{}>",
                        a.name(),
                        node.tag_name().name()
                    ),
                });
            }
        }
        Ok(Attrs { node, path, line })
    }

    fn err(&self, message: String) -> ConfigError {
        ConfigError::Schema {
            path: self.path.to_string(),
            line: self.line,
            message,
        }
    }

    fn opt(&self, name: &str) -> Option<&'a str> {
        self.node.attribute(name)
    }

    fn req(&self, name: &str) -> Result<&'a str, ConfigError> {
        self.opt(name).ok_or_else(|| {
            self.err(format!(
                "<{}> is missing attribute '{name}'",
                self.node.tag_name().name()
            ))
        })
    }

    fn parsed<T: FromStr<Err = String>>(&self, name: &str) -> Result<T, ConfigError> {
        self.req(name)?.parse().map_err(|e: String| self.err(e))
    }

    fn integer(&self, name: &str) -> Result<i64, ConfigError> {
        let raw = self.req(name)?;
        raw.trim()
            .parse::<i64>()
            .map_err(|_| self.err(format!("attribute '{name}' must be an integer, got '{raw}'")))
    }
}

fn parse_document<'i>(source: &'i str, path: &str) -> Result<roxmltree::Document<'i>, ConfigError> {
    roxmltree::Document::parse(source).map_err(|e| {
        let pos = e.pos();
        ConfigError::Malformed {
            path: path.to_string(),
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })
}

fn check_root(doc: &roxmltree::Document<'_>, path: &str, expected: &str) -> Result<(), ConfigError> {
    let root = doc.root_element();
    if root.tag_name().name() != expected {
        return Err(ConfigError::Schema {
            path: path.to_string(),
            line: doc.text_pos_at(root.range().start).row,
            message: format!(
                "root element must be <{expected}>, found <{}>",
                root.tag_name().name()
            ),
        });
    }
    Ok(())
}

/// Parse a signal-map document.
pub fn load_signal_map(source: &str, path: &str) -> Result<SignalMap, ConfigError> {
    let doc = parse_document(source, path)?;
    check_root(&doc, path, "signals")?;
    let mut defs = Vec::new();
    for child in doc.root_element().children().filter(|n| n.is_element()) {
        let line = doc.text_pos_at(child.range().start).row;
        if child.tag_name().name() != "signal" {
            return Err(ConfigError::Schema {
                path: path.to_string(),
                line,
                message: format!("unexpected element <{}>", child.tag_name().name()),
            });
        }
        let a = Attrs::new(child, path, &["name", "kind", "direction", "default"])?;
        let default_level = match a.opt("default") {
            None => Level::Low,
            Some(raw) => raw.parse().map_err(|e: String| a.err(e))?,
        };
        defs.push((
            SignalDef {
                name: a.req("name")?.to_string(),
                kind: a.parsed("kind")?,
                direction: a.parsed("direction")?,
                default_level,
            },
            line,
        ));
    }
    SignalMap::build(defs, path.to_string())
}

/// Parse a DUT-model document and cross-check it against `map`.
pub fn load_dut_model(source: &str, path: &str, map: &SignalMap) -> Result<DutModel, ConfigError> {
    let doc = parse_document(source, path)?;
    check_root(&doc, path, "dut")?;
    let mut model = DutModel {
        source_path: path.to_string(),
        ..DutModel::default()
    };
    for child in doc.root_element().children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "input" => {
                let a = Attrs::new(child, path, &["name"])?;
                model.inputs.push(a.req("name")?.to_string());
            }
            "output" => {
                let a = Attrs::new(child, path, &["name"])?;
                model.outputs.push(a.req("name")?.to_string());
            }
            "node" => {
                let a = Attrs::new(child, path, &["id", "op", "operands"])?;
                model.nodes.push(GateNode {
                    id: a.req("id")?.to_string(),
                    op: a.parsed("op")?,
                    operands: a
                        .req("operands")?
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect(),
                });
            }
            "delay" => {
                let a = Attrs::new(child, path, &["from", "to", "ticks"])?;
                let from = a.req("from")?.to_string();
                let to = a.req("to")?.to_string();
                let ticks = a.integer("ticks")?;
                if ticks < 0 {
                    return Err(ConfigError::NegativeDelay {
                        path: path.to_string(),
                        from,
                        to,
                        ticks,
                    });
                }
                model.delays.push(DelayLine {
                    from,
                    to,
                    ticks: ticks as u64,
                });
            }
            "latch" => {
                let a = Attrs::new(child, path, &["id", "set", "reset", "initial"])?;
                let initial = match a.opt("initial") {
                    None => Level::Low,
                    Some(raw) => raw.parse().map_err(|e: String| a.err(e))?,
                };
                model.latches.push(LatchDef {
                    id: a.req("id")?.to_string(),
                    set: a.req("set")?.to_string(),
                    reset: a.req("reset")?.to_string(),
                    initial,
                });
            }
            "watchdog" => {
                let a = Attrs::new(
                    child,
                    path,
                    &[
                        "name",
                        "trigger",
                        "trigger-edge",
                        "response",
                        "response-edge",
                        "timeout",
                        "interlock",
                    ],
                )?;
                let timeout = a.integer("timeout")?;
                if timeout < 1 {
                    return Err(a.err(format!("watchdog timeout must be >= 1, got {timeout}")));
                }
                model.watchdogs.push(WatchdogDef {
                    name: a.req("name")?.to_string(),
                    trigger: EdgeSpec {
                        signal: a.req("trigger")?.to_string(),
                        edge: a.parsed("trigger-edge")?,
                    },
                    response: EdgeSpec {
                        signal: a.req("response")?.to_string(),
                        edge: a.parsed("response-edge")?,
                    },
                    timeout_ticks: timeout as u64,
                    interlock_output: a.req("interlock")?.to_string(),
                });
            }
            other => {
                return Err(ConfigError::Schema {
                    path: path.to_string(),
                    line: doc.text_pos_at(child.range().start).row,
                    message: format!("unexpected element <{other}>"),
                })
            }
        }
    }
    model.checked(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_MAP: &str = r#"<signals>
  <signal name="vms_atot_2_a" kind="generic" direction="stimulus"/>
  <signal name="atot_sta_1" kind="generic" direction="monitor"/>
</signals>"#;

    #[test]
    fn loads_signals_in_declaration_order() {
        let map = load_signal_map(TABLE_MAP, "map.xml").unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.signals()[0].name, "vms_atot_2_a");
        assert_eq!(map.signals()[0].direction, Direction::Stimulus);
        assert_eq!(map.signals()[1].name, "atot_sta_1");
        assert_eq!(map.signals()[1].direction, Direction::Monitor);
        assert_eq!(map.signals()[0].default_level, Level::Low);
        assert_eq!(map.index_of("ATOT_STA_1"), Some(1));
    }

    #[test]
    fn empty_map_is_rejected() {
        let err = load_signal_map("<signals/>", "m.xml").unwrap_err();
        assert_eq!(err, ConfigError::NoSignals { path: "m.xml".into() });
        assert!(err.to_string().contains("no signals declared"));
    }

    #[test]
    fn case_folded_duplicates_are_rejected() {
        let src = r#"<signals>
  <signal name="Mode" kind="generic" direction="stimulus"/>
  <signal name="MODE" kind="optical" direction="stimulus"/>
</signals>"#;
        match load_signal_map(src, "m.xml").unwrap_err() {
            ConfigError::DuplicateSignal { name, first, line, .. } => {
                assert_eq!(name, "MODE");
                assert_eq!(first, "Mode");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_xml_reports_position() {
        let err = load_signal_map("<signals>\n  <signal name=\"a\"\n</signals>", "m.xml").unwrap_err();
        match err {
            ConfigError::Malformed { line, .. } => assert!(line >= 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_tokens_are_config_errors() {
        let bad_kind = r#"<signals><signal name="a" kind="pneumatic" direction="stimulus"/></signals>"#;
        assert!(matches!(
            load_signal_map(bad_kind, "m").unwrap_err(),
            ConfigError::Schema { .. }
        ));
        let bad_dir = r#"<signals><signal name="a" kind="generic" direction="both"/></signals>"#;
        let err = load_signal_map(bad_dir, "m").unwrap_err();
        assert!(err.to_string().contains("unknown direction"));
    }

    fn wire_map() -> SignalMap {
        load_signal_map(
            r#"<signals>
  <signal name="fall_in" kind="digital24" direction="stimulus" default="high"/>
  <signal name="atot_1" kind="optical" direction="monitor"/>
</signals>"#,
            "m.xml",
        )
        .unwrap()
    }

    #[test]
    fn pure_wire_with_six_tick_delay() {
        let map = wire_map();
        let src = r#"<dut>
  <input name="fall_in"/>
  <output name="atot_1"/>
  <node id="w" op="BUF" operands="fall_in"/>
  <delay from="w" to="atot_1" ticks="6"/>
</dut>"#;
        let model = load_dut_model(src, "dut.xml", &map).unwrap();
        assert_eq!(model.nodes.len(), 1);
        assert_eq!(model.nodes[0].op, GateOp::Buf);
        assert_eq!(model.delays, vec![DelayLine { from: "w".into(), to: "atot_1".into(), ticks: 6 }]);
        assert_eq!(model.input_defaults, vec![Level::High]);
    }

    #[test]
    fn zero_delay_is_a_valid_passthrough() {
        let map = wire_map();
        let src = r#"<dut><input name="fall_in"/><output name="atot_1"/>
  <delay from="fall_in" to="atot_1" ticks="0"/></dut>"#;
        let model = load_dut_model(src, "dut.xml", &map).unwrap();
        assert_eq!(model.delays[0].ticks, 0);
    }

    #[test]
    fn self_referencing_gate_is_a_cycle() {
        let map = wire_map();
        let src = r#"<dut><input name="fall_in"/><output name="atot_1"/>
  <node id="loop" op="AND" operands="fall_in loop"/>
  <delay from="loop" to="atot_1" ticks="1"/></dut>"#;
        match load_dut_model(src, "dut.xml", &map).unwrap_err() {
            ConfigError::CombinationalCycle { cycle, .. } => {
                assert_eq!(cycle, vec!["loop".to_string(), "loop".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cycle_through_zero_delay_is_combinational() {
        let map = wire_map();
        let src = r#"<dut><input name="fall_in"/><output name="atot_1"/>
  <node id="a" op="OR" operands="fall_in b"/>
  <delay from="a" to="b" ticks="0"/>
  <delay from="a" to="atot_1" ticks="1"/></dut>"#;
        assert!(matches!(
            load_dut_model(src, "dut.xml", &map).unwrap_err(),
            ConfigError::CombinationalCycle { .. }
        ));
        // the same loop through a one-tick delay is legal
        let ok = src.replace("to=\"b\" ticks=\"0\"", "to=\"b\" ticks=\"1\"");
        load_dut_model(&ok, "dut.xml", &map).unwrap();
    }

    #[test]
    fn cycle_through_latch_is_legal() {
        let map = wire_map();
        let src = r#"<dut><input name="fall_in"/><output name="atot_1"/>
  <node id="s" op="AND" operands="fall_in q"/>
  <latch id="q" set="s" reset="fall_in" initial="high"/>
  <delay from="q" to="atot_1" ticks="2"/></dut>"#;
        load_dut_model(src, "dut.xml", &map).unwrap();
    }

    #[test]
    fn negative_delay_and_undeclared_references() {
        let map = wire_map();
        let neg = r#"<dut><input name="fall_in"/><output name="atot_1"/>
  <delay from="fall_in" to="atot_1" ticks="-3"/></dut>"#;
        assert!(matches!(
            load_dut_model(neg, "d", &map).unwrap_err(),
            ConfigError::NegativeDelay { ticks: -3, .. }
        ));
        let undeclared = r#"<dut><input name="ghost"/></dut>"#;
        assert!(matches!(
            load_dut_model(undeclared, "d", &map).unwrap_err(),
            ConfigError::Undeclared { .. }
        ));
        let dangling = r#"<dut><input name="fall_in"/><output name="atot_1"/>
  <delay from="nowhere" to="atot_1" ticks="1"/></dut>"#;
        assert!(matches!(
            load_dut_model(dangling, "d", &map).unwrap_err(),
            ConfigError::Undeclared { .. }
        ));
    }

    #[test]
    fn dut_direction_must_match_map() {
        let map = wire_map();
        let src = r#"<dut><input name="atot_1"/></dut>"#;
        assert!(matches!(
            load_dut_model(src, "d", &map).unwrap_err(),
            ConfigError::DirectionMismatch { role: "input", .. }
        ));
    }

    #[test]
    fn dut_xml_round_trips() {
        let map = wire_map();
        let src = r#"<dut><input name="fall_in"/><output name="atot_1"/>
  <node id="n" op="NOT" operands="fall_in"/>
  <latch id="q" set="n" reset="fall_in" initial="high"/>
  <delay from="q" to="atot_1" ticks="2"/>
  <watchdog name="wd" trigger="fall_in" trigger-edge="falling" response="atot_1" response-edge="rising" timeout="5" interlock="atot_1"/>
</dut>"#;
        let model = load_dut_model(src, "d", &map).unwrap();
        let again = load_dut_model(&model.to_xml(), "d", &map).unwrap();
        assert_eq!(model, again);
    }
}
