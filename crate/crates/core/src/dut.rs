//! Tick-stepped simulation of a [`DutModel`].
//!
//! Per tick the netlist settles combinationally (gates and zero-tick delays
//! in topological order), the output pins are sampled, built-in watchdogs
//! are evaluated, every pin edge is time-stamped, and finally delay lines
//! shift and latches capture their settled set/reset inputs.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{fold, ConfigError, DutModel, GateOp, NetSource};
use crate::level::{Edge, Level, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pin {
    Input(usize),
    Output(usize),
}

#[derive(Debug, Clone)]
struct CompiledWatchdog {
    name: String,
    trigger: (Pin, Edge),
    response: (Pin, Edge),
    timeout: Tick,
    interlock: usize,
}

/// Compiled, index-resolved form of a validated [`DutModel`].
#[derive(Debug, Clone)]
pub struct Netlist {
    inputs: Vec<String>,
    outputs: Vec<String>,
    input_defaults: Vec<Level>,
    /// net index of each gate node's operands
    node_ops: Vec<(GateOp, Vec<usize>)>,
    node_base: usize,
    latch_base: usize,
    delay_base: usize,
    delays: Vec<(usize, Tick)>,
    latches: Vec<(usize, usize, Level)>,
    order: Vec<NetSource>,
    output_nets: Vec<Option<usize>>,
    watchdogs: Vec<CompiledWatchdog>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WatchdogState {
    pub name: String,
    pub armed_at: Option<Tick>,
    pub last_measurement_us: Option<u64>,
    pub tripped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeRecord {
    pub signal: String,
    pub edge: Edge,
    pub tick: Tick,
}

/// Mutable simulation state of one DUT.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DutState {
    nets: Vec<Level>,
    pipelines: Vec<VecDeque<Level>>,
    latches: Vec<Level>,
    watchdogs: Vec<WatchdogState>,
    prev_inputs: Vec<Level>,
    outputs: Vec<Level>,
    edge_log: Vec<EdgeRecord>,
}

impl DutState {
    /// Output pin levels after the last step (or at reset).
    pub fn outputs(&self) -> &[Level] {
        &self.outputs
    }

    pub fn edge_log(&self) -> &[EdgeRecord] {
        &self.edge_log
    }

    pub fn watchdogs(&self) -> &[WatchdogState] {
        &self.watchdogs
    }

    pub fn latch_levels(&self) -> &[Level] {
        &self.latches
    }

    /// Contents of each delay line, oldest sample first.
    pub fn pipelines(&self) -> Vec<Vec<Level>> {
        self.pipelines.iter().map(|p| p.iter().copied().collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DutEventKind {
    Edge { signal: String, edge: Edge },
    WatchdogMeasurement { watchdog: String, duration_us: u64 },
    WatchdogTimeout { watchdog: String, duration_us: u64 },
}

/// Record published by the DUT's self-test features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DutEvent {
    pub tick: Tick,
    #[serde(flatten)]
    pub kind: DutEventKind,
}

impl fmt::Display for DutEvent {
    /// One event-log line: `tick kind payload...`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DutEventKind::Edge { signal, edge } => write!(f, "{} edge {signal} {edge}", self.tick),
            DutEventKind::WatchdogMeasurement {
                watchdog,
                duration_us,
            } => write!(f, "{} watchdog_measurement {watchdog} {duration_us}", self.tick),
            DutEventKind::WatchdogTimeout {
                watchdog,
                duration_us,
            } => write!(f, "{} watchdog_timeout {watchdog} {duration_us}", self.tick),
        }
    }
}

impl FromStr for DutEvent {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [tick, kind, a, b] = fields[..] else {
            return Err(format!("expected 4 fields, got {}: '{line}'", fields.len()));
        };
        let tick: Tick = tick.parse().map_err(|_| format!("bad tick '{tick}'"))?;
        let duration = || b.parse::<u64>().map_err(|_| format!("bad duration '{b}'"));
        let kind = match kind {
            "edge" => DutEventKind::Edge {
                signal: a.to_string(),
                edge: b.parse()?,
            },
            "watchdog_measurement" => DutEventKind::WatchdogMeasurement {
                watchdog: a.to_string(),
                duration_us: duration()?,
            },
            "watchdog_timeout" => DutEventKind::WatchdogTimeout {
                watchdog: a.to_string(),
                duration_us: duration()?,
            },
            other => return Err(format!("unknown event kind '{other}'")),
        };
        Ok(DutEvent { tick, kind })
    }
}

/// Render events as a newline-delimited log.
pub fn format_event_log(events: &[DutEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

impl Netlist {
    pub fn compile(model: &DutModel) -> Result<Netlist, ConfigError> {
        let table = model.net_table()?;
        let order = model.combinational_order()?;
        let node_base = model.inputs.len();
        let latch_base = node_base + model.nodes.len();
        let delay_base = latch_base + model.latches.len();
        let net_id = |name: &str| -> usize {
            match table[&fold(name)] {
                NetSource::Input(i) => i,
                NetSource::Node(i) => node_base + i,
                NetSource::Latch(i) => latch_base + i,
                NetSource::Delay(i) => delay_base + i,
            }
        };
        let pin = |name: &str| -> Pin {
            let f = fold(name);
            match model.inputs.iter().position(|s| fold(s) == f) {
                Some(i) => Pin::Input(i),
                None => Pin::Output(
                    model
                        .outputs
                        .iter()
                        .position(|s| fold(s) == f)
                        .expect("validated pin"),
                ),
            }
        };
        let input_defaults = if model.input_defaults.len() == model.inputs.len() {
            model.input_defaults.clone()
        } else {
            vec![Level::Low; model.inputs.len()]
        };
        Ok(Netlist {
            inputs: model.inputs.clone(),
            outputs: model.outputs.clone(),
            input_defaults,
            node_ops: model
                .nodes
                .iter()
                .map(|n| (n.op, n.operands.iter().map(|o| net_id(o)).collect()))
                .collect(),
            node_base,
            latch_base,
            delay_base,
            delays: model.delays.iter().map(|d| (net_id(&d.from), d.ticks)).collect(),
            latches: model
                .latches
                .iter()
                .map(|l| (net_id(&l.set), net_id(&l.reset), l.initial))
                .collect(),
            order,
            output_nets: model
                .outputs
                .iter()
                .map(|o| table.get(&fold(o)).map(|_| net_id(o)))
                .collect(),
            watchdogs: model
                .watchdogs
                .iter()
                .map(|w| CompiledWatchdog {
                    name: w.name.clone(),
                    trigger: (pin(&w.trigger.signal), w.trigger.edge),
                    response: (pin(&w.response.signal), w.response.edge),
                    timeout: w.timeout_ticks,
                    interlock: match pin(&w.interlock_output) {
                        Pin::Output(i) => i,
                        Pin::Input(_) => unreachable!("interlock validated as output"),
                    },
                })
                .collect(),
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn input_defaults(&self) -> &[Level] {
        &self.input_defaults
    }

    fn settle(&self, nets: &mut [Level], pipelines: &[VecDeque<Level>], latches: &[Level], inputs: &[Level]) {
        nets[..inputs.len()].copy_from_slice(inputs);
        for (i, l) in latches.iter().enumerate() {
            nets[self.latch_base + i] = *l;
        }
        for (i, p) in pipelines.iter().enumerate() {
            if let Some(front) = p.front() {
                nets[self.delay_base + i] = *front;
            }
        }
        for item in &self.order {
            match *item {
                NetSource::Node(i) => {
                    let (op, operands) = &self.node_ops[i];
                    let v = match op {
                        GateOp::And => operands.iter().all(|&o| nets[o].is_high()),
                        GateOp::Or => operands.iter().any(|&o| nets[o].is_high()),
                        GateOp::Not => !nets[operands[0]].is_high(),
                        GateOp::Buf => nets[operands[0]].is_high(),
                    };
                    nets[self.node_base + i] = Level::from_bool(v);
                }
                NetSource::Delay(i) => nets[self.delay_base + i] = nets[self.delays[i].0],
                _ => {}
            }
        }
    }

    fn pin_outputs(&self, nets: &[Level]) -> Vec<Level> {
        self.output_nets
            .iter()
            .map(|n| n.map_or(Level::High, |i| nets[i]))
            .collect()
    }

    /// Cold-start state: latches at their initial levels, delay lines filled
    /// with the settled level of their source under default inputs, watchdogs
    /// idle, empty edge log.
    pub fn reset(&self) -> DutState {
        let net_count = self.delay_base + self.delays.len();
        let mut nets = vec![Level::Low; net_count];
        let latches: Vec<Level> = self.latches.iter().map(|l| l.2).collect();
        let mut pipelines: Vec<VecDeque<Level>> = self
            .delays
            .iter()
            .map(|&(_, t)| VecDeque::from(vec![Level::Low; t as usize]))
            .collect();
        // Delay lines feed back into their own sources; iterate to a fixpoint.
        for _ in 0..=self.delays.len() + 1 {
            self.settle(&mut nets, &pipelines, &latches, &self.input_defaults);
            let mut changed = false;
            for (i, p) in pipelines.iter_mut().enumerate() {
                let src = nets[self.delays[i].0];
                if p.front().is_some_and(|v| *v != src) {
                    p.iter_mut().for_each(|v| *v = src);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.settle(&mut nets, &pipelines, &latches, &self.input_defaults);
        let outputs = self.pin_outputs(&nets);
        DutState {
            nets,
            pipelines,
            latches,
            watchdogs: self
                .watchdogs
                .iter()
                .map(|w| WatchdogState {
                    name: w.name.clone(),
                    armed_at: None,
                    last_measurement_us: None,
                    tripped: false,
                })
                .collect(),
            prev_inputs: self.input_defaults.clone(),
            outputs,
            edge_log: Vec::new(),
        }
    }

    /// Advance the DUT by one tick with the given committed input levels.
    /// Returns the events published during this tick, in order.
    pub fn step(&self, state: &mut DutState, inputs: &[Level], tick: Tick) -> Vec<DutEvent> {
        assert_eq!(inputs.len(), self.inputs.len(), "one level per DUT input");
        let mut events = Vec::new();
        self.settle(&mut state.nets, &state.pipelines, &state.latches, inputs);
        let mut outputs = self.pin_outputs(&state.nets);

        for (w, ws) in self.watchdogs.iter().zip(state.watchdogs.iter_mut()) {
            if let Some(armed) = ws.armed_at {
                if !ws.tripped && tick - armed > w.timeout {
                    ws.tripped = true;
                    ws.armed_at = None;
                    events.push(DutEvent {
                        tick,
                        kind: DutEventKind::WatchdogTimeout {
                            watchdog: w.name.clone(),
                            duration_us: tick - armed,
                        },
                    });
                }
            }
        }
        for (w, ws) in self.watchdogs.iter().zip(&state.watchdogs) {
            if ws.tripped {
                outputs[w.interlock] = Level::Low;
            }
        }

        let mut in_edges: Vec<Option<Edge>> = Vec::with_capacity(inputs.len());
        for (i, &now) in inputs.iter().enumerate() {
            let e = Edge::between(state.prev_inputs[i], now);
            if let Some(edge) = e {
                log_edge(state, &mut events, &self.inputs[i], edge, tick);
            }
            in_edges.push(e);
        }
        let mut out_edges: Vec<Option<Edge>> = Vec::with_capacity(outputs.len());
        for (i, &now) in outputs.iter().enumerate() {
            let e = Edge::between(state.outputs[i], now);
            if let Some(edge) = e {
                log_edge(state, &mut events, &self.outputs[i], edge, tick);
            }
            out_edges.push(e);
        }
        let saw = |(pin, edge): (Pin, Edge)| match pin {
            Pin::Input(i) => in_edges[i] == Some(edge),
            Pin::Output(i) => out_edges[i] == Some(edge),
        };
        for (w, ws) in self.watchdogs.iter().zip(state.watchdogs.iter_mut()) {
            if ws.tripped {
                continue;
            }
            if ws.armed_at.is_none() && saw(w.trigger) {
                ws.armed_at = Some(tick);
            }
            if let Some(armed) = ws.armed_at {
                if saw(w.response) {
                    let d = tick - armed;
                    ws.last_measurement_us = Some(d);
                    ws.armed_at = None;
                    events.push(DutEvent {
                        tick,
                        kind: DutEventKind::WatchdogMeasurement {
                            watchdog: w.name.clone(),
                            duration_us: d,
                        },
                    });
                }
            }
        }

        for (i, p) in state.pipelines.iter_mut().enumerate() {
            if !p.is_empty() {
                p.pop_front();
                p.push_back(state.nets[self.delays[i].0]);
            }
        }
        for (i, &(set, reset, _)) in self.latches.iter().enumerate() {
            if state.nets[set].is_high() {
                state.latches[i] = Level::High;
            } else if state.nets[reset].is_high() {
                state.latches[i] = Level::Low;
            }
        }
        state.prev_inputs.copy_from_slice(inputs);
        state.outputs = outputs;
        events
    }
}

fn log_edge(state: &mut DutState, events: &mut Vec<DutEvent>, signal: &str, edge: Edge, tick: Tick) {
    state.edge_log.push(EdgeRecord {
        signal: signal.to_string(),
        edge,
        tick,
    });
    events.push(DutEvent {
        tick,
        kind: DutEventKind::Edge {
            signal: signal.to_string(),
            edge,
        },
    });
}

/// Convenience: input vector with one named input overridden.
pub fn inputs_with(netlist: &Netlist, overrides: &HashMap<String, Level>) -> Vec<Level> {
    netlist
        .inputs
        .iter()
        .zip(&netlist.input_defaults)
        .map(|(n, d)| overrides.get(&fold(n)).copied().unwrap_or(*d))
        .collect()
}
