//! Deterministic 1 µs interpreter for expanded test instances.
//!
//! Each tick runs four phases in order: the processes execute every
//! statement due at that tick, buffered drives are committed, the DUT is
//! stepped, and the resulting sample is appended to the trace while armed
//! measurements watch for their edges.

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::config::{ConfigError, Direction, DutModel, SignalMap};
use crate::dsl::{EdgeEvent, Severity};
use crate::dut::{DutEvent, Netlist, WatchdogState};
use crate::expand::{Action, TestInstance};
use crate::level::{Edge, Level, Tick};

pub const DEFAULT_MAX_TICKS: Tick = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("instance '{instance}', process '{process}': signal '{signal}' is not in the signal map")]
    UnknownSignal {
        instance: String,
        process: String,
        signal: String,
    },
    #[error("instance '{instance}', process '{process}': cannot assign monitor signal '{signal}'")]
    AssignToMonitor {
        instance: String,
        process: String,
        signal: String,
    },
    #[error("instance '{instance}', process '{process}': cannot assert on stimulus signal '{signal}'")]
    AssertOnStimulus {
        instance: String,
        process: String,
        signal: String,
    },
    #[error("instance '{instance}' needs {end_tick} ticks, above the limit of {max_ticks}")]
    RunTooLong {
        instance: String,
        end_tick: Tick,
        max_ticks: Tick,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub max_ticks: Tick,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_ticks: DEFAULT_MAX_TICKS,
        }
    }
}

/// Sampled levels of every mapped signal, one lane per signal in map order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub signals: Vec<String>,
    /// Levels visible before tick 0: stimulus defaults and DUT reset outputs.
    #[serde(serialize_with = "ser_levels")]
    pub baseline: Vec<Level>,
    #[serde(serialize_with = "ser_lanes")]
    pub lanes: Vec<Vec<Level>>,
}

fn ser_levels<S: Serializer>(v: &[Level], s: S) -> Result<S::Ok, S::Error> {
    let text: String = v.iter().map(|l| if l.is_high() { 'H' } else { 'L' }).collect();
    s.serialize_str(&text)
}

fn ser_lanes<S: Serializer>(lanes: &[Vec<Level>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(lanes.iter().map(|l| run_length(l)))
}

/// Run-length text of a lane, e.g. `H6 L94`.
pub fn run_length(lane: &[Level]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < lane.len() {
        let mut j = i;
        while j < lane.len() && lane[j] == lane[i] {
            j += 1;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push(if lane[i].is_high() { 'H' } else { 'L' });
        out.push_str(&(j - i).to_string());
        i = j;
    }
    out
}

impl Trace {
    /// Number of samples per lane (`end_tick + 1`).
    pub fn len(&self) -> usize {
        self.lanes.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lane(&self, signal: &str) -> Option<&[Level]> {
        let f = crate::config::fold(signal);
        self.signals
            .iter()
            .position(|s| crate::config::fold(s) == f)
            .map(|i| self.lanes[i].as_slice())
    }

    /// Level of lane `i` just before `tick`.
    pub fn before(&self, i: usize, tick: Tick) -> Level {
        if tick == 0 {
            self.baseline[i]
        } else {
            self.lanes[i][tick as usize - 1]
        }
    }

    /// Every edge on lane `i`, including one at tick 0 against the baseline.
    pub fn edges(&self, i: usize) -> Vec<(Tick, Edge)> {
        let mut prev = self.baseline[i];
        let mut out = Vec::new();
        for (t, &l) in self.lanes[i].iter().enumerate() {
            if let Some(e) = Edge::between(prev, l) {
                out.push((t as Tick, e));
            }
            prev = l;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureStatus {
    Completed,
    NoTrigger,
    NoStopper,
}

impl MeasureStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureStatus::Completed => "completed",
            MeasureStatus::NoTrigger => "no_trigger",
            MeasureStatus::NoStopper => "no_stopper",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasurementResult {
    pub name: String,
    pub trigger: EdgeEvent,
    pub stopper: EdgeEvent,
    pub armed_at: Tick,
    pub trigger_at: Option<Tick>,
    pub stopper_at: Option<Tick>,
    pub duration_us: Option<u64>,
    pub status: MeasureStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssertVerdict {
    Pass,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertionResult {
    pub at: Tick,
    pub signal: String,
    pub expected: Level,
    pub observed: Level,
    pub severity: Severity,
    pub message: String,
    pub verdict: AssertVerdict,
    pub process: String,
    /// Position of the assert within its process's action list.
    pub index: usize,
}

impl AssertionResult {
    pub fn violated(&self) -> bool {
        self.verdict == AssertVerdict::Violated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Passed,
    Failed,
    Aborted,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Passed => "passed",
            Verdict::Failed => "failed",
            Verdict::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestRunResult {
    pub instance: String,
    pub verdict: Verdict,
    pub assertions: Vec<AssertionResult>,
    pub measurements: Vec<MeasurementResult>,
    pub end_tick: Tick,
    pub trace: Trace,
    pub events: Vec<DutEvent>,
    pub watchdogs: Vec<WatchdogState>,
}

impl TestRunResult {
    pub fn violations(&self) -> impl Iterator<Item = &AssertionResult> {
        self.assertions.iter().filter(|a| a.violated())
    }
}

/// NOTE violations never fail; WARNING and ERROR fail; FAILURE aborts.
pub fn evaluate_severity(results: &[AssertionResult]) -> Verdict {
    let worst = results.iter().filter(|a| a.violated()).map(|a| a.severity).max();
    match worst {
        Some(Severity::Failure) => Verdict::Aborted,
        Some(Severity::Warning | Severity::Error) => Verdict::Failed,
        _ => Verdict::Passed,
    }
}

/// The last tick of an unaborted run: every process's final resume point
/// and every `Stop after` deadline.
pub fn planned_end_tick(instance: &TestInstance) -> Tick {
    let mut end = 0;
    for p in &instance.processes {
        let mut t: Tick = 0;
        for a in &p.actions {
            match a {
                Action::WaitFor { ticks } => t = t.saturating_add(*ticks),
                Action::StopAfter { ticks } => end = end.max(t.saturating_add(*ticks)),
                _ => {}
            }
        }
        end = end.max(t);
    }
    end
}

#[derive(Debug, Clone)]
enum Op {
    Assign(usize, Level),
    Wait(Tick),
    Assert(usize, Level),
    Measure(usize, Edge, usize, Edge),
    Stop,
}

struct ArmedMeasure {
    action: (usize, usize),
    armed_at: Tick,
    trigger: (usize, Edge),
    stopper: (usize, Edge),
    trigger_at: Option<Tick>,
    stopper_at: Option<Tick>,
}

/// A signal map and compiled DUT, reusable across many instances.
#[derive(Debug, Clone)]
pub struct Engine {
    map: SignalMap,
    netlist: Netlist,
    input_lanes: Vec<usize>,
    output_lanes: Vec<usize>,
}

impl Engine {
    pub fn new(map: &SignalMap, dut: &DutModel) -> Result<Engine, EngineError> {
        let dut = dut.clone().checked(map)?;
        let netlist = Netlist::compile(&dut)?;
        let lane = |n: &String| map.index_of(n).expect("checked against the map");
        Ok(Engine {
            map: map.clone(),
            input_lanes: netlist.inputs().iter().map(lane).collect(),
            output_lanes: netlist.outputs().iter().map(lane).collect(),
            netlist,
        })
    }

    pub fn map(&self) -> &SignalMap {
        &self.map
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    fn compile_ops(&self, instance: &TestInstance) -> Result<Vec<Vec<Op>>, EngineError> {
        let mut out = Vec::with_capacity(instance.processes.len());
        for p in &instance.processes {
            let lookup = |signal: &str| {
                self.map
                    .index_of(signal)
                    .ok_or_else(|| EngineError::UnknownSignal {
                        instance: instance.full_id.clone(),
                        process: p.name.clone(),
                        signal: signal.to_string(),
                    })
            };
            let mut ops = Vec::with_capacity(p.actions.len());
            for a in &p.actions {
                ops.push(match a {
                    Action::Assign { signal, level } => {
                        let i = lookup(signal)?;
                        if self.map.signals()[i].direction != Direction::Stimulus {
                            return Err(EngineError::AssignToMonitor {
                                instance: instance.full_id.clone(),
                                process: p.name.clone(),
                                signal: signal.clone(),
                            });
                        }
                        Op::Assign(i, *level)
                    }
                    Action::Assert {
                        signal, expected, ..
                    } => {
                        let i = lookup(signal)?;
                        if self.map.signals()[i].direction != Direction::Monitor {
                            return Err(EngineError::AssertOnStimulus {
                                instance: instance.full_id.clone(),
                                process: p.name.clone(),
                                signal: signal.clone(),
                            });
                        }
                        Op::Assert(i, *expected)
                    }
                    Action::Measure {
                        trigger, stopper, ..
                    } => Op::Measure(
                        lookup(&trigger.signal)?,
                        trigger.edge,
                        lookup(&stopper.signal)?,
                        stopper.edge,
                    ),
                    Action::WaitFor { ticks } => Op::Wait(*ticks),
                    Action::StopAfter { .. } => Op::Stop,
                });
            }
            out.push(ops);
        }
        Ok(out)
    }

    /// Check an instance against the map without running it.
    pub fn validate(&self, instance: &TestInstance) -> Result<(), EngineError> {
        self.compile_ops(instance).map(|_| ())
    }

    pub fn run(&self, instance: &TestInstance, opts: &RunOptions) -> Result<TestRunResult, EngineError> {
        let programs = self.compile_ops(instance)?;
        let planned = planned_end_tick(instance);
        if planned > opts.max_ticks {
            return Err(EngineError::RunTooLong {
                instance: instance.full_id.clone(),
                end_tick: planned,
                max_ticks: opts.max_ticks,
            });
        }

        let signals = self.map.signals();
        let n = signals.len();
        let mut state = self.netlist.reset();
        let mut visible: Vec<Level> = signals.iter().map(|s| s.default_level).collect();
        for (j, &lane) in self.output_lanes.iter().enumerate() {
            visible[lane] = state.outputs()[j];
        }
        let baseline = visible.clone();
        let mut lanes: Vec<Vec<Level>> = (0..n).map(|_| Vec::with_capacity(planned as usize + 1)).collect();

        let mut cursor = vec![0usize; programs.len()];
        let mut resume_at = vec![0 as Tick; programs.len()];
        let mut drives: Vec<Option<Level>> = vec![None; n];
        let mut inputs = vec![Level::Low; self.input_lanes.len()];
        let mut assertions = Vec::new();
        let mut armed: Vec<ArmedMeasure> = Vec::new();
        let mut events = Vec::new();
        let mut end_tick = planned;
        let mut tick: Tick = 0;

        loop {
            let mut abort = false;
            'procs: for (pi, ops) in programs.iter().enumerate() {
                if resume_at[pi] != tick {
                    continue;
                }
                while cursor[pi] < ops.len() {
                    let idx = cursor[pi];
                    cursor[pi] += 1;
                    match ops[idx] {
                        Op::Assign(i, level) => drives[i] = Some(level),
                        Op::Wait(d) => {
                            resume_at[pi] = tick + d;
                            break;
                        }
                        Op::Stop => {}
                        Op::Assert(i, expected) => {
                            let Action::Assert {
                                signal,
                                message,
                                severity,
                                ..
                            } = &instance.processes[pi].actions[idx]
                            else {
                                unreachable!()
                            };
                            let observed = visible[i];
                            let verdict = if observed == expected {
                                AssertVerdict::Pass
                            } else {
                                AssertVerdict::Violated
                            };
                            assertions.push(AssertionResult {
                                at: tick,
                                signal: signal.clone(),
                                expected,
                                observed,
                                severity: *severity,
                                message: message.clone(),
                                verdict,
                                process: instance.processes[pi].name.clone(),
                                index: idx,
                            });
                            if verdict == AssertVerdict::Violated && *severity == Severity::Failure {
                                abort = true;
                                break 'procs;
                            }
                        }
                        Op::Measure(ti, te, si, se) => armed.push(ArmedMeasure {
                            action: (pi, idx),
                            armed_at: tick,
                            trigger: (ti, te),
                            stopper: (si, se),
                            trigger_at: None,
                            stopper_at: None,
                        }),
                    }
                }
            }

            let mut current = visible.clone();
            for (i, d) in drives.iter_mut().enumerate() {
                if let Some(l) = d.take() {
                    current[i] = l;
                }
            }
            for (k, &lane) in self.input_lanes.iter().enumerate() {
                inputs[k] = current[lane];
            }
            events.extend(self.netlist.step(&mut state, &inputs, tick));
            for (j, &lane) in self.output_lanes.iter().enumerate() {
                current[lane] = state.outputs()[j];
            }

            let edges: Vec<(usize, Edge)> = (0..n)
                .filter_map(|i| Edge::between(visible[i], current[i]).map(|e| (i, e)))
                .collect();
            if !edges.is_empty() {
                for m in armed.iter_mut().filter(|m| m.trigger_at.is_none()) {
                    if edges.contains(&m.trigger) {
                        m.trigger_at = Some(tick);
                    }
                }
                for m in armed.iter_mut() {
                    if m.stopper_at.is_some() {
                        continue;
                    }
                    let Some(t0) = m.trigger_at else { continue };
                    if edges.contains(&m.stopper) && (tick > t0 || m.stopper != m.trigger) {
                        m.stopper_at = Some(tick);
                    }
                }
            }
            for (lane, l) in lanes.iter_mut().zip(&current) {
                lane.push(*l);
            }
            visible = current;

            if abort {
                end_tick = tick;
                break;
            }
            if tick >= end_tick {
                break;
            }
            tick += 1;
        }

        let measurements = armed
            .into_iter()
            .map(|m| {
                let Action::Measure {
                    trigger,
                    stopper,
                    name,
                } = &instance.processes[m.action.0].actions[m.action.1]
                else {
                    unreachable!()
                };
                let (status, duration_us) = match (m.trigger_at, m.stopper_at) {
                    (None, _) => (MeasureStatus::NoTrigger, None),
                    (Some(_), None) => (MeasureStatus::NoStopper, None),
                    (Some(a), Some(b)) => (MeasureStatus::Completed, Some(b - a)),
                };
                MeasurementResult {
                    name: name.clone(),
                    trigger: trigger.clone(),
                    stopper: stopper.clone(),
                    armed_at: m.armed_at,
                    trigger_at: m.trigger_at,
                    stopper_at: m.stopper_at,
                    duration_us,
                    status,
                }
            })
            .collect();

        Ok(TestRunResult {
            instance: instance.full_id.clone(),
            verdict: evaluate_severity(&assertions),
            assertions,
            measurements,
            end_tick,
            trace: Trace {
                signals: signals.iter().map(|s| s.name.clone()).collect(),
                baseline,
                lanes,
            },
            events,
            watchdogs: state.watchdogs().to_vec(),
        })
    }
}

/// One-shot convenience over [`Engine`].
pub fn run_instance(
    instance: &TestInstance,
    map: &SignalMap,
    dut: &DutModel,
    opts: &RunOptions,
) -> Result<TestRunResult, EngineError> {
    Engine::new(map, dut)?.run(instance, opts)
}
