//! Random device models and stimulus programs for property tests, plus an
//! independent measurement oracle that reads nothing but the final trace.

#![allow(dead_code)]

use std::fmt::Write as _;

use proptest::prelude::*;
use teststand::config::{load_dut_model, load_signal_map, DutModel, SignalMap};
use teststand::engine::{MeasurementResult, Trace};
use teststand::expand::{expand_suite, TestInstance};
use teststand::level::{Edge, Level, Tick};

#[derive(Debug, Clone)]
pub struct Case {
    pub map_xml: String,
    pub dut_xml: String,
    pub source: String,
}

impl Case {
    pub fn load(&self) -> (SignalMap, DutModel, TestInstance) {
        let map = load_signal_map(&self.map_xml, "rand_map.xml").expect("generated map loads");
        let dut = load_dut_model(&self.dut_xml, "rand_dut.xml", &map).expect("generated dut loads");
        let suite = teststand::dsl::parse_source(&self.source, "rand.vht").expect("generated source parses");
        let inst = expand_suite(&suite).expect("generated source expands").remove(0);
        (map, dut, inst)
    }
}

const OPS: [&str; 4] = ["AND", "OR", "NOT", "BUF"];

#[derive(Debug, Clone)]
struct Shape {
    stimuli: usize,
    monitors: usize,
    nodes: usize,
    feedback: usize,
    latches: usize,
}

fn shape() -> impl Strategy<Value = Shape> {
    (1usize..4, 1usize..4, 0usize..6, 0usize..3, 0usize..2).prop_map(|(stimuli, monitors, nodes, feedback, latches)| Shape {
        stimuli,
        monitors,
        nodes,
        feedback,
        latches,
    })
}

type Measure = (usize, bool, usize, bool, u64);
type Watchdog = (usize, bool, usize, bool, u64);

pub fn case() -> impl Strategy<Value = Case> {
    shape().prop_flat_map(|sh| {
        // net numbering: stimuli, feedback nets, then nodes in order
        let base = sh.stimuli + sh.feedback;
        let nodes: Vec<_> = (0..sh.nodes)
            .map(|i| (0usize..4, prop::collection::vec(0..base + i, 1..4)))
            .collect();
        let all_nets = base + sh.nodes;
        let feedback = prop::collection::vec((0..all_nets, 1u64..12), sh.feedback);
        let latches = prop::collection::vec((0..all_nets, 0..all_nets, any::<bool>()), sh.latches);
        let outputs = prop::collection::vec((0..all_nets + sh.latches, 0u64..30), sh.monitors);
        let defaults = prop::collection::vec(any::<bool>(), sh.stimuli + sh.monitors);
        let drives = prop::collection::vec(prop::collection::vec((any::<bool>(), 1u64..40), 2..8), sh.stimuli);
        let signals = sh.stimuli + sh.monitors;
        // triggers mostly on stimuli, so that most probes see their trigger
        let trigger = prop_oneof![3 => 0..sh.stimuli, 1 => 0..signals];
        let measures = prop::collection::vec(
            (trigger, any::<bool>(), 0..signals, any::<bool>(), prop_oneof![3 => Just(0u64), 1 => 1u64..60]),
            1..4,
        );
        let watchdog = prop::option::of((0..sh.stimuli, any::<bool>(), 0..sh.monitors, any::<bool>(), 1u64..40));
        (Just(sh), nodes, feedback, latches, outputs, defaults, drives, (measures, watchdog))
    })
    .prop_map(|(sh, nodes, feedback, latches, outputs, defaults, drives, (measures, watchdog))| {
        build(&sh, &nodes, &feedback, &latches, &outputs, &defaults, &drives, &measures, watchdog)
    })
}

#[allow(clippy::too_many_arguments)]
fn build(
    sh: &Shape,
    nodes: &[(usize, Vec<usize>)],
    feedback: &[(usize, u64)],
    latches: &[(usize, usize, bool)],
    outputs: &[(usize, u64)],
    defaults: &[bool],
    drives: &[Vec<(bool, u64)>],
    measures: &[Measure],
    watchdog: Option<Watchdog>,
) -> Case {
    let lvl = |b: bool| if b { "high" } else { "low" };
    let lit = |b: bool| if b { "OK" } else { "NOK" };
    let stim = |i: usize| format!("s{i}");
    let mon = |i: usize| format!("m{i}");
    let net = |i: usize| -> String {
        if i < sh.stimuli {
            stim(i)
        } else if i < sh.stimuli + sh.feedback {
            format!("fb{}", i - sh.stimuli)
        } else if i < sh.stimuli + sh.feedback + sh.nodes {
            format!("n{}", i - sh.stimuli - sh.feedback)
        } else {
            format!("q{}", i - sh.stimuli - sh.feedback - sh.nodes)
        }
    };

    let mut map = String::from("<signals>\n");
    for (i, &d) in defaults[..sh.stimuli].iter().enumerate() {
        let _ = writeln!(map, r#"  <signal name="{}" kind="generic" direction="stimulus" default="{}"/>"#, stim(i), lvl(d));
    }
    for (j, &d) in defaults[sh.stimuli..].iter().enumerate() {
        let _ = writeln!(map, r#"  <signal name="{}" kind="generic" direction="monitor" default="{}"/>"#, mon(j), lvl(d));
    }
    map.push_str("</signals>\n");

    let mut dut = String::from("<dut>\n");
    for i in 0..sh.stimuli {
        let _ = writeln!(dut, r#"  <input name="{}"/>"#, stim(i));
    }
    for j in 0..sh.monitors {
        let _ = writeln!(dut, r#"  <output name="{}"/>"#, mon(j));
    }
    for (i, (op, operands)) in nodes.iter().enumerate() {
        let op = OPS[*op];
        let used: Vec<String> = if op == "NOT" || op == "BUF" {
            vec![net(operands[0])]
        } else {
            operands.iter().map(|&o| net(o)).collect()
        };
        let _ = writeln!(dut, r#"  <node id="n{i}" op="{op}" operands="{}"/>"#, used.join(" "));
    }
    for (i, (src, ticks)) in feedback.iter().enumerate() {
        let _ = writeln!(dut, r#"  <delay from="{}" to="fb{i}" ticks="{ticks}"/>"#, net(*src));
    }
    for (i, (set, reset, init)) in latches.iter().enumerate() {
        let _ = writeln!(dut, r#"  <latch id="q{i}" set="{}" reset="{}" initial="{}"/>"#, net(*set), net(*reset), lvl(*init));
    }
    for (j, (src, ticks)) in outputs.iter().enumerate() {
        let _ = writeln!(dut, r#"  <delay from="{}" to="{}" ticks="{ticks}"/>"#, net(*src), mon(j));
    }
    let edge_word = |b: bool| if b { "rising" } else { "falling" };
    if let Some((t, te, r, re, timeout)) = watchdog {
        let _ = writeln!(
            dut,
            r#"  <watchdog name="wd" trigger="{}" trigger-edge="{}" response="{}" response-edge="{}" timeout="{timeout}" interlock="{}"/>"#,
            stim(t),
            edge_word(te),
            mon(r),
            edge_word(re),
            mon(sh.monitors - 1)
        );
    }
    dut.push_str("</dut>\n");

    let signal = |k: usize| if k < sh.stimuli { stim(k) } else { mon(k - sh.stimuli) };
    let edge = |b: bool| if b { "rising_edge" } else { "falling_edge" };
    let mut src = String::from("TestID rand\nBegin\n");
    for (i, steps) in drives.iter().enumerate() {
        let _ = writeln!(src, "Process drive_{i}");
        for (level, wait) in steps {
            let _ = writeln!(src, "  {} <= {};\n  wait for {wait} us;", stim(i), lit(*level));
        }
        src.push_str("EndProcess\n");
    }
    for (k, (t, te, s, se, arm)) in measures.iter().enumerate() {
        let _ = writeln!(src, "Process probe_{k}");
        if *arm > 0 {
            let _ = writeln!(src, "  wait for {arm} us;");
        }
        let _ = writeln!(
            src,
            "  measure {}({}) to {}({}) name \"meas{k}\";",
            edge(*te),
            signal(*t),
            edge(*se),
            signal(*s)
        );
        src.push_str("EndProcess\n");
    }
    src.push_str("EndTestID\n");
    Case {
        map_xml: map,
        dut_xml: dut,
        source: src,
    }
}

fn lane_index(trace: &Trace, name: &str) -> usize {
    trace
        .signals
        .iter()
        .position(|s| s.eq_ignore_ascii_case(name))
        .expect("signal in trace")
}

fn edge_at(trace: &Trace, lane: usize, t: usize) -> Option<Edge> {
    let prev = if t == 0 { trace.baseline[lane] } else { trace.lanes[lane][t - 1] };
    let now = trace.lanes[lane][t];
    match (prev, now) {
        (Level::Low, Level::High) => Some(Edge::Rising),
        (Level::High, Level::Low) => Some(Edge::Falling),
        _ => None,
    }
}

/// Brute-force scan of the trace: the first trigger edge at or after the
/// arming tick, then the first stopper edge at or after the trigger, skipping
/// the trigger event itself.
pub fn oracle(trace: &Trace, m: &MeasurementResult) -> (Option<Tick>, Option<Tick>) {
    let tl = lane_index(trace, &m.trigger.signal);
    let sl = lane_index(trace, &m.stopper.signal);
    let n = trace.lanes[0].len();
    let mut trigger = None;
    for t in m.armed_at as usize..n {
        if edge_at(trace, tl, t) == Some(m.trigger.edge) {
            trigger = Some(t);
            break;
        }
    }
    let Some(t0) = trigger else { return (None, None) };
    for t in t0..n {
        if t == t0 && sl == tl {
            continue;
        }
        if edge_at(trace, sl, t) == Some(m.stopper.edge) {
            return (Some(t0 as Tick), Some(t as Tick));
        }
    }
    (Some(t0 as Tick), None)
}

/// A flat loop layout: tag sets with their arm counts, and loops that each
/// pick one set, list its arms in some order and live in one process.
#[derive(Debug, Clone)]
pub struct LoopLayout {
    pub sets: Vec<usize>,
    pub loops: Vec<LoopUse>,
    pub processes: usize,
}

#[derive(Debug, Clone)]
pub struct LoopUse {
    pub set: usize,
    pub order: Vec<usize>,
    pub process: usize,
}

pub fn tag_name(set: usize, arm: usize) -> String {
    format!("S{set}T{arm}")
}

fn wait_code(set: usize, arm: usize) -> u64 {
    100 + 10 * set as u64 + arm as u64
}

pub fn loop_layout() -> impl Strategy<Value = LoopLayout> {
    (prop::collection::vec(1usize..=4, 1..=4), 1usize..=3).prop_flat_map(|(sets, processes)| {
        let n = sets.len();
        let sets2 = sets.clone();
        let loops = prop::collection::vec((0..n, 0..processes), 1..=6).prop_flat_map(move |picks| {
            let per: Vec<_> = picks
                .iter()
                .map(|&(set, process)| {
                    Just((0..sets2[set]).collect::<Vec<usize>>())
                        .prop_shuffle()
                        .prop_map(move |order| LoopUse { set, order, process })
                })
                .collect();
            per
        });
        (Just(sets), loops, Just(processes)).prop_map(|(sets, loops, processes)| LoopLayout { sets, loops, processes })
    })
}

impl LoopLayout {
    pub fn source(&self) -> String {
        let mut src = String::from("TestID L\nBegin\n");
        for p in 0..self.processes {
            let _ = writeln!(src, "Process p{p}\n  wait for 1 us;");
            for l in self.loops.iter().filter(|l| l.process == p) {
                src.push_str("  Loop\n");
                for &arm in &l.order {
                    let _ = writeln!(
                        src,
                        "    Tag {}\n      wait for {} us;\n    EndTag",
                        tag_name(l.set, arm),
                        wait_code(l.set, arm)
                    );
                }
                src.push_str("  EndLoop\n");
            }
            src.push_str("EndProcess\n");
        }
        src.push_str("EndTestID\n");
        src
    }

    /// Loops in the order the expander meets them: process by process.
    fn textual(&self) -> Vec<&LoopUse> {
        (0..self.processes)
            .flat_map(|p| self.loops.iter().filter(move |l| l.process == p))
            .collect()
    }

    /// Enumerate every per-loop arm combination, keep the consistent ones
    /// and order them by the first-met loop's arm order.
    pub fn brute_force(&self) -> Vec<BruteInstance> {
        let loops = self.textual();
        let mut seen_sets: Vec<usize> = Vec::new();
        for l in &loops {
            if !seen_sets.contains(&l.set) {
                seen_sets.push(l.set);
            }
        }
        let first_order = |set: usize| &loops.iter().find(|l| l.set == set).unwrap().order;
        let total: usize = loops.iter().map(|l| l.order.len()).product();
        let mut out: Vec<(Vec<usize>, BruteInstance)> = Vec::new();
        for mut k in 0..total {
            let mut pick = Vec::with_capacity(loops.len());
            for l in loops.iter().rev() {
                pick.push(l.order[k % l.order.len()]);
                k /= l.order.len();
            }
            pick.reverse();
            let consistent = loops
                .iter()
                .zip(&pick)
                .all(|(l, &a)| loops.iter().zip(&pick).all(|(m, &b)| m.set != l.set || a == b));
            if !consistent {
                continue;
            }
            let arm_of = |set: usize| pick[loops.iter().position(|l| l.set == set).unwrap()];
            let tags: Vec<String> = seen_sets.iter().map(|&s| tag_name(s, arm_of(s))).collect();
            if out.iter().any(|(_, b)| b.tags == tags) {
                continue;
            }
            let key: Vec<usize> = seen_sets
                .iter()
                .map(|&s| first_order(s).iter().position(|&a| a == arm_of(s)).unwrap())
                .collect();
            let waits = (0..self.processes)
                .map(|p| {
                    let mut w = vec![1];
                    for (l, &a) in loops.iter().zip(&pick) {
                        if l.process == p {
                            w.push(wait_code(l.set, a));
                        }
                    }
                    w
                })
                .collect();
            out.push((key, BruteInstance { tags, waits }));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out.into_iter().map(|(_, b)| b).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteInstance {
    pub tags: Vec<String>,
    /// Wait durations per process, in statement order.
    pub waits: Vec<Vec<u64>>,
}

pub fn instance_waits(inst: &TestInstance) -> Vec<Vec<u64>> {
    inst.processes
        .iter()
        .map(|p| {
            p.actions
                .iter()
                .filter_map(|a| match a {
                    teststand::expand::Action::WaitFor { ticks } => Some(*ticks),
                    _ => None,
                })
                .collect()
        })
        .collect()
}
