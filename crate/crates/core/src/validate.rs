//! Self-validation by fault injection.
//!
//! A known-good instance is corrupted in exactly one statement and re-run.
//! The mutant counts as detected when the engine fails it, or when one of
//! its measurements deviates from the unmutated (golden) run. Each mutation
//! may state where and when the detection is expected; the validation passes
//! only if every mutant is detected exactly as stated.

use serde::Serialize;
use thiserror::Error;

use crate::config::fold;
use crate::engine::{Engine, EngineError, MeasureStatus, MeasurementResult, RunOptions, TestRunResult, Verdict};
use crate::expand::{Action, TestInstance};
use crate::level::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidateError {
    #[error("{path}:{line}: {message}")]
    File { path: String, line: u32, message: String },
    #[error("mutation '{id}': no instance named '{instance}'")]
    UnknownInstance { id: String, instance: String },
    #[error("mutation '{id}': instance '{instance}' has no process '{process}'")]
    UnknownProcess { id: String, instance: String, process: String },
    #[error("mutation '{id}': statement {index} is out of range ({len} statements in process '{process}')")]
    OutOfRange { id: String, process: String, index: usize, len: usize },
    #[error("mutation '{id}': {kind} needs a '{expected}' statement, found '{found}'")]
    KindMismatch { id: String, kind: &'static str, expected: &'static str, found: &'static str },
    #[error("mutation '{id}': shifted wait would last {ticks} ticks")]
    NonPositiveWait { id: String, ticks: i64 },
    #[error("baseline '{instance}' does not pass ({verdict}): {diagnosis}")]
    BaselineFailed { instance: String, verdict: String, diagnosis: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MutationKind {
    FlipAssertExpected,
    ShiftWait { delta: i64 },
    FlipStimulusLevel,
    RenameMeasureStopperEdge,
}

impl MutationKind {
    pub fn name(self) -> &'static str {
        match self {
            MutationKind::FlipAssertExpected => "flip_assert_expected",
            MutationKind::ShiftWait { .. } => "shift_wait",
            MutationKind::FlipStimulusLevel => "flip_stimulus_level",
            MutationKind::RenameMeasureStopperEdge => "rename_measure_stopper_edge",
        }
    }

    fn target(self) -> &'static str {
        match self {
            MutationKind::FlipAssertExpected => "assert",
            MutationKind::ShiftWait { .. } => "wait",
            MutationKind::FlipStimulusLevel => "assign",
            MutationKind::RenameMeasureStopperEdge => "measure",
        }
    }
}

/// Statement address inside an expanded instance. `process` is a process
/// name (case-insensitive) or a zero-based process number; `index` counts
/// statements of the expanded process from zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Locator {
    pub instance: String,
    pub process: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", content = "name", rename_all = "snake_case")]
pub enum DetectionTarget {
    Assertion(String),
    Measurement(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpectedDetection {
    pub target: DetectionTarget,
    pub tick: Option<Tick>,
    pub duration_delta: Option<i64>,
    pub status: Option<MeasureStatus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mutation {
    pub id: String,
    pub kind: MutationKind,
    pub locator: Locator,
    pub expected: Option<ExpectedDetection>,
}

fn process_index(inst: &TestInstance, m: &Mutation) -> Result<usize, ValidateError> {
    let want = fold(&m.locator.process);
    inst.processes
        .iter()
        .position(|p| fold(&p.name) == want)
        .or_else(|| {
            m.locator
                .process
                .parse::<usize>()
                .ok()
                .filter(|&i| i < inst.processes.len())
        })
        .ok_or_else(|| ValidateError::UnknownProcess {
            id: m.id.clone(),
            instance: inst.full_id.clone(),
            process: m.locator.process.clone(),
        })
}

/// Return a copy of `instance` with the located statement corrupted.
pub fn apply_mutation(instance: &TestInstance, m: &Mutation) -> Result<TestInstance, ValidateError> {
    let pi = process_index(instance, m)?;
    let mut out = instance.clone();
    let process = &mut out.processes[pi];
    let len = process.actions.len();
    let action = process
        .actions
        .get_mut(m.locator.index)
        .ok_or_else(|| ValidateError::OutOfRange {
            id: m.id.clone(),
            process: instance.processes[pi].name.clone(),
            index: m.locator.index,
            len,
        })?;
    let mismatch = |found: &Action| ValidateError::KindMismatch {
        id: m.id.clone(),
        kind: m.kind.name(),
        expected: m.kind.target(),
        found: found.kind_name(),
    };
    match (m.kind, action) {
        (MutationKind::FlipAssertExpected, Action::Assert { expected, .. }) => *expected = !*expected,
        (MutationKind::FlipStimulusLevel, Action::Assign { level, .. }) => *level = !*level,
        (MutationKind::RenameMeasureStopperEdge, Action::Measure { stopper, .. }) => {
            stopper.edge = stopper.edge.opposite()
        }
        (MutationKind::ShiftWait { delta }, Action::WaitFor { ticks }) => {
            let shifted = *ticks as i64 + delta;
            if shifted < 1 {
                return Err(ValidateError::NonPositiveWait {
                    id: m.id.clone(),
                    ticks: shifted,
                });
            }
            *ticks = shifted as Tick;
        }
        (_, other) => return Err(mismatch(other)),
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationRow {
    pub mutation: Mutation,
    /// Verdict of the engine on the mutant, or `error`.
    pub engine_verdict: String,
    /// `failed` when the mutant was caught by an assertion or a measurement
    /// deviation, `aborted` for a FAILURE abort, `passed` otherwise.
    pub mutant_verdict: String,
    pub detected: bool,
    pub detection_tick: Option<Tick>,
    pub matches_expectation: bool,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub total: usize,
    pub detected: usize,
    pub matching: usize,
    pub overall_pass: bool,
    pub rows: Vec<ValidationRow>,
}

fn first_diff(a: Option<Tick>, b: Option<Tick>) -> Option<Tick> {
    match (a, b) {
        (x, y) if x == y => None,
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

/// Earliest tick at which a mutant measurement departs from its golden run.
pub fn divergence_tick(golden: &MeasurementResult, mutant: &MeasurementResult) -> Option<Tick> {
    [
        first_diff(golden.trigger_at, mutant.trigger_at),
        first_diff(golden.stopper_at, mutant.stopper_at),
    ]
    .into_iter()
    .flatten()
    .min()
}

fn judge(m: &Mutation, golden: &TestRunResult, mutant: &TestRunResult) -> ValidationRow {
    let first_violation = mutant.violations().filter(|a| a.severity > crate::dsl::Severity::Note).map(|a| a.at).min();
    let deviations: Vec<(&MeasurementResult, &MeasurementResult, Option<Tick>)> = golden
        .measurements
        .iter()
        .map(|g| {
            let mm = mutant.measurements.iter().find(|x| x.name == g.name);
            (g, mm)
        })
        .filter_map(|(g, mm)| match mm {
            Some(mm) => {
                let d = divergence_tick(g, mm);
                let changed = d.is_some() || g.status != mm.status || g.stopper != mm.stopper;
                changed.then_some((g, mm, d))
            }
            None => None,
        })
        .collect();
    let measurement_caught = !deviations.is_empty();
    let detected = mutant.verdict != Verdict::Passed || measurement_caught;
    let mutant_verdict = match mutant.verdict {
        Verdict::Aborted => "aborted",
        Verdict::Failed => "failed",
        Verdict::Passed if measurement_caught => "failed",
        Verdict::Passed => "passed",
    };

    let (detection_tick, matches, explanation) = match &m.expected {
        None => {
            let t = [first_violation, deviations.iter().filter_map(|d| d.2).min()]
                .into_iter()
                .flatten()
                .min();
            let why = if detected { "detected" } else { "mutant behaves like the baseline" };
            (t, detected, why.to_string())
        }
        Some(exp) => match &exp.target {
            DetectionTarget::Assertion(msg) => {
                let hit = mutant.violations().find(|a| &a.message == msg);
                match hit {
                    None => {
                        let why = if mutant.verdict == Verdict::Aborted {
                            format!(
                                "assertion \"{msg}\" never violated; run aborted at tick {} before reaching it",
                                mutant.end_tick
                            )
                        } else {
                            format!("assertion \"{msg}\" never violated")
                        };
                        (None, false, why)
                    }
                    Some(a) => {
                        let ok = exp.tick.is_none_or(|t| t == a.at);
                        let why = if ok {
                            format!("assertion \"{msg}\" violated at tick {}", a.at)
                        } else {
                            format!(
                                "assertion \"{msg}\" violated at tick {}, expected tick {}",
                                a.at,
                                exp.tick.unwrap_or_default()
                            )
                        };
                        (Some(a.at), ok, why)
                    }
                }
            }
            DetectionTarget::Measurement(name) => {
                let hit = deviations.iter().find(|d| &d.0.name == name);
                match hit {
                    None => (None, false, format!("measurement \"{name}\" unchanged")),
                    Some((g, mm, t)) => {
                        let delta = match (g.duration_us, mm.duration_us) {
                            (Some(a), Some(b)) => Some(b as i64 - a as i64),
                            _ => None,
                        };
                        let mut problems = Vec::new();
                        if let Some(want) = exp.tick {
                            if *t != Some(want) {
                                problems.push(format!("diverged at {t:?}, expected tick {want}"));
                            }
                        }
                        if let Some(want) = exp.duration_delta {
                            if delta != Some(want) {
                                problems.push(format!("duration delta {delta:?}, expected {want}"));
                            }
                        }
                        if let Some(want) = exp.status {
                            if mm.status != want {
                                problems.push(format!(
                                    "status {}, expected {}",
                                    mm.status.as_str(),
                                    want.as_str()
                                ));
                            }
                        }
                        let why = if problems.is_empty() {
                            format!(
                                "measurement \"{name}\" diverged at tick {}, now {}",
                                t.map_or("-".into(), |t| t.to_string()),
                                mm.status.as_str()
                            )
                        } else {
                            format!("measurement \"{name}\": {}", problems.join("; "))
                        };
                        (*t, problems.is_empty(), why)
                    }
                }
            }
        },
    };
    ValidationRow {
        mutation: m.clone(),
        engine_verdict: mutant.verdict.as_str().into(),
        mutant_verdict: mutant_verdict.into(),
        detected,
        detection_tick,
        matches_expectation: detected && matches,
        explanation,
    }
}

fn diagnosis(r: &TestRunResult) -> String {
    let v: Vec<String> = r
        .violations()
        .filter(|a| a.severity > crate::dsl::Severity::Note)
        .map(|a| format!("tick {} {} \"{}\"", a.at, a.severity, a.message))
        .collect();
    v.join(", ")
}

/// Run each baseline once, then every mutant. Baselines must pass.
pub fn run_validation(
    engine: &Engine,
    instances: &[TestInstance],
    mutations: &[Mutation],
    opts: &RunOptions,
) -> Result<ValidationReport, ValidateError> {
    let mut baselines = Vec::with_capacity(instances.len());
    for inst in instances {
        let r = engine.run(inst, opts)?;
        if r.verdict != Verdict::Passed {
            return Err(ValidateError::BaselineFailed {
                instance: inst.full_id.clone(),
                verdict: r.verdict.as_str().into(),
                diagnosis: diagnosis(&r),
            });
        }
        baselines.push(r);
    }
    let mut rows = Vec::with_capacity(mutations.len());
    for m in mutations {
        let k = instances
            .iter()
            .position(|i| i.full_id == m.locator.instance)
            .ok_or_else(|| ValidateError::UnknownInstance {
                id: m.id.clone(),
                instance: m.locator.instance.clone(),
            })?;
        let mutant = apply_mutation(&instances[k], m)?;
        rows.push(match engine.run(&mutant, opts) {
            Ok(r) => judge(m, &baselines[k], &r),
            Err(e) => ValidationRow {
                mutation: m.clone(),
                engine_verdict: "error".into(),
                mutant_verdict: "error".into(),
                detected: false,
                detection_tick: None,
                matches_expectation: false,
                explanation: e.to_string(),
            },
        });
    }
    let detected = rows.iter().filter(|r| r.detected).count();
    let matching = rows.iter().filter(|r| r.matches_expectation).count();
    Ok(ValidationReport {
        total: rows.len(),
        detected,
        matching,
        overall_pass: matching == rows.len(),
        rows,
    })
}

/// One assertion flip per assert, expected at the tick the assert ran in
/// the baseline. Measurements whose stopper-edge flip cannot change the
/// baseline trace are returned as uncovered names.
pub fn covering_mutations(instances: &[TestInstance], baselines: &[TestRunResult]) -> (Vec<Mutation>, Vec<String>) {
    let mut out = Vec::new();
    let mut uncovered = Vec::new();
    for (inst, base) in instances.iter().zip(baselines) {
        for p in &inst.processes {
            for (idx, a) in p.actions.iter().enumerate() {
                let locator = Locator {
                    instance: inst.full_id.clone(),
                    process: p.name.clone(),
                    index: idx,
                };
                match a {
                    Action::Assert { message, .. } => {
                        let Some(ran) = base.assertions.iter().find(|r| r.process == p.name && r.index == idx) else {
                            continue;
                        };
                        out.push(Mutation {
                            id: format!("{}/{}/{idx}/assert", inst.full_id, p.name),
                            kind: MutationKind::FlipAssertExpected,
                            locator,
                            expected: Some(ExpectedDetection {
                                target: DetectionTarget::Assertion(message.clone()),
                                tick: Some(ran.at),
                                duration_delta: None,
                                status: None,
                            }),
                        });
                    }
                    Action::Measure { name, .. } => {
                        let Some(g) = base.measurements.iter().find(|m| &m.name == name) else {
                            continue;
                        };
                        let predicted = flipped_stopper_tick(base, g);
                        match first_diff(g.stopper_at, predicted) {
                            Some(t) if g.trigger_at.is_some() => out.push(Mutation {
                                id: format!("{}/{}/{idx}/measure", inst.full_id, p.name),
                                kind: MutationKind::RenameMeasureStopperEdge,
                                locator,
                                expected: Some(ExpectedDetection {
                                    target: DetectionTarget::Measurement(name.clone()),
                                    tick: Some(t),
                                    duration_delta: None,
                                    status: None,
                                }),
                            }),
                            _ => uncovered.push(format!("{}: {name}", inst.full_id)),
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    (out, uncovered)
}

/// Tick of the first stopper edge with the opposite polarity, read off the
/// baseline trace.
fn flipped_stopper_tick(base: &TestRunResult, g: &MeasurementResult) -> Option<Tick> {
    let t0 = g.trigger_at?;
    let lane = base.trace.signals.iter().position(|s| fold(s) == fold(&g.stopper.signal))?;
    let trig_lane = base.trace.signals.iter().position(|s| fold(s) == fold(&g.trigger.signal))?;
    let want = g.stopper.edge.opposite();
    base.trace
        .edges(lane)
        .into_iter()
        .find(|&(t, e)| e == want && t >= t0 && !(t == t0 && lane == trig_lane && want == g.trigger.edge))
        .map(|(t, _)| t)
}

/// Parse a mutation-set document:
///
/// ```xml
/// <mutations>
///   <mutation id="m1" kind="flip_assert_expected" instance="T__A" process="check"
///             index="1" expect-assert="message" expect-tick="200"/>
///   <mutation kind="shift_wait" shift="-5" instance="T__A" process="0" index="0"/>
/// </mutations>
/// ```
pub fn load_mutations(source: &str, path: &str) -> Result<Vec<Mutation>, ValidateError> {
    let file_err = |line: u32, message: String| ValidateError::File {
        path: path.to_string(),
        line,
        message,
    };
    let doc = roxmltree::Document::parse(source).map_err(|e| file_err(e.pos().row, e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "mutations" {
        return Err(file_err(1, format!("expected <mutations>, found <{}>", root.tag_name().name())));
    }
    const ALLOWED: &[&str] = &[
        "id",
        "kind",
        "instance",
        "process",
        "index",
        "shift",
        "expect-assert",
        "expect-measure",
        "expect-tick",
        "expect-delta",
        "expect-status",
    ];
    let mut out = Vec::new();
    for (n, node) in root.children().filter(|c| c.is_element()).enumerate() {
        let line = doc.text_pos_at(node.range().start).row;
        if node.tag_name().name() != "mutation" {
            return Err(file_err(line, format!("unexpected element <{}>", node.tag_name().name())));
        }
        for a in node.attributes() {
            if !ALLOWED.contains(&a.name()) {
                return Err(file_err(line, format!("unknown attribute '{}'", a.name())));
            }
        }
        let req = |k: &str| node.attribute(k).ok_or_else(|| file_err(line, format!("missing attribute '{k}'")));
        let int = |k: &str| -> Result<Option<i64>, ValidateError> {
            node.attribute(k)
                .map(|v| v.trim().parse::<i64>().map_err(|_| file_err(line, format!("'{k}' must be an integer, got '{v}'"))))
                .transpose()
        };
        let kind = match req("kind")? {
            "flip_assert_expected" => MutationKind::FlipAssertExpected,
            "flip_stimulus_level" => MutationKind::FlipStimulusLevel,
            "rename_measure_stopper_edge" => MutationKind::RenameMeasureStopperEdge,
            "shift_wait" => MutationKind::ShiftWait {
                delta: int("shift")?.ok_or_else(|| file_err(line, "shift_wait needs 'shift'".into()))?,
            },
            other => return Err(file_err(line, format!("unknown mutation kind '{other}'"))),
        };
        let index = int("index")?.ok_or_else(|| file_err(line, "missing attribute 'index'".into()))?;
        if index < 0 {
            return Err(file_err(line, "'index' must be non-negative".into()));
        }
        let target = match (node.attribute("expect-assert"), node.attribute("expect-measure")) {
            (Some(_), Some(_)) => {
                return Err(file_err(line, "use either expect-assert or expect-measure".into()))
            }
            (Some(a), None) => Some(DetectionTarget::Assertion(a.to_string())),
            (None, Some(m)) => Some(DetectionTarget::Measurement(m.to_string())),
            (None, None) => None,
        };
        let tick = int("expect-tick")?;
        if tick.is_some_and(|t| t < 0) {
            return Err(file_err(line, "'expect-tick' must be non-negative".into()));
        }
        let status = match node.attribute("expect-status") {
            None => None,
            Some("completed") => Some(MeasureStatus::Completed),
            Some("no_trigger") => Some(MeasureStatus::NoTrigger),
            Some("no_stopper") => Some(MeasureStatus::NoStopper),
            Some(other) => return Err(file_err(line, format!("unknown status '{other}'"))),
        };
        let delta = int("expect-delta")?;
        let expected = match target {
            Some(target) => Some(ExpectedDetection {
                target,
                tick: tick.map(|t| t as Tick),
                duration_delta: delta,
                status,
            }),
            None if tick.is_some() || delta.is_some() || status.is_some() => {
                return Err(file_err(line, "expectations need expect-assert or expect-measure".into()))
            }
            None => None,
        };
        out.push(Mutation {
            id: node.attribute("id").map_or_else(|| format!("m{}", n + 1), str::to_string),
            kind,
            locator: Locator {
                instance: req("instance")?.to_string(),
                process: req("process")?.to_string(),
                index: index as usize,
            },
            expected,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{load_dut_model, load_signal_map};
    use crate::dsl::parse_source;
    use crate::expand::expand_suite;

    fn engine() -> Engine {
        let map = load_signal_map(
            r#"<signals>
                 <signal name="a" kind="generic" direction="stimulus"/>
                 <signal name="g" kind="generic" direction="stimulus"/>
                 <signal name="y" kind="generic" direction="monitor"/>
                 <signal name="guard" kind="generic" direction="monitor"/>
               </signals>"#,
            "m.xml",
        )
        .unwrap();
        let dut = load_dut_model(
            r#"<dut><input name="a"/><input name="g"/><output name="y"/><output name="guard"/>
               <node id="n" op="BUF" operands="a"/><delay from="n" to="y" ticks="2"/>
               <node id="m" op="BUF" operands="g"/><delay from="m" to="guard" ticks="0"/></dut>"#,
            "d.xml",
            &map,
        )
        .unwrap();
        Engine::new(&map, &dut).unwrap()
    }

    fn inst(src: &str) -> TestInstance {
        expand_suite(&parse_source(src, "t.vht").unwrap()).unwrap().remove(0)
    }

    const SRC: &str = "TestID t Begin Process p
        g <= OK;
        a <= OK;
        measure rising_edge(a) to rising_edge(y) name \"lag\";
        wait for 50 us;
        assert guard = OK report \"guard\" severity FAILURE;
        wait for 50 us;
        assert y = OK report \"target\" severity ERROR;
      EndProcess EndTestID";

    fn mutation(kind: MutationKind, index: usize, expected: Option<ExpectedDetection>) -> Mutation {
        Mutation {
            id: "m".into(),
            kind,
            locator: Locator {
                instance: "t".into(),
                process: "p".into(),
                index,
            },
            expected,
        }
    }

    fn expect_assert(msg: &str, tick: Tick) -> Option<ExpectedDetection> {
        Some(ExpectedDetection {
            target: DetectionTarget::Assertion(msg.into()),
            tick: Some(tick),
            duration_delta: None,
            status: None,
        })
    }

    #[test]
    fn mutations_change_exactly_one_statement() {
        let base = inst(SRC);
        for (kind, idx) in [
            (MutationKind::FlipStimulusLevel, 0),
            (MutationKind::RenameMeasureStopperEdge, 2),
            (MutationKind::ShiftWait { delta: -7 }, 3),
            (MutationKind::FlipAssertExpected, 6),
        ] {
            let m = apply_mutation(&base, &mutation(kind, idx, None)).unwrap();
            let diff = base.processes[0]
                .actions
                .iter()
                .zip(&m.processes[0].actions)
                .filter(|(x, y)| x != y)
                .count();
            assert_eq!(diff, 1, "{kind:?}");
        }
        let same = apply_mutation(&base, &mutation(MutationKind::ShiftWait { delta: 0 }, 3, None)).unwrap();
        assert_eq!(same, base);
    }

    #[test]
    fn locator_errors() {
        let base = inst(SRC);
        assert!(matches!(
            apply_mutation(&base, &mutation(MutationKind::FlipAssertExpected, 0, None)),
            Err(ValidateError::KindMismatch { found: "assign", .. })
        ));
        assert!(matches!(
            apply_mutation(&base, &mutation(MutationKind::FlipAssertExpected, 99, None)),
            Err(ValidateError::OutOfRange { len: 7, .. })
        ));
        assert!(matches!(
            apply_mutation(&base, &mutation(MutationKind::ShiftWait { delta: -50 }, 3, None)),
            Err(ValidateError::NonPositiveWait { ticks: 0, .. })
        ));
        let mut m = mutation(MutationKind::FlipAssertExpected, 6, None);
        m.locator.process = "0".into();
        assert!(apply_mutation(&base, &m).is_ok());
        m.locator.process = "nope".into();
        assert!(matches!(apply_mutation(&base, &m), Err(ValidateError::UnknownProcess { .. })));
    }

    #[test]
    fn assert_flip_detected_at_baseline_tick() {
        let e = engine();
        let r = run_validation(
            &e,
            &[inst(SRC)],
            &[mutation(MutationKind::FlipAssertExpected, 6, expect_assert("target", 100))],
            &RunOptions::default(),
        )
        .unwrap();
        assert!(r.overall_pass, "{:?}", r.rows);
        assert_eq!(r.rows[0].detection_tick, Some(100));
        assert_eq!(r.rows[0].mutant_verdict, "failed");
    }

    #[test]
    fn abort_before_target_is_undetected() {
        let e = engine();
        let r = run_validation(
            &e,
            &[inst(SRC)],
            &[mutation(MutationKind::FlipStimulusLevel, 0, expect_assert("target", 100))],
            &RunOptions::default(),
        )
        .unwrap();
        let row = &r.rows[0];
        assert!(!r.overall_pass);
        assert!(row.detected);
        assert_eq!(row.mutant_verdict, "aborted");
        assert_eq!(row.detection_tick, None);
        assert!(!row.matches_expectation);
        assert!(row.explanation.contains("aborted at tick 50"), "{}", row.explanation);
    }

    #[test]
    fn stopper_flip_caught_by_measurement() {
        let e = engine();
        let base = inst(SRC);
        let m = mutation(
            MutationKind::RenameMeasureStopperEdge,
            2,
            Some(ExpectedDetection {
                target: DetectionTarget::Measurement("lag".into()),
                tick: Some(2),
                duration_delta: None,
                status: Some(MeasureStatus::NoStopper),
            }),
        );
        let r = run_validation(&e, &[base], &[m], &RunOptions::default()).unwrap();
        assert!(r.overall_pass, "{:?}", r.rows);
        assert_eq!(r.rows[0].engine_verdict, "passed");
        assert_eq!(r.rows[0].mutant_verdict, "failed");
    }

    #[test]
    fn identity_mutant_is_undetected() {
        let e = engine();
        let r = run_validation(
            &e,
            &[inst(SRC)],
            &[mutation(MutationKind::ShiftWait { delta: 0 }, 3, None)],
            &RunOptions::default(),
        )
        .unwrap();
        assert!(!r.rows[0].detected);
        assert_eq!(r.rows[0].mutant_verdict, "passed");
        assert!(!r.overall_pass);
    }

    #[test]
    fn empty_set_passes() {
        let r = run_validation(&engine(), &[inst(SRC)], &[], &RunOptions::default()).unwrap();
        assert!(r.overall_pass);
        assert_eq!(r.total, 0);
    }

    #[test]
    fn failing_baseline_is_refused() {
        let bad = inst("TestID t Begin Process p wait for 3 us; assert y = OK report \"low\" severity ERROR; EndProcess EndTestID");
        let err = run_validation(&engine(), &[bad], &[], &RunOptions::default()).unwrap_err();
        match err {
            ValidateError::BaselineFailed { diagnosis, .. } => assert!(diagnosis.contains("tick 3 ERROR \"low\"")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn covering_set_for_sample() {
        let e = engine();
        let i = inst(SRC);
        let base = e.run(&i, &RunOptions::default()).unwrap();
        let (ms, uncovered) = covering_mutations(std::slice::from_ref(&i), std::slice::from_ref(&base));
        // two assert flips, and the lag stopper flip loses its stopper
        assert_eq!(ms.len(), 3);
        assert!(uncovered.is_empty());
        assert_eq!(ms[0].expected.as_ref().unwrap().tick, Some(2));
        let r = run_validation(&e, &[i], &ms, &RunOptions::default()).unwrap();
        assert_eq!(r.rows[1].detection_tick, Some(50));
        assert!(r.overall_pass, "{:?}", r.rows);
    }

    #[test]
    fn mutation_file() {
        let src = r#"<mutations>
  <mutation id="a" kind="flip_assert_expected" instance="t" process="p" index="6" expect-assert="target" expect-tick="100"/>
  <mutation kind="shift_wait" shift="-5" instance="t" process="0" index="3"/>
  <mutation kind="rename_measure_stopper_edge" instance="t" process="p" index="2" expect-measure="lag" expect-status="no_stopper" expect-delta="3"/>
</mutations>"#;
        let ms = load_mutations(src, "m.xml").unwrap();
        assert_eq!(ms.len(), 3);
        assert_eq!(ms[0].expected, expect_assert("target", 100));
        assert_eq!(ms[1].id, "m2");
        assert_eq!(ms[1].kind, MutationKind::ShiftWait { delta: -5 });
        assert_eq!(ms[2].expected.as_ref().unwrap().status, Some(MeasureStatus::NoStopper));

        let bad = r#"<mutations><mutation kind="explode" instance="t" process="p" index="0"/></mutations>"#;
        assert_eq!(
            load_mutations(bad, "m.xml").unwrap_err().to_string(),
            "m.xml:1: unknown mutation kind 'explode'"
        );
        let bad = "<mutations>\n<mutation kind=\"flip_assert_expected\" instance=\"t\" process=\"p\" index=\"0\" expect-tick=\"3\"/></mutations>";
        assert!(load_mutations(bad, "m.xml").unwrap_err().to_string().starts_with("m.xml:2:"));
    }
}
