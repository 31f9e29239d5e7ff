//! Suite reports: a canonical JSON document and a markdown rendering.
//!
//! The JSON document has two top-level keys. `header` holds the wall-clock
//! generation time and nothing else; `body` is a pure function of the run
//! results and configuration, so two runs of the same inputs produce
//! byte-identical bodies.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dut::WatchdogState;
use crate::engine::{MeasureStatus, TestRunResult, Verdict};
use crate::level::Tick;
use crate::runner::Outcome;
use crate::validate::ValidationReport;
use crate::waveform::{render_waveform, WaveFormat};

/// Waveform windows up to this many ticks are drawn as ascii in markdown;
/// longer ones fall back to run-length text.
const ASCII_MAX_TICKS: Tick = 120;
const WINDOW_MARGIN: Tick = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format '{other}' (json, markdown)")),
        }
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct Metadata {
    pub sources: Vec<String>,
    pub signal_map: String,
    pub signal_map_sha256: String,
    pub dut_model: String,
    pub dut_model_sha256: String,
    pub tool_version: String,
}

impl Metadata {
    pub fn new(sources: Vec<String>, signal_map: (&str, &str), dut_model: (&str, &str)) -> Metadata {
        Metadata {
            sources,
            signal_map: signal_map.0.to_string(),
            signal_map_sha256: sha256_hex(signal_map.1.as_bytes()),
            dut_model: dut_model.0.to_string(),
            dut_model_sha256: sha256_hex(dut_model.1.as_bytes()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ViolationRow {
    pub tick: Tick,
    pub process: String,
    pub signal: String,
    pub expected: String,
    pub observed: String,
    pub severity: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasurementRow {
    pub name: String,
    pub trigger: String,
    pub stopper: String,
    pub result_us: Option<u64>,
    pub status: MeasureStatus,
    pub trigger_at: Option<Tick>,
    pub stopper_at: Option<Tick>,
    pub needs_review: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WaveformBlock {
    pub start: Tick,
    pub end: Tick,
    /// One run-length line per lane, `name @start H6 L94`.
    pub lanes: Vec<String>,
    #[serde(skip)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Section {
    pub instance: String,
    pub verdict: String,
    pub end_tick: Option<Tick>,
    pub error: Option<String>,
    pub assertions_checked: usize,
    pub violations: Vec<ViolationRow>,
    pub measurements: Vec<MeasurementRow>,
    pub watchdogs: Vec<WatchdogState>,
    pub waveform: Option<WaveformBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryItem {
    pub instance: String,
    pub verdict: String,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub aborted: usize,
    pub errors: usize,
    pub incomplete_measurements: usize,
    pub items: Vec<SummaryItem>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub metadata: Metadata,
    pub sections: Vec<Section>,
    pub summary: Summary,
}

/// Ten ticks before the first trigger to ten after the last stopper,
/// clamped to the trace. Without any trigger: the whole run, capped at
/// [`ASCII_MAX_TICKS`] ticks.
pub fn default_window(r: &TestRunResult) -> (Tick, Tick) {
    let first = r.measurements.iter().filter_map(|m| m.trigger_at).min();
    let last = r
        .measurements
        .iter()
        .filter_map(|m| m.stopper_at.or(m.trigger_at))
        .max();
    match (first, last) {
        (Some(a), Some(b)) => (a.saturating_sub(WINDOW_MARGIN), (b + WINDOW_MARGIN).min(r.end_tick)),
        _ => (0, r.end_tick.min(ASCII_MAX_TICKS - 1)),
    }
}

/// Signals shown in a section's waveform: measurement endpoints first, then
/// asserted monitors, each once, in order of appearance.
pub fn waveform_signals(r: &TestRunResult) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut add = |s: &str| {
        if !out.iter().any(|o| o.eq_ignore_ascii_case(s)) {
            out.push(s.to_string());
        }
    };
    for m in &r.measurements {
        add(&m.trigger.signal);
        add(&m.stopper.signal);
    }
    for a in &r.assertions {
        add(&a.signal);
    }
    out
}

fn section(o: &Outcome) -> Section {
    let r = match o {
        Err(e) => {
            return Section {
                instance: e.instance.clone(),
                verdict: "error".into(),
                end_tick: None,
                error: Some(e.message.clone()),
                assertions_checked: 0,
                violations: vec![],
                measurements: vec![],
                watchdogs: vec![],
                waveform: None,
            }
        }
        Ok(r) => r,
    };
    let signals = waveform_signals(r);
    let waveform = if signals.is_empty() {
        None
    } else {
        let (start, end) = default_window(r);
        let rle = render_waveform(&r.trace, &signals, (start, end), WaveFormat::AsciiRle)
            .expect("window derived from trace");
        let fmt = if end - start < ASCII_MAX_TICKS {
            WaveFormat::Ascii
        } else {
            WaveFormat::AsciiRle
        };
        Some(WaveformBlock {
            start,
            end,
            lanes: rle.lines().map(str::to_string).collect(),
            text: render_waveform(&r.trace, &signals, (start, end), fmt).expect("window derived from trace"),
        })
    };
    Section {
        instance: r.instance.clone(),
        verdict: r.verdict.as_str().into(),
        end_tick: Some(r.end_tick),
        error: None,
        assertions_checked: r.assertions.len(),
        violations: r
            .violations()
            .map(|a| ViolationRow {
                tick: a.at,
                process: a.process.clone(),
                signal: a.signal.clone(),
                expected: a.expected.literal().into(),
                observed: a.observed.literal().into(),
                severity: a.severity.as_str().into(),
                message: a.message.clone(),
            })
            .collect(),
        measurements: r
            .measurements
            .iter()
            .map(|m| MeasurementRow {
                name: m.name.clone(),
                trigger: m.trigger.to_string(),
                stopper: m.stopper.to_string(),
                result_us: m.duration_us,
                status: m.status,
                trigger_at: m.trigger_at,
                stopper_at: m.stopper_at,
                needs_review: m.status != MeasureStatus::Completed,
            })
            .collect(),
        watchdogs: r.watchdogs.clone(),
        waveform,
    }
}

impl SuiteReport {
    pub fn build(metadata: Metadata, outcomes: &[Outcome]) -> SuiteReport {
        let sections: Vec<Section> = outcomes.iter().map(section).collect();
        let mut summary = Summary {
            total: sections.len(),
            ..Summary::default()
        };
        for (s, o) in sections.iter().zip(outcomes) {
            match o {
                Ok(r) => match r.verdict {
                    Verdict::Passed => summary.passed += 1,
                    Verdict::Failed => summary.failed += 1,
                    Verdict::Aborted => summary.aborted += 1,
                },
                Err(_) => summary.errors += 1,
            }
            summary.incomplete_measurements += s.measurements.iter().filter(|m| m.needs_review).count();
            summary.items.push(SummaryItem {
                instance: s.instance.clone(),
                verdict: s.verdict.clone(),
                success: s.verdict == "passed",
            });
        }
        SuiteReport {
            metadata,
            sections,
            summary,
        }
    }

    /// Canonical JSON of the deterministic body.
    pub fn json_body(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self, format: ReportFormat, generated_at_unix: u64) -> String {
        match format {
            ReportFormat::Json => render_json(self, generated_at_unix),
            ReportFormat::Markdown => render_markdown(self),
        }
    }
}

pub fn render_json(report: &SuiteReport, generated_at_unix: u64) -> String {
    #[derive(Serialize)]
    struct Header {
        generated_at_unix: u64,
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        header: Header,
        body: &'a SuiteReport,
    }
    let mut s = serde_json::to_string_pretty(&Doc {
        header: Header { generated_at_unix },
        body: report,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

/// Extract the `body` of a rendered JSON report, re-serialized canonically.
pub fn body_of(json: &str) -> Result<String, String> {
    let v: serde_json::Value = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let body = v.get("body").ok_or("report has no body")?;
    serde_json::to_string_pretty(body).map_err(|e| e.to_string())
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn render_markdown(report: &SuiteReport) -> String {
    let mut out = String::from("# Test report\n\n");
    let m = &report.metadata;
    let _ = writeln!(out, "- Tool version: {}", m.tool_version);
    if !m.signal_map.is_empty() {
        let _ = writeln!(out, "- Signal map: `{}` (sha256 `{}`)", m.signal_map, m.signal_map_sha256);
        let _ = writeln!(out, "- DUT model: `{}` (sha256 `{}`)", m.dut_model, m.dut_model_sha256);
    }
    for s in &m.sources {
        let _ = writeln!(out, "- Source: `{s}`");
    }
    let sm = &report.summary;
    let _ = writeln!(
        out,
        "\n## Summary\n\n{} instances: {} passed, {} failed, {} aborted, {} errors.",
        sm.total, sm.passed, sm.failed, sm.aborted, sm.errors
    );
    if sm.incomplete_measurements > 0 {
        let _ = writeln!(
            out,
            "\n**{} incomplete measurement(s) need review.**",
            sm.incomplete_measurements
        );
    }
    if !sm.items.is_empty() {
        out.push_str("\n| # | Test | Verdict | Success |\n|---|---|---|---|\n");
        for (i, it) in sm.items.iter().enumerate() {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                i + 1,
                cell(&it.instance),
                it.verdict,
                if it.success { "yes" } else { "no" }
            );
        }
    }
    for (i, s) in report.sections.iter().enumerate() {
        let _ = writeln!(out, "\n## {}. {}\n", i + 1, s.instance);
        match (&s.error, s.end_tick) {
            (Some(e), _) => {
                let _ = writeln!(out, "Verdict: **error**. {}", cell(e));
                continue;
            }
            (None, Some(end)) => {
                let _ = writeln!(
                    out,
                    "Verdict: **{}**. {} checked, run ended at tick {end}.",
                    s.verdict,
                    if s.assertions_checked == 1 {
                        "1 assertion".to_string()
                    } else {
                        format!("{} assertions", s.assertions_checked)
                    }
                );
            }
            _ => {}
        }
        if !s.violations.is_empty() {
            out.push_str("\n### Violated assertions\n\n| Tick | Process | Signal | Expected | Observed | Severity | Message |\n|---|---|---|---|---|---|---|\n");
            for v in &s.violations {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    v.tick,
                    cell(&v.process),
                    cell(&v.signal),
                    v.expected,
                    v.observed,
                    v.severity,
                    cell(&v.message)
                );
            }
        }
        if !s.measurements.is_empty() {
            out.push_str("\n### Time measurements\n\n| Trigger | Stopper | Result (us) | Name |\n|---|---|---|---|\n");
            for m in &s.measurements {
                let result = match m.result_us {
                    Some(d) => d.to_string(),
                    None => format!("{} (review)", m.status.as_str()),
                };
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    cell(&m.trigger),
                    cell(&m.stopper),
                    result,
                    cell(&m.name)
                );
            }
        }
        let tripped: Vec<&WatchdogState> = s.watchdogs.iter().filter(|w| w.tripped).collect();
        for w in tripped {
            let _ = writeln!(out, "\nWatchdog `{}` tripped.", w.name);
        }
        if let Some(w) = &s.waveform {
            let _ = writeln!(out, "\n### Waveform, ticks {}..{}\n\n```text\n{}```", w.start, w.end, w.text);
        }
    }
    out
}

/// Validation results as JSON (same header/body split as suite reports).
pub fn render_validation_json(report: &ValidationReport, generated_at_unix: u64) -> String {
    let v = serde_json::json!({
        "header": { "generated_at_unix": generated_at_unix },
        "body": report,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
    s.push('\n');
    s
}

pub fn render_validation_markdown(report: &ValidationReport) -> String {
    let mut out = String::from("# Validation report\n\n");
    let _ = writeln!(
        out,
        "{} mutants, {} detected, {} as expected. Overall: **{}**.\n",
        report.total,
        report.detected,
        report.matching,
        if report.overall_pass { "pass" } else { "fail" }
    );
    if report.rows.is_empty() {
        return out;
    }
    out.push_str("| Mutation | Kind | Instance | Process | Statement | Verdict | Detected | Tick | As expected | Notes |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for r in &report.rows {
        let m = &r.mutation;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            cell(&m.id),
            m.kind.name(),
            cell(&m.locator.instance),
            cell(&m.locator.process),
            m.locator.index,
            r.mutant_verdict,
            if r.detected { "yes" } else { "no" },
            r.detection_tick.map_or("none".to_string(), |t| t.to_string()),
            if r.matches_expectation { "yes" } else { "no" },
            cell(&r.explanation)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{load_dut_model, load_signal_map};
    use crate::dsl::parse_source;
    use crate::engine::{Engine, RunOptions};
    use crate::expand::expand_suite;
    use crate::runner::InstanceError;

    fn results(src: &str) -> Vec<Outcome> {
        let map = load_signal_map(
            r#"<signals><signal name="vms_atot_2_a" kind="optical" direction="stimulus" default="high"/>
               <signal name="etot_1" kind="optical" direction="monitor" default="high"/></signals>"#,
            "m.xml",
        )
        .unwrap();
        let dut = load_dut_model(
            r#"<dut><input name="vms_atot_2_a"/><output name="etot_1"/>
               <node id="n" op="BUF" operands="vms_atot_2_a"/>
               <delay from="n" to="etot_1" ticks="2006"/></dut>"#,
            "d.xml",
            &map,
        )
        .unwrap();
        let engine = Engine::new(&map, &dut).unwrap();
        expand_suite(&parse_source(src, "t.vht").unwrap())
            .unwrap()
            .iter()
            .map(|i| Ok(engine.run(i, &RunOptions::default()).unwrap()))
            .collect()
    }

    const SRC: &str = "TestID etot Begin Process p
        measure falling_edge(vms_atot_2_a) to falling_edge(etot_1) name \"etot_1\";
        measure rising_edge(vms_atot_2_a) to falling_edge(etot_1) name \"never\";
        wait for 10 us; vms_atot_2_a <= NOK; wait for 2100 us;
        assert etot_1 = OK report \"etot still up\" severity WARNING;
      EndProcess EndTestID";

    #[test]
    fn markdown_measurement_row() {
        let r = SuiteReport::build(Metadata::default(), &results(SRC));
        let md = render_markdown(&r);
        assert!(md.contains("| Trigger | Stopper | Result (us) | Name |"));
        assert!(md.contains("| fall vms_atot_2_a | fall etot_1 | 2006 | etot_1 |"), "{md}");
        assert!(md.contains("| rise vms_atot_2_a | fall etot_1 | no_trigger (review) | never |"));
        assert!(md.contains("| 2110 | p | etot_1 | OK | NOK | WARNING | etot still up |"));
        assert_eq!(r.summary.failed, 1);
        assert_eq!(r.summary.incomplete_measurements, 1);
    }

    #[test]
    fn window_brackets_measurements() {
        let o = results(SRC);
        let r = o[0].as_ref().unwrap();
        assert_eq!(default_window(r), (0, 2026));
        let rep = SuiteReport::build(Metadata::default(), &o);
        let w = rep.sections[0].waveform.as_ref().unwrap();
        assert_eq!(w.lanes, ["vms_atot_2_a @0 H10 L2017", "etot_1 @0 H2016 L11"]);
    }

    #[test]
    fn empty_report() {
        let r = SuiteReport::build(Metadata::default(), &[]);
        assert_eq!(r.summary, Summary::default());
        assert!(r.sections.is_empty());
        let json = render_json(&r, 0);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["body"]["summary"]["total"], 0);
        assert!(render_markdown(&r).contains("0 instances"));
    }

    #[test]
    fn body_ignores_header_time() {
        let r = SuiteReport::build(Metadata::default(), &results(SRC));
        let a = body_of(&render_json(&r, 1)).unwrap();
        let b = body_of(&render_json(&r, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(render_json(&r, 1), render_json(&r, 2));
    }

    #[test]
    fn errors_are_sections() {
        let o: Vec<Outcome> = vec![Err(InstanceError {
            instance: "x".into(),
            message: "bad | thing".into(),
        })];
        let r = SuiteReport::build(Metadata::default(), &o);
        assert_eq!(r.summary.errors, 1);
        assert!(!r.summary.all_passed());
        assert!(render_markdown(&r).contains("bad \\| thing"));
    }

    #[test]
    fn metadata_hashes() {
        let m = Metadata::new(vec![], ("m.xml", "abc"), ("d.xml", ""));
        assert_eq!(m.signal_map_sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(m.dut_model_sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
