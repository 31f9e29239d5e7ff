//! Lane diagrams of a [`Trace`] window.
//!
//! The ascii form spends two characters per tick:
//!
//! | cell | meaning                       |
//! |------|-------------------------------|
//! | `__` | low, no edge                  |
//! | `--` | high, no edge                 |
//! | `/-` | rising edge into this tick    |
//! | `\_` | falling edge into this tick   |
//!
//! Each lane is printed as `name |cells|`, preceded by a header line
//! `window <start>..<end>`. Edges are drawn only for ticks after the first
//! tick of the window. The compressed form prints `name @start H6 L94`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{run_length, Trace};
use crate::level::{Edge, Level, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveFormat {
    Ascii,
    AsciiRle,
    Svg,
}

impl std::str::FromStr for WaveFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ascii" => Ok(WaveFormat::Ascii),
            "rle" | "ascii-rle" => Ok(WaveFormat::AsciiRle),
            "svg" => Ok(WaveFormat::Svg),
            other => Err(format!("unknown waveform format '{other}' (ascii, rle, svg)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WaveformError {
    #[error("window {start}..{end} is outside the trace (ticks 0..{last})")]
    WindowOutOfBounds { start: Tick, end: Tick, last: Tick },
    #[error("unknown signal '{0}'")]
    UnknownSignal(String),
}

struct Lane<'a> {
    name: &'a str,
    levels: &'a [Level],
}

fn lanes<'a>(trace: &'a Trace, signals: &[String], start: Tick, end: Tick) -> Result<Vec<Lane<'a>>, WaveformError> {
    if trace.is_empty() || start > end || end as usize >= trace.len() {
        return Err(WaveformError::WindowOutOfBounds {
            start,
            end,
            last: (trace.len() as Tick).saturating_sub(1),
        });
    }
    signals
        .iter()
        .map(|s| {
            let i = trace
                .signals
                .iter()
                .position(|n| n.eq_ignore_ascii_case(s))
                .ok_or_else(|| WaveformError::UnknownSignal(s.clone()))?;
            Ok(Lane {
                name: &trace.signals[i],
                levels: &trace.lanes[i][start as usize..=end as usize],
            })
        })
        .collect()
}

pub fn render_waveform(
    trace: &Trace,
    signals: &[String],
    window: (Tick, Tick),
    format: WaveFormat,
) -> Result<String, WaveformError> {
    let (start, end) = window;
    let lanes = lanes(trace, signals, start, end)?;
    Ok(match format {
        WaveFormat::Ascii => ascii(&lanes, start, end),
        WaveFormat::AsciiRle => {
            let mut out = String::new();
            for l in &lanes {
                let _ = writeln!(out, "{} @{start} {}", l.name, run_length(l.levels));
            }
            out
        }
        WaveFormat::Svg => svg(&lanes, start, end),
    })
}

fn ascii(lanes: &[Lane<'_>], start: Tick, end: Tick) -> String {
    let width = lanes.iter().map(|l| l.name.len()).max().unwrap_or(0);
    let mut out = format!("window {start}..{end}\n");
    for l in lanes {
        let _ = write!(out, "{:<width$} |", l.name);
        for (k, &lv) in l.levels.iter().enumerate() {
            let edge = if k == 0 { None } else { Edge::between(l.levels[k - 1], lv) };
            out.push_str(match (edge, lv) {
                (Some(Edge::Rising), _) => "/-",
                (Some(Edge::Falling), _) => "\\_",
                (None, Level::High) => "--",
                (None, Level::Low) => "__",
            });
        }
        out.push_str("|\n");
    }
    out
}

/// A lane decoded from the ascii form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLane {
    pub signal: String,
    pub levels: Vec<Level>,
    pub edges: Vec<(Tick, Edge)>,
}

/// Decode the ascii rendering back into levels and edge positions.
pub fn parse_ascii(text: &str) -> Result<(Tick, Vec<ParsedLane>), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty waveform")?;
    let range = header.strip_prefix("window ").ok_or("missing window header")?;
    let (s, _) = range.split_once("..").ok_or("malformed window header")?;
    let start: Tick = s.parse().map_err(|_| format!("bad start '{s}'"))?;
    let mut out = Vec::new();
    for line in lines {
        let (name, rest) = line.split_once(" |").ok_or_else(|| format!("malformed lane '{line}'"))?;
        let cells = rest.strip_suffix('|').ok_or_else(|| format!("unterminated lane '{line}'"))?;
        let bytes = cells.as_bytes();
        if bytes.len() % 2 != 0 {
            return Err(format!("odd cell count in lane '{name}'"));
        }
        let mut levels = Vec::with_capacity(bytes.len() / 2);
        let mut edges = Vec::new();
        for (k, cell) in bytes.chunks(2).enumerate() {
            let (lv, edge) = match cell {
                b"__" => (Level::Low, None),
                b"--" => (Level::High, None),
                b"/-" => (Level::High, Some(Edge::Rising)),
                b"\\_" => (Level::Low, Some(Edge::Falling)),
                other => return Err(format!("bad cell '{}'", String::from_utf8_lossy(other))),
            };
            if let Some(e) = edge {
                edges.push((start + k as Tick, e));
            }
            levels.push(lv);
        }
        out.push(ParsedLane {
            signal: name.trim_end().to_string(),
            levels,
            edges,
        });
    }
    Ok((start, out))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const LABEL_W: u64 = 160;
const PLOT_W: u64 = 960;
const LANE_H: u64 = 28;
const SWING: u64 = 16;

fn svg(lanes: &[Lane<'_>], start: Tick, end: Tick) -> String {
    let span = end - start + 1;
    // x position in hundredths of a pixel, so output stays integer-exact
    let x = |k: u64| (LABEL_W * 100) + k * PLOT_W * 100 / span;
    let px = |v: u64| format!("{}.{:02}", v / 100, v % 100);
    let height = LANE_H * lanes.len() as u64 + 24;
    let width = LABEL_W + PLOT_W + 10;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{LABEL_W}" y="{height_label}">t={start}</text><text x="{end_x}" y="{height_label}" text-anchor="end">t={end}</text>"#,
        height_label = height - 6,
        end_x = LABEL_W + PLOT_W,
    );
    for (row, l) in lanes.iter().enumerate() {
        let top = row as u64 * LANE_H + 6;
        let y = |lv: Level| if lv.is_high() { top } else { top + SWING };
        let _ = writeln!(
            out,
            r#"<text x="4" y="{}">{}</text>"#,
            top + SWING - 2,
            escape(l.name)
        );
        let mut points = Vec::new();
        let mut cur = l.levels[0];
        points.push(format!("{},{}", px(x(0)), y(cur)));
        for (k, &lv) in l.levels.iter().enumerate().skip(1) {
            if lv != cur {
                let xs = px(x(k as u64));
                points.push(format!("{xs},{}", y(cur)));
                points.push(format!("{xs},{}", y(lv)));
                cur = lv;
            }
        }
        points.push(format!("{},{}", px(x(span)), y(cur)));
        let _ = writeln!(
            out,
            r#"<polyline data-signal="{}" fill="none" stroke="black" stroke-width="1" points="{}"/>"#,
            escape(l.name),
            points.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}
