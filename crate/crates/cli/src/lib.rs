//! The `teststand` command: check, expand, run, validate and waveform.
//!
//! Exit codes: 0 success, 1 test failures (or a failed validation),
//! 2 usage, configuration and instance errors, 3 parse errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use teststand::config::{load_dut_model, load_signal_map, DutModel};
use teststand::dut::format_event_log;
use teststand::engine::{Engine, RunOptions, DEFAULT_MAX_TICKS};
use teststand::expand::{expand_suite, load_sources, ExpandError, TestInstance};
use teststand::report::{
    default_window, render_validation_json, render_validation_markdown, waveform_signals, Metadata, ReportFormat,
    SuiteReport,
};
use teststand::runner::{outcome_passed, run_suite, SuiteOptions};
use teststand::validate::{covering_mutations, load_mutations, run_validation};
use teststand::waveform::{render_waveform, WaveFormat};
use teststand::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    TestFailures = 1,
    Usage = 2,
    Parse = 3,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> ExitCode {
        ExitCode::from(e as u8)
    }
}

#[derive(Parser, Debug)]
#[command(name = "teststand", version, about = "Run unit tests written in the test-stand language against a simulated DUT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and expand sources without running them.
    Check(CheckArgs),
    /// Print every expanded instance as loop-free source.
    Expand(ExpandArgs),
    /// Execute all instances and write the report and event logs.
    Run(RunArgs),
    /// Run mutated copies of passing tests and check each one is caught.
    Validate(ValidateArgs),
    /// Draw signal lanes of one instance's run.
    Waveform(WaveformArgs),
}

#[derive(Args, Debug)]
pub struct Setup {
    /// Signal-map XML.
    #[arg(long)]
    pub signals: PathBuf,
    /// DUT-model XML.
    #[arg(long)]
    pub dut: PathBuf,
    /// Abort any instance needing more ticks than this.
    #[arg(long, default_value_t = DEFAULT_MAX_TICKS)]
    pub max_ticks: Tick,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(required = true)]
    pub sources: Vec<PathBuf>,
    /// Also check signal references against this map.
    #[arg(long)]
    pub signals: Option<PathBuf>,
    #[arg(long, requires = "signals")]
    pub dut: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExpandArgs {
    #[arg(required = true)]
    pub sources: Vec<PathBuf>,
    /// Write one `<instance>.vht` file per instance here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub setup: Setup,
    #[arg(required = true)]
    pub sources: Vec<PathBuf>,
    #[arg(long, default_value = "teststand-out")]
    pub out: PathBuf,
    #[arg(long, default_value = "json", value_parser = parse_report_format)]
    pub format: ReportFormat,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub parallel: u16,
    /// Stop after the first instance that does not pass.
    #[arg(long)]
    pub fail_fast: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub setup: Setup,
    #[arg(required = true)]
    pub sources: Vec<PathBuf>,
    /// Mutation-set XML.
    #[arg(long, required_unless_present = "auto", conflicts_with = "auto")]
    pub mutations: Option<PathBuf>,
    /// Generate one mutation per assertion and per measurement.
    #[arg(long)]
    pub auto: bool,
    #[arg(long, default_value = "teststand-out")]
    pub out: PathBuf,
    #[arg(long, default_value = "json", value_parser = parse_report_format)]
    pub format: ReportFormat,
}

#[derive(Args, Debug)]
pub struct WaveformArgs {
    #[command(flatten)]
    pub setup: Setup,
    #[arg(required = true)]
    pub sources: Vec<PathBuf>,
    /// Instance id; defaults to the first instance.
    #[arg(long)]
    pub instance: Option<String>,
    /// Signal lane to draw (repeatable); defaults to the measured and asserted signals.
    #[arg(long = "signal", value_name = "NAME")]
    pub lanes: Vec<String>,
    /// Tick window `start..end`, inclusive.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(Tick, Tick)>,
    #[arg(long, default_value = "ascii", value_parser = parse_wave_format)]
    pub format: WaveFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_report_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn parse_wave_format(s: &str) -> Result<WaveFormat, String> {
    s.parse()
}

fn parse_window(s: &str) -> Result<(Tick, Tick), String> {
    let (a, b) = s.split_once("..").ok_or("expected start..end")?;
    let a = a.trim().parse().map_err(|_| format!("bad start '{a}'"))?;
    let b = b.trim().parse().map_err(|_| format!("bad end '{b}'"))?;
    if b < a {
        return Err(format!("window end {b} is before start {a}"));
    }
    Ok((a, b))
}

/// A failure that ends the command with a message and exit code.
struct Fail(Exit, String);

type CmdResult = Result<Exit, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail(Exit::Usage, msg.into())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn instances(sources: &[PathBuf]) -> Result<Vec<TestInstance>, Fail> {
    let roots: Vec<String> = sources.iter().map(|p| path_str(p)).collect();
    let mut loader = |p: &str| fs::read_to_string(p).map_err(|e| e.to_string());
    let code = |e: &ExpandError| match e {
        ExpandError::MissingFile { .. } => Exit::Usage,
        _ => Exit::Parse,
    };
    let suite = load_sources(&roots, &mut loader).map_err(|e| Fail(code(&e), e.to_string()))?;
    expand_suite(&suite).map_err(|e| Fail(code(&e), e.to_string()))
}

struct Loaded {
    map_text: String,
    dut_text: String,
    engine: Engine,
}

fn load_config(signals: &Path, dut: &Path) -> Result<Loaded, Fail> {
    let map_text = read(signals)?;
    let map = load_signal_map(&map_text, &path_str(signals)).map_err(|e| usage(e.to_string()))?;
    let dut_text = read(dut)?;
    let model: DutModel = load_dut_model(&dut_text, &path_str(dut), &map).map_err(|e| usage(e.to_string()))?;
    let engine = Engine::new(&map, &model).map_err(|e| usage(e.to_string()))?;
    Ok(Loaded {
        map_text,
        dut_text,
        engine,
    })
}

fn metadata(sources: &[PathBuf], setup: &Setup, l: &Loaded) -> Metadata {
    Metadata::new(
        sources.iter().map(|p| path_str(p)).collect(),
        (&path_str(&setup.signals), &l.map_text),
        (&path_str(&setup.dut), &l.dut_text),
    )
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_file(path: &Path, text: &str) -> Result<(), Fail> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn check(args: &CheckArgs, out: &mut dyn Write) -> CmdResult {
    let inst = instances(&args.sources)?;
    if let Some(signals) = &args.signals {
        let map_text = read(signals)?;
        let map = load_signal_map(&map_text, &path_str(signals)).map_err(|e| usage(e.to_string()))?;
        if let Some(dut) = &args.dut {
            let model = load_dut_model(&read(dut)?, &path_str(dut), &map).map_err(|e| usage(e.to_string()))?;
            let engine = Engine::new(&map, &model).map_err(|e| usage(e.to_string()))?;
            let problems: Vec<String> = inst
                .iter()
                .filter_map(|i| engine.validate(i).err().map(|e| e.to_string()))
                .collect();
            if !problems.is_empty() {
                return Err(usage(problems.join("\n")));
            }
        }
    }
    let mut tests: Vec<&str> = inst.iter().map(|i| i.base_id.as_str()).collect();
    tests.dedup();
    let _ = writeln!(out, "{}, {}", plural(tests.len(), "test"), plural(inst.len(), "instance"));
    Ok(Exit::Ok)
}

fn expand(args: &ExpandArgs, out: &mut dyn Write) -> CmdResult {
    let inst = instances(&args.sources)?;
    match &args.out {
        None => {
            for (k, i) in inst.iter().enumerate() {
                if k > 0 {
                    let _ = writeln!(out);
                }
                let _ = write!(out, "{}", i.to_source());
            }
        }
        Some(dir) => {
            for i in &inst {
                write_file(&dir.join(format!("{}.vht", i.full_id)), &i.to_source())?;
            }
            let _ = writeln!(out, "wrote {} to {}", plural(inst.len(), "instance"), dir.display());
        }
    }
    Ok(Exit::Ok)
}

fn run(args: &RunArgs, out: &mut dyn Write) -> CmdResult {
    let loaded = load_config(&args.setup.signals, &args.setup.dut)?;
    let inst = instances(&args.sources)?;
    let opts = SuiteOptions {
        parallel: args.parallel as usize,
        run: RunOptions {
            max_ticks: args.setup.max_ticks,
        },
        fail_fast: args.fail_fast,
    };
    let outcomes = run_suite(&loaded.engine, &inst, &opts);
    let report = SuiteReport::build(metadata(&args.sources, &args.setup, &loaded), &outcomes);

    let name = match args.format {
        ReportFormat::Json => "report.json",
        ReportFormat::Markdown => "report.md",
    };
    let report_path = args.out.join(name);
    write_file(&report_path, &report.render(args.format, now_unix()))?;
    for r in outcomes.iter().filter_map(|o| o.as_ref().ok()) {
        write_file(
            &args.out.join("events").join(format!("{}.log", r.instance)),
            &format_event_log(&r.events),
        )?;
        let signals = waveform_signals(r);
        if !signals.is_empty() {
            let svg = render_waveform(&r.trace, &signals, default_window(r), WaveFormat::Svg)
                .map_err(|e| usage(e.to_string()))?;
            write_file(&args.out.join("waves").join(format!("{}.svg", r.instance)), &svg)?;
        }
    }

    for (o, item) in outcomes.iter().zip(&report.summary.items) {
        match o {
            Err(e) => {
                let _ = writeln!(out, "{:<8} {}: {}", item.verdict, item.instance, e.message);
            }
            Ok(_) => {
                let _ = writeln!(out, "{:<8} {}", item.verdict, item.instance);
            }
        }
    }
    let s = &report.summary;
    let _ = writeln!(
        out,
        "{}: {} passed, {} failed, {} aborted, {} errors",
        plural(s.total, "instance"),
        s.passed,
        s.failed,
        s.aborted,
        s.errors
    );
    if s.incomplete_measurements > 0 {
        let verb = if s.incomplete_measurements == 1 { "needs" } else { "need" };
        let _ = writeln!(out, "{} {verb} review", plural(s.incomplete_measurements, "incomplete measurement"));
    }
    if s.total < inst.len() {
        let _ = writeln!(out, "stopped early: {} not run", plural(inst.len() - s.total, "instance"));
    }
    let _ = writeln!(out, "report: {}", report_path.display());
    Ok(if s.total == inst.len() && outcomes.iter().all(outcome_passed) {
        Exit::Ok
    } else if s.failed + s.aborted > 0 || s.errors == 0 {
        Exit::TestFailures
    } else {
        Exit::Usage
    })
}

fn validate(args: &ValidateArgs, out: &mut dyn Write) -> CmdResult {
    let loaded = load_config(&args.setup.signals, &args.setup.dut)?;
    let inst = instances(&args.sources)?;
    let opts = RunOptions {
        max_ticks: args.setup.max_ticks,
    };
    let mutations = match &args.mutations {
        Some(p) => load_mutations(&read(p)?, &path_str(p)).map_err(|e| usage(e.to_string()))?,
        None => {
            let mut base = Vec::with_capacity(inst.len());
            for i in &inst {
                base.push(loaded.engine.run(i, &opts).map_err(|e| usage(e.to_string()))?);
            }
            let (ms, uncovered) = covering_mutations(&inst, &base);
            for u in uncovered {
                let _ = writeln!(out, "uncovered: {u}");
            }
            ms
        }
    };
    let report = run_validation(&loaded.engine, &inst, &mutations, &opts).map_err(|e| usage(e.to_string()))?;
    let (name, text) = match args.format {
        ReportFormat::Json => ("validation.json", render_validation_json(&report, now_unix())),
        ReportFormat::Markdown => ("validation.md", render_validation_markdown(&report)),
    };
    let path = args.out.join(name);
    write_file(&path, &text)?;
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<8} {} {} tick {}: {}",
            if r.matches_expectation { "ok" } else { "MISSED" },
            r.mutation.id,
            r.mutant_verdict,
            r.detection_tick.map_or("none".into(), |t| t.to_string()),
            r.explanation
        );
    }
    let _ = writeln!(
        out,
        "{}: {} detected, {} as expected; validation {}",
        plural(report.total, "mutant"),
        report.detected,
        report.matching,
        if report.overall_pass { "passed" } else { "FAILED" }
    );
    let _ = writeln!(out, "report: {}", path.display());
    Ok(if report.overall_pass { Exit::Ok } else { Exit::TestFailures })
}

fn waveform(args: &WaveformArgs, out: &mut dyn Write) -> CmdResult {
    let loaded = load_config(&args.setup.signals, &args.setup.dut)?;
    let inst = instances(&args.sources)?;
    let target = match &args.instance {
        Some(id) => inst
            .iter()
            .find(|i| &i.full_id == id)
            .ok_or_else(|| usage(format!("no instance named '{id}'")))?,
        None => inst.first().ok_or_else(|| usage("no instances"))?,
    };
    let r = loaded
        .engine
        .run(target, &RunOptions {
            max_ticks: args.setup.max_ticks,
        })
        .map_err(|e| usage(e.to_string()))?;
    let signals = if args.lanes.is_empty() {
        waveform_signals(&r)
    } else {
        args.lanes.clone()
    };
    if signals.is_empty() {
        return Err(usage("nothing to draw; pass --signal"));
    }
    let window = args.window.unwrap_or_else(|| default_window(&r));
    let text = render_waveform(&r.trace, &signals, window, args.format).map_err(|e| usage(e.to_string()))?;
    match &args.out {
        Some(p) => write_file(p, &text)?,
        None => {
            let _ = write!(out, "{text}");
        }
    }
    Ok(Exit::Ok)
}

/// Run a parsed command, writing normal output to `out` and diagnostics to `err`.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Exit {
    let result = match &cli.command {
        Command::Check(a) => check(a, out),
        Command::Expand(a) => expand(a, out),
        Command::Run(a) => run(a, out),
        Command::Validate(a) => validate(a, out),
        Command::Waveform(a) => waveform(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

/// Entry point shared by the binary and tests: parse `args` and run.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { Exit::Usage } else { Exit::Ok };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn window_syntax() {
        assert_eq!(parse_window("5..20"), Ok((5, 20)));
        assert!(parse_window("20..5").is_err());
        assert!(parse_window("5-20").is_err());
    }

    #[test]
    fn plural_words() {
        assert_eq!(plural(1, "test"), "1 test");
        assert_eq!(plural(4, "instance"), "4 instances");
    }
}
