//! Include resolution, macro expansion and loop unrolling.
//!
//! The output of this stage is a list of [`TestInstance`]s: flat, loop-free
//! and macro-free statement lists with every duration resolved to ticks.
//!
//! Loop binding: loops whose arms carry the same set of tag names are one
//! loop variable, even across processes, so choosing `Experiment` in the
//! stimulus process also selects the `Experiment` arm of the verification
//! process. Loops with disjoint tag sets multiply. Partially overlapping
//! sets are ambiguous and rejected.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::dsl::printer::print_statements;
use crate::dsl::{
    parse_source, walk_statements, DurationExpr, EdgeEvent, MacroDef, Severity, Statement,
    SyntaxError, TestAst, TestSuiteAst,
};
use crate::level::{Level, Tick};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExpandError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("cannot read '{path}' (included from {included_from}): {reason}")]
    MissingFile {
        path: String,
        included_from: String,
        reason: String,
    },
    #[error("include cycle: {}", cycle.join(" -> "))]
    IncludeCycle { cycle: Vec<String> },
    #[error("macro '{name}' defined twice: in {first} and in {second}")]
    DuplicateMacro {
        name: String,
        first: String,
        second: String,
    },
    #[error("test '{id}' defined twice: in {first} and in {second}")]
    DuplicateTest {
        id: String,
        first: String,
        second: String,
    },
    #[error("call of undefined macro '{name}' in {context}")]
    UndefinedMacro { name: String, context: String },
    #[error("recursive macro expansion: {}", chain.join(" -> "))]
    MacroRecursion { chain: Vec<String> },
    #[error("test '{test}': loops with overlapping tag sets {{{}}} and {{{}}} are ambiguous", first.join(","), second.join(","))]
    AmbiguousLoops {
        test: String,
        first: Vec<String>,
        second: Vec<String>,
    },
    #[error("test '{test}': loop without any Tag")]
    EmptyLoop { test: String },
    #[error("test '{test}': undeclared constant '{name}'")]
    UnknownConstant { test: String, name: String },
    #[error("instance id '{full_id}' is produced twice")]
    DuplicateInstance { full_id: String },
    #[error("instance '{instance}': duplicate measurement name \"{name}\"")]
    DuplicateMeasure { instance: String, name: String },
}

/// One executable statement of an unrolled test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Action {
    Assign {
        signal: String,
        level: Level,
    },
    WaitFor {
        ticks: Tick,
    },
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
    StopAfter {
        ticks: Tick,
    },
}

impl Action {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Action::Assign { .. } => "assign",
            Action::WaitFor { .. } => "wait",
            Action::Assert { .. } => "assert",
            Action::Measure { .. } => "measure",
            Action::StopAfter { .. } => "stop",
        }
    }

    fn to_statement(&self) -> Statement {
        let lit = |t: Tick| {
            DurationExpr::Literal(crate::dsl::Duration::micros(t).expect("positive tick count"))
        };
        match self {
            Action::Assign { signal, level } => Statement::Assign {
                signal: signal.clone(),
                level: *level,
            },
            Action::WaitFor { ticks } => Statement::WaitFor(lit(*ticks)),
            Action::StopAfter { ticks } => Statement::StopAfter(lit(*ticks)),
            Action::Assert {
                signal,
                expected,
                message,
                severity,
            } => Statement::Assert {
                signal: signal.clone(),
                expected: *expected,
                message: message.clone(),
                severity: *severity,
            },
            Action::Measure {
                trigger,
                stopper,
                name,
            } => Statement::Measure {
                trigger: trigger.clone(),
                stopper: stopper.clone(),
                name: name.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceProcess {
    pub name: String,
    pub actions: Vec<Action>,
}

/// A single fully expanded variant of a test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestInstance {
    pub base_id: String,
    pub variant_tags: Vec<String>,
    pub full_id: String,
    pub processes: Vec<InstanceProcess>,
    pub constants: Vec<(String, Tick)>,
}

impl TestInstance {
    pub fn statement_count(&self) -> usize {
        self.processes.iter().map(|p| p.actions.len()).sum()
    }

    /// Source text of this instance as a loop-free, macro-free test whose id
    /// is the instance's `full_id`.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "TestID {}", self.full_id);
        out.push_str("Begin\n");
        for p in &self.processes {
            let _ = writeln!(out, "Process {}", p.name);
            let stmts: Vec<Statement> = p.actions.iter().map(Action::to_statement).collect();
            print_statements(&mut out, &stmts, 1);
            out.push_str("EndProcess\n");
        }
        out.push_str("EndTestID\n");
        out
    }
}

fn full_id(base: &str, tags: &[String]) -> String {
    if tags.is_empty() {
        base.to_string()
    } else {
        format!("{base}__{}", tags.join("__"))
    }
}

/// Lexically normalize a path (drop `.`, fold `..`) without touching the
/// filesystem.
fn normalize(p: &Path) -> String {
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other.as_os_str()),
        }
    }
    out.to_string_lossy().into_owned()
}

fn include_target(from: &str, include: &str) -> String {
    let inc = Path::new(include);
    if inc.is_absolute() {
        return normalize(inc);
    }
    let base = Path::new(from).parent().unwrap_or(Path::new(""));
    normalize(&base.join(inc))
}

/// Loads source text for a (normalized) path.
pub type Loader<'a> = dyn FnMut(&str) -> Result<String, String> + 'a;

struct IncludeResolver<'l, 'a> {
    loader: &'l mut Loader<'a>,
    stack: Vec<String>,
    done: HashSet<String>,
    macros: Vec<MacroDef>,
    tests: Vec<TestAst>,
}

impl IncludeResolver<'_, '_> {
    fn visit(&mut self, path: String, ast: TestSuiteAst) -> Result<(), ExpandError> {
        self.stack.push(path.clone());
        for inc in &ast.includes {
            let target = include_target(&path, &inc.path);
            if let Some(start) = self.stack.iter().position(|p| *p == target) {
                let mut cycle = self.stack[start..].to_vec();
                cycle.push(target);
                return Err(ExpandError::IncludeCycle { cycle });
            }
            if self.done.contains(&target) {
                continue;
            }
            let text = (self.loader)(&target).map_err(|reason| ExpandError::MissingFile {
                path: target.clone(),
                included_from: format!("{path}:{}", inc.pos.line),
                reason,
            })?;
            let sub = parse_source(&text, &target)?;
            self.visit(target, sub)?;
        }
        self.stack.pop();
        self.done.insert(path);
        self.macros.extend(ast.macros);
        self.tests.extend(ast.tests);
        Ok(())
    }

    fn finish(self) -> Result<TestSuiteAst, ExpandError> {
        let mut seen: HashMap<String, &MacroDef> = HashMap::new();
        for m in &self.macros {
            if let Some(prev) = seen.insert(m.name.to_ascii_lowercase(), m) {
                return Err(ExpandError::DuplicateMacro {
                    name: m.name.clone(),
                    first: format!("{}:{}", prev.origin, prev.pos.line),
                    second: format!("{}:{}", m.origin, m.pos.line),
                });
            }
        }
        let mut seen: HashMap<String, &TestAst> = HashMap::new();
        for t in &self.tests {
            if let Some(prev) = seen.insert(t.id.to_ascii_lowercase(), t) {
                return Err(ExpandError::DuplicateTest {
                    id: t.id.clone(),
                    first: format!("{}:{}", prev.origin, prev.pos.line),
                    second: format!("{}:{}", t.origin, t.pos.line),
                });
            }
        }
        Ok(TestSuiteAst {
            includes: Vec::new(),
            macros: self.macros,
            tests: self.tests,
        })
    }
}

/// Merge every file reachable through `include` into one suite. Included
/// definitions precede the including file's own, in include order. A file
/// reached twice without a cycle is merged once.
pub fn resolve_includes(
    suite: TestSuiteAst,
    origin: &str,
    loader: &mut Loader<'_>,
) -> Result<TestSuiteAst, ExpandError> {
    let mut r = IncludeResolver {
        loader,
        stack: Vec::new(),
        done: HashSet::new(),
        macros: Vec::new(),
        tests: Vec::new(),
    };
    r.visit(normalize(Path::new(origin)), suite)?;
    r.finish()
}

/// Load, parse and merge several root source files.
pub fn load_sources(roots: &[String], loader: &mut Loader<'_>) -> Result<TestSuiteAst, ExpandError> {
    let mut r = IncludeResolver {
        loader,
        stack: Vec::new(),
        done: HashSet::new(),
        macros: Vec::new(),
        tests: Vec::new(),
    };
    for root in roots {
        let path = normalize(Path::new(root));
        if r.done.contains(&path) {
            continue;
        }
        let text = (r.loader)(&path).map_err(|reason| ExpandError::MissingFile {
            path: path.clone(),
            included_from: "command line".into(),
            reason,
        })?;
        let ast = parse_source(&text, &path)?;
        r.visit(path, ast)?;
    }
    r.finish()
}

fn expand_body(
    body: &[Statement],
    macros: &HashMap<String, &MacroDef>,
    stack: &mut Vec<String>,
    context: &str,
) -> Result<Vec<Statement>, ExpandError> {
    let mut out = Vec::with_capacity(body.len());
    for s in body {
        match s {
            Statement::CallMacro { name } => {
                let key = name.to_ascii_lowercase();
                let Some(def) = macros.get(&key) else {
                    return Err(ExpandError::UndefinedMacro {
                        name: name.clone(),
                        context: context.to_string(),
                    });
                };
                if let Some(start) = stack.iter().position(|m| m.eq_ignore_ascii_case(&def.name)) {
                    let mut chain = stack[start..].to_vec();
                    chain.push(def.name.clone());
                    return Err(ExpandError::MacroRecursion { chain });
                }
                stack.push(def.name.clone());
                let spliced = expand_body(&def.body, macros, stack, context)?;
                stack.pop();
                out.extend(spliced);
            }
            Statement::Loop(l) => {
                let mut l = l.clone();
                for arm in &mut l.arms {
                    arm.body = expand_body(&arm.body, macros, stack, context)?;
                }
                out.push(Statement::Loop(l));
            }
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}

/// Splice every `callMacro` with the macro's statements. Macro bodies are
/// expanded too, so recursion is reported even for unused macros.
pub fn expand_macros(suite: &TestSuiteAst) -> Result<TestSuiteAst, ExpandError> {
    let table: HashMap<String, &MacroDef> = suite
        .macros
        .iter()
        .map(|m| (m.name.to_ascii_lowercase(), m))
        .collect();
    let mut out = suite.clone();
    for m in &mut out.macros {
        let mut stack = vec![m.name.clone()];
        m.body = expand_body(&m.body, &table, &mut stack, &format!("macro '{}'", m.name))?;
    }
    for t in &mut out.tests {
        for p in &mut t.processes {
            let ctx = format!("test '{}' process '{}' ({}:{})", t.id, p.name, t.origin, t.pos.line);
            p.body = expand_body(&p.body, &table, &mut Vec::new(), &ctx)?;
        }
    }
    Ok(out)
}

/// A loop variable: the tag names shared by one or more bound loops.
#[derive(Debug, Clone)]
struct LoopVar {
    key: BTreeSet<String>,
    tags: Vec<String>,
}

fn tag_key(tags: &[String]) -> BTreeSet<String> {
    tags.iter().map(|t| t.to_ascii_lowercase()).collect()
}

fn collect_loop_vars(test: &TestAst) -> Result<Vec<LoopVar>, ExpandError> {
    let mut vars: Vec<LoopVar> = Vec::new();
    let mut failure: Option<ExpandError> = None;
    for p in &test.processes {
        walk_statements(&p.body, &mut |s| {
            let Statement::Loop(l) = s else { return };
            if failure.is_some() {
                return;
            }
            if l.arms.is_empty() {
                failure = Some(ExpandError::EmptyLoop {
                    test: test.id.clone(),
                });
                return;
            }
            let tags: Vec<String> = l.arms.iter().map(|a| a.tag.clone()).collect();
            let key = tag_key(&tags);
            if vars.iter().any(|v| v.key == key) {
                return;
            }
            if let Some(v) = vars.iter().find(|v| !v.key.is_disjoint(&key)) {
                failure = Some(ExpandError::AmbiguousLoops {
                    test: test.id.clone(),
                    first: v.tags.clone(),
                    second: tags,
                });
                return;
            }
            vars.push(LoopVar { key, tags });
        });
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(vars),
    }
}

fn splice_choice(
    body: &[Statement],
    vars: &[LoopVar],
    choice: &[usize],
    out: &mut Vec<Statement>,
) {
    for s in body {
        match s {
            Statement::Loop(l) => {
                let tags: Vec<String> = l.arms.iter().map(|a| a.tag.clone()).collect();
                let key = tag_key(&tags);
                let v = vars.iter().position(|v| v.key == key).expect("collected");
                let chosen = &vars[v].tags[choice[v]];
                let arm = l
                    .arms
                    .iter()
                    .find(|a| a.tag.eq_ignore_ascii_case(chosen))
                    .expect("same tag set");
                splice_choice(&arm.body, vars, choice, out);
            }
            other => out.push(other.clone()),
        }
    }
}

fn resolve_duration(test: &TestAst, d: &DurationExpr) -> Result<Tick, ExpandError> {
    match d {
        DurationExpr::Literal(l) => Ok(l.ticks()),
        DurationExpr::Constant(c) => test.constant(c).map(|v| v.ticks()).ok_or_else(|| {
            ExpandError::UnknownConstant {
                test: test.id.clone(),
                name: c.clone(),
            }
        }),
    }
}

fn to_action(test: &TestAst, s: Statement) -> Result<Action, ExpandError> {
    Ok(match s {
        Statement::Assign { signal, level } => Action::Assign { signal, level },
        Statement::WaitFor(d) => Action::WaitFor {
            ticks: resolve_duration(test, &d)?,
        },
        Statement::StopAfter(d) => Action::StopAfter {
            ticks: resolve_duration(test, &d)?,
        },
        Statement::Assert {
            signal,
            expected,
            message,
            severity,
        } => Action::Assert {
            signal,
            expected,
            message,
            severity,
        },
        Statement::Measure {
            trigger,
            stopper,
            name,
        } => Action::Measure {
            trigger,
            stopper,
            name,
        },
        Statement::Loop(_) | Statement::CallMacro { .. } => {
            unreachable!("loops and macro calls are removed before conversion")
        }
    })
}

/// Number of instances `test` unrolls into: the product of arm counts over
/// distinct tag-name sets.
pub fn instance_count(test: &TestAst) -> Result<usize, ExpandError> {
    Ok(collect_loop_vars(test)?
        .iter()
        .map(|v| v.tags.len())
        .product())
}

/// Unroll the expansion loops of one macro-expanded test.
///
/// Instances are ordered with the first-declared loop variable varying
/// slowest, arms in declaration order.
pub fn unroll_loops(test: &TestAst) -> Result<Vec<TestInstance>, ExpandError> {
    let vars = collect_loop_vars(test)?;
    let total: usize = vars.iter().map(|v| v.tags.len()).product();
    let constants: Vec<(String, Tick)> = test
        .constants
        .iter()
        .map(|c| (c.name.clone(), c.value.ticks()))
        .collect();

    let mut instances = Vec::with_capacity(total);
    let mut choice = vec![0usize; vars.len()];
    for _ in 0..total {
        let variant_tags: Vec<String> = vars
            .iter()
            .zip(&choice)
            .map(|(v, &c)| v.tags[c].clone())
            .collect();
        let id = full_id(&test.id, &variant_tags);
        let mut processes = Vec::with_capacity(test.processes.len());
        let mut measures = HashSet::new();
        for p in &test.processes {
            let mut flat = Vec::new();
            splice_choice(&p.body, &vars, &choice, &mut flat);
            let mut actions = Vec::with_capacity(flat.len());
            for s in flat {
                let a = to_action(test, s)?;
                if let Action::Measure { name, .. } = &a {
                    if !measures.insert(name.clone()) {
                        return Err(ExpandError::DuplicateMeasure {
                            instance: id,
                            name: name.clone(),
                        });
                    }
                }
                actions.push(a);
            }
            processes.push(InstanceProcess {
                name: p.name.clone(),
                actions,
            });
        }
        instances.push(TestInstance {
            base_id: test.id.clone(),
            variant_tags,
            full_id: id,
            processes,
            constants: constants.clone(),
        });
        // odometer, last variable fastest
        for i in (0..choice.len()).rev() {
            choice[i] += 1;
            if choice[i] < vars[i].tags.len() {
                break;
            }
            choice[i] = 0;
        }
    }
    Ok(instances)
}

/// Expand macros and unroll every test of an include-resolved suite.
pub fn expand_suite(suite: &TestSuiteAst) -> Result<Vec<TestInstance>, ExpandError> {
    let expanded = expand_macros(suite)?;
    let mut all = Vec::new();
    let mut ids = HashSet::new();
    for t in &expanded.tests {
        for inst in unroll_loops(t)? {
            if !ids.insert(inst.full_id.to_ascii_lowercase()) {
                return Err(ExpandError::DuplicateInstance {
                    full_id: inst.full_id,
                });
            }
            all.push(inst);
        }
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_source;

    fn suite(src: &str) -> TestSuiteAst {
        parse_source(src, "main.vht").unwrap()
    }

    fn ids(instances: &[TestInstance]) -> Vec<String> {
        instances.iter().map(|i| i.full_id.clone()).collect()
    }

    #[test]
    fn included_macros_are_merged_first() {
        let files: HashMap<&str, &str> = HashMap::from([(
            "lib/common.vht",
            "DefineMacro SET_INITIAL_CONDITIONS\n  TDS_RDY <= OK;\nEndMacro\n",
        )]);
        let root = suite("include \"lib/common.vht\";\nDefineMacro LOCAL\nEndMacro\n");
        let mut loader = |p: &str| files.get(p).map(|s| s.to_string()).ok_or_else(|| "not found".to_string());
        let merged = resolve_includes(root, "main.vht", &mut loader).unwrap();
        let names: Vec<&str> = merged.macros.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["SET_INITIAL_CONDITIONS", "LOCAL"]);
        assert_eq!(merged.macros[0].origin, "lib/common.vht");
    }

    #[test]
    fn self_include_is_a_cycle() {
        let root = suite("include \"main.vht\";");
        let mut loader = |_: &str| Ok("include \"main.vht\";".to_string());
        match resolve_includes(root, "main.vht", &mut loader).unwrap_err() {
            ExpandError::IncludeCycle { cycle } => assert_eq!(cycle, ["main.vht", "main.vht"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_file_cycle_reports_path() {
        let files: HashMap<&str, &str> = HashMap::from([
            ("dir/a.vht", "include \"b.vht\";"),
            ("dir/b.vht", "include \"a.vht\";"),
        ]);
        let mut loader = |p: &str| files.get(p).map(|s| s.to_string()).ok_or_else(|| "nf".to_string());
        let err = load_sources(&["dir/a.vht".into()], &mut loader).unwrap_err();
        assert_eq!(
            err,
            ExpandError::IncludeCycle {
                cycle: vec!["dir/a.vht".into(), "dir/b.vht".into(), "dir/a.vht".into()]
            }
        );
    }

    #[test]
    fn duplicate_macro_across_files_names_both() {
        let files: HashMap<&str, &str> = HashMap::from([
            ("a.vht", "DefineMacro X\nEndMacro\n"),
            ("b.vht", "\nDefineMacro X\nEndMacro\n"),
        ]);
        let root = suite("include \"a.vht\";\ninclude \"b.vht\";");
        let mut loader = |p: &str| files.get(p).map(|s| s.to_string()).ok_or_else(|| "nf".to_string());
        match resolve_includes(root, "main.vht", &mut loader).unwrap_err() {
            ExpandError::DuplicateMacro { name, first, second } => {
                assert_eq!(name, "X");
                assert_eq!(first, "a.vht:1");
                assert_eq!(second, "b.vht:2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_include_is_reported() {
        let root = suite("include \"nope.vht\";");
        let mut loader = |_: &str| Err("no such file".to_string());
        assert!(matches!(
            resolve_includes(root, "main.vht", &mut loader).unwrap_err(),
            ExpandError::MissingFile { .. }
        ));
    }

    #[test]
    fn diamond_includes_merge_once() {
        let files: HashMap<&str, &str> = HashMap::from([
            ("a.vht", "include \"common.vht\";"),
            ("b.vht", "include \"common.vht\";"),
            ("common.vht", "DefineMacro C\nEndMacro\n"),
        ]);
        let root = suite("include \"a.vht\";\ninclude \"b.vht\";");
        let mut loader = |p: &str| files.get(p).map(|s| s.to_string()).ok_or_else(|| "nf".to_string());
        let merged = resolve_includes(root, "main.vht", &mut loader).unwrap();
        assert_eq!(merged.macros.len(), 1);
    }

    #[test]
    fn macro_call_splices_at_call_site() {
        let s = suite(
            "DefineMacro INIT\n A <= OK;\n B <= NOK;\nEndMacro\nTestID T\nProcess P\nLoop Tag X callMacro INIT\n C <= OK; EndTag EndLoop\nEndProcess\nEndTestID",
        );
        let e = expand_macros(&s).unwrap();
        let Statement::Loop(l) = &e.tests[0].processes[0].body[0] else {
            panic!()
        };
        assert_eq!(
            l.arms[0].body,
            vec![
                Statement::Assign { signal: "A".into(), level: Level::High },
                Statement::Assign { signal: "B".into(), level: Level::Low },
                Statement::Assign { signal: "C".into(), level: Level::High },
            ]
        );
    }

    #[test]
    fn empty_macro_splices_nothing() {
        let s = suite("DefineMacro E\nEndMacro\nTestID T\nProcess P\nA <= OK;\ncallMacro E\nEndProcess\nEndTestID");
        let e = expand_macros(&s).unwrap();
        assert_eq!(e.tests[0].processes[0].body.len(), 1);
    }

    #[test]
    fn macro_recursion_is_an_error() {
        let s = suite("DefineMacro A\ncallMacro B\nEndMacro\nDefineMacro B\ncallMacro A\nEndMacro\n");
        match expand_macros(&s).unwrap_err() {
            ExpandError::MacroRecursion { chain } => assert_eq!(chain, ["A", "B", "A"]),
            other => panic!("unexpected {other:?}"),
        }
        let direct = suite("DefineMacro A\ncallMacro A\nEndMacro\n");
        assert!(matches!(expand_macros(&direct), Err(ExpandError::MacroRecursion { .. })));
    }

    #[test]
    fn undefined_macro_is_an_error() {
        let s = suite("TestID T\nProcess P\ncallMacro NOPE\nEndProcess\nEndTestID");
        assert!(matches!(expand_macros(&s), Err(ExpandError::UndefinedMacro { .. })));
    }

    #[test]
    fn singleton_loop_equals_inlined_arm() {
        let looped = suite("TestID T\nProcess P\nA <= OK;\nLoop Tag Only B <= NOK; wait for 5 us; EndTag EndLoop\nC <= OK;\nEndProcess\nEndTestID");
        let inlined = suite("TestID T\nProcess P\nA <= OK;\nB <= NOK; wait for 5 us;\nC <= OK;\nEndProcess\nEndTestID");
        let a = expand_suite(&looped).unwrap();
        let b = expand_suite(&inlined).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].processes, b[0].processes);
        assert_eq!(a[0].full_id, "T__Only");
    }

    #[test]
    fn independent_loops_multiply_in_odometer_order() {
        // Oracle: the Cartesian product {A,B} x {C,D,E}, first loop slowest.
        let mut expected = Vec::new();
        for first in ["A", "B"] {
            for second in ["C", "D", "E"] {
                expected.push(format!("T__{first}__{second}"));
            }
        }
        let s = suite(
            "TestID T\nProcess P\nLoop Tag A EndTag Tag B EndTag EndLoop\nLoop Tag C EndTag Tag D EndTag Tag E EndTag EndLoop\nEndProcess\nEndTestID",
        );
        assert_eq!(ids(&expand_suite(&s).unwrap()), expected);
    }

    #[test]
    fn same_tag_sets_bind_across_processes() {
        let s = suite(
            "TestID T\nProcess S\nLoop Tag A X <= OK; EndTag Tag B X <= NOK; EndTag EndLoop\nEndProcess\nProcess V\nLoop Tag B assert Y = NOK; EndTag Tag A assert Y = OK; EndTag EndLoop\nEndProcess\nEndTestID",
        );
        let inst = expand_suite(&s).unwrap();
        assert_eq!(ids(&inst), ["T__A", "T__B"]);
        match (&inst[0].processes[0].actions[0], &inst[0].processes[1].actions[0]) {
            (Action::Assign { level: Level::High, .. }, Action::Assert { expected: Level::High, .. }) => {}
            other => panic!("arm A not tracked: {other:?}"),
        }
    }

    #[test]
    fn overlapping_tag_sets_are_ambiguous() {
        let s = suite("TestID T\nProcess P\nLoop Tag A EndTag Tag B EndTag EndLoop\nLoop Tag B EndTag Tag C EndTag EndLoop\nEndProcess\nEndTestID");
        assert!(matches!(expand_suite(&s), Err(ExpandError::AmbiguousLoops { .. })));
    }

    #[test]
    fn empty_loop_is_an_error() {
        let s = suite("TestID T\nProcess P\nLoop EndLoop\nEndProcess\nEndTestID");
        assert!(matches!(expand_suite(&s), Err(ExpandError::EmptyLoop { .. })));
    }

    #[test]
    fn no_loops_gives_one_instance_with_same_body() {
        let s = suite("TestID T\nconstant d : time := 3 us;\nProcess P\nA <= OK;\nwait for d;\nStop after 1 ms;\nEndProcess\nEndTestID");
        let inst = expand_suite(&s).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].full_id, "T");
        assert_eq!(
            inst[0].processes[0].actions,
            vec![
                Action::Assign { signal: "A".into(), level: Level::High },
                Action::WaitFor { ticks: 3 },
                Action::StopAfter { ticks: 1000 },
            ]
        );
    }

    #[test]
    fn macro_constants_resolve_against_test() {
        let s = suite("DefineMacro W\nwait for t_X;\nEndMacro\nTestID T\nconstant t_X : time := 7 us;\nProcess P\ncallMacro W\nEndProcess\nEndTestID\nTestID U\nProcess P\ncallMacro W\nEndProcess\nEndTestID");
        let expanded = expand_macros(&s).unwrap();
        assert_eq!(unroll_loops(&expanded.tests[0]).unwrap()[0].processes[0].actions, vec![Action::WaitFor { ticks: 7 }]);
        assert!(matches!(unroll_loops(&expanded.tests[1]), Err(ExpandError::UnknownConstant { .. })));
    }

    #[test]
    fn macro_introduced_duplicate_measure_is_caught() {
        let s = suite("DefineMacro M\nmeasure rising_edge(A) to rising_edge(B) name \"m\";\nEndMacro\nTestID T\nProcess P\ncallMacro M\ncallMacro M\nEndProcess\nEndTestID");
        assert!(matches!(expand_suite(&s), Err(ExpandError::DuplicateMeasure { .. })));
    }

    #[test]
    fn colliding_instance_ids_are_rejected() {
        let s = suite("TestID T__A\nProcess P\nEndProcess\nEndTestID\nTestID T\nProcess P\nLoop Tag A EndTag EndLoop\nEndProcess\nEndTestID");
        assert!(matches!(expand_suite(&s), Err(ExpandError::DuplicateInstance { .. })));
    }

    #[test]
    fn instance_source_reparses_to_same_actions() {
        let s = suite("TestID T\nProcess P\nLoop Tag A X <= OK; wait for 2 ms; EndTag EndLoop\nassert Y = NOK report \"say \"\"no\"\"\" severity NOTE;\nmeasure rising_edge(X) to falling_edge(Y) name \"m\";\nStop after 5 us;\nEndProcess\nEndTestID");
        let inst = &expand_suite(&s).unwrap()[0];
        let again = expand_suite(&parse_source(&inst.to_source(), "x").unwrap()).unwrap();
        assert_eq!(again[0].processes, inst.processes);
        assert_eq!(again[0].full_id, inst.full_id);
    }
}
