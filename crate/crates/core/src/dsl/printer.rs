use std::fmt::Write as _;

use super::ast::*;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

pub fn print_statements(out: &mut String, body: &[Statement], depth: usize) {
    for s in body {
        indent(out, depth);
        match s {
            Statement::Assign { signal, level } => {
                let _ = writeln!(out, "{signal} <= {};", level.literal());
            }
            Statement::WaitFor(d) => {
                let _ = writeln!(out, "wait for {d};");
            }
            Statement::StopAfter(d) => {
                let _ = writeln!(out, "Stop after {d};");
            }
            Statement::Assert {
                signal,
                expected,
                message,
                severity,
            } => {
                let _ = writeln!(
                    out,
                    "assert {signal} = {} report {} severity {severity};",
                    expected.literal(),
                    quote(message)
                );
            }
            Statement::Measure {
                trigger,
                stopper,
                name,
            } => {
                let _ = writeln!(
                    out,
                    "measure {}({}) to {}({}) name {};",
                    trigger.edge.function_name(),
                    trigger.signal,
                    stopper.edge.function_name(),
                    stopper.signal,
                    quote(name)
                );
            }
            Statement::CallMacro { name } => {
                let _ = writeln!(out, "callMacro {name}");
            }
            Statement::Loop(l) => {
                out.push_str("Loop\n");
                for arm in &l.arms {
                    indent(out, depth + 1);
                    let _ = writeln!(out, "Tag {}", arm.tag);
                    print_statements(out, &arm.body, depth + 2);
                    indent(out, depth + 1);
                    out.push_str("EndTag\n");
                }
                indent(out, depth);
                out.push_str("EndLoop\n");
            }
        }
    }
}

pub fn print_test(out: &mut String, t: &TestAst) {
    let _ = writeln!(out, "TestID {}", t.id);
    for c in &t.constants {
        let _ = writeln!(out, "constant {} : time := {};", c.name, c.value);
    }
    out.push_str("Begin\n");
    for p in &t.processes {
        let _ = writeln!(out, "Process {}", p.name);
        print_statements(out, &p.body, 1);
        out.push_str("EndProcess\n");
    }
    out.push_str("EndTestID\n");
}

/// Render a suite back to source text that parses to the same tree.
pub fn print_suite(suite: &TestSuiteAst) -> String {
    let mut out = String::new();
    for inc in &suite.includes {
        let _ = writeln!(out, "include {};", quote(&inc.path));
    }
    for m in &suite.macros {
        let _ = writeln!(out, "DefineMacro {}", m.name);
        print_statements(&mut out, &m.body, 1);
        out.push_str("EndMacro\n");
    }
    for t in &suite.tests {
        print_test(&mut out, t);
    }
    out
}
