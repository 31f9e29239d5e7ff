use std::collections::HashSet;

use super::ast::*;
use super::lexer::{Keyword, Token, TokenKind};
use super::SyntaxError;
use crate::level::{Edge, Level};

const MAX_NESTING: usize = 64;

/// Parse a token stream into a suite. `origin` is recorded on macros and
/// tests for later diagnostics.
pub fn parse_suite(tokens: &[Token], origin: &str) -> Result<TestSuiteAst, SyntaxError> {
    Parser {
        tokens,
        at: 0,
        origin,
        depth: 0,
    }
    .suite()
}

struct Parser<'t> {
    tokens: &'t [Token],
    at: usize,
    origin: &'t str,
    depth: usize,
}

fn describe(tok: Option<&Token>) -> String {
    match tok {
        None => "end of input".to_string(),
        Some(t) => match t.kind {
            TokenKind::StringLiteral => format!("string \"{}\"", t.text),
            _ => format!("'{}'", t.text),
        },
    }
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.at)
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.at);
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn here(&self) -> Pos {
        match self.peek().or_else(|| self.tokens.last()) {
            Some(t) => Pos {
                line: t.line,
                column: t.column,
            },
            None => Pos { line: 1, column: 1 },
        }
    }

    fn error_here(&self, message: impl Into<String>) -> SyntaxError {
        let p = self.here();
        SyntaxError::new(p.line, p.column, message)
    }

    fn error_at(&self, tok: &Token, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(tok.line, tok.column, message)
    }

    fn at_keyword(&self, kw: Keyword) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn eat_keyword(&mut self, kw: Keyword) -> bool {
        if self.at_keyword(kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: Keyword) -> Result<&'t Token, SyntaxError> {
        if self.at_keyword(kw) {
            Ok(self.bump().expect("peeked"))
        } else {
            Err(self.error_here(format!("expected '{kw}', found {}", describe(self.peek()))))
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_op(op)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), SyntaxError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{op}', found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self, what: &str) -> Result<&'t Token, SyntaxError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.at += 1;
                Ok(t)
            }
            other => Err(self.error_here(format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn string(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::StringLiteral => {
                self.at += 1;
                Ok(t.text.clone())
            }
            other => Err(self.error_here(format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn suite(mut self) -> Result<TestSuiteAst, SyntaxError> {
        let mut suite = TestSuiteAst::default();
        let mut macro_names: HashSet<String> = HashSet::new();
        let mut test_ids: HashSet<String> = HashSet::new();
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Keyword(Keyword::Include) => {
                    let pos = self.here();
                    self.bump();
                    let path = self.string("include path string")?;
                    self.eat_op(";");
                    suite.includes.push(Include { path, pos });
                }
                TokenKind::Keyword(Keyword::DefineMacro) => {
                    let m = self.macro_def()?;
                    if !macro_names.insert(m.name.to_ascii_lowercase()) {
                        return Err(SyntaxError::new(
                            m.pos.line,
                            m.pos.column,
                            format!("duplicate macro name '{}'", m.name),
                        ));
                    }
                    suite.macros.push(m);
                }
                TokenKind::Keyword(Keyword::TestId) => {
                    let t = self.test()?;
                    if !test_ids.insert(t.id.to_ascii_lowercase()) {
                        return Err(SyntaxError::new(
                            t.pos.line,
                            t.pos.column,
                            format!("duplicate test id '{}'", t.id),
                        ));
                    }
                    suite.tests.push(t);
                }
                _ => return Err(self.unexpected_at_top(tok)),
            }
        }
        Ok(suite)
    }

    fn unexpected_at_top(&self, tok: &Token) -> SyntaxError {
        match tok.kind {
            TokenKind::Keyword(kw @ (Keyword::EndMacro
            | Keyword::EndTestId
            | Keyword::EndProcess
            | Keyword::EndLoop
            | Keyword::EndTag)) => self.error_at(tok, format!("unbalanced '{kw}' without matching opener")),
            TokenKind::Identifier => self.error_at(tok, format!("unknown keyword '{}'", tok.text)),
            _ => self.error_at(
                tok,
                format!(
                    "expected 'include', 'DefineMacro' or 'TestID', found {}",
                    describe(Some(tok))
                ),
            ),
        }
    }

    fn macro_def(&mut self) -> Result<MacroDef, SyntaxError> {
        let pos = self.here();
        self.expect_keyword(Keyword::DefineMacro)?;
        let name = self.ident("macro name")?.text.clone();
        self.eat_op(";");
        let body = self.statements(Keyword::EndMacro, "DefineMacro", pos)?;
        self.expect_keyword(Keyword::EndMacro)?;
        self.eat_op(";");
        Ok(MacroDef {
            name,
            body,
            origin: self.origin.to_string(),
            pos,
        })
    }

    fn test(&mut self) -> Result<TestAst, SyntaxError> {
        let pos = self.here();
        self.expect_keyword(Keyword::TestId)?;
        let id = self.ident("test id")?.text.clone();
        self.eat_op(";");

        let mut constants: Vec<ConstantDecl> = Vec::new();
        while self.at_keyword(Keyword::Constant) {
            let kw = self.bump().expect("peeked");
            let name_tok = self.ident("constant name")?;
            self.expect_op(":")?;
            self.expect_keyword(Keyword::Time)?;
            self.expect_op(":=")?;
            let value = match self.duration_expr()? {
                DurationExpr::Literal(d) => d,
                DurationExpr::Constant(other) => {
                    match constants.iter().find(|c| c.name.eq_ignore_ascii_case(&other)) {
                        Some(c) => c.value,
                        None => {
                            return Err(self.error_at(
                                name_tok,
                                format!("constant '{}' refers to undeclared constant '{other}' (forward references are not allowed)", name_tok.text),
                            ))
                        }
                    }
                }
            };
            self.expect_op(";")?;
            if constants.iter().any(|c| c.name.eq_ignore_ascii_case(&name_tok.text)) {
                return Err(self.error_at(kw, format!("duplicate constant '{}'", name_tok.text)));
            }
            constants.push(ConstantDecl {
                name: name_tok.text.clone(),
                value,
            });
        }
        if self.eat_keyword(Keyword::Begin) {
            self.eat_op(";");
        }

        let mut processes = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.is_keyword(Keyword::Process) => processes.push(self.process()?),
                Some(t) if t.is_keyword(Keyword::EndTestId) => {
                    self.bump();
                    self.eat_op(";");
                    break;
                }
                Some(t) if t.is_keyword(Keyword::Constant) => {
                    return Err(self.error_at(t, "constants must be declared before the first process"))
                }
                Some(t) if t.is_keyword(Keyword::TestId) || t.is_keyword(Keyword::DefineMacro) => {
                    return Err(self.error_at(
                        t,
                        format!("unbalanced 'TestID' opened at {}:{}: expected 'EndTestID'", pos.line, pos.column),
                    ))
                }
                None => {
                    return Err(self.error_here(format!(
                        "unbalanced 'TestID' opened at {}:{}: expected 'EndTestID', found end of input",
                        pos.line, pos.column
                    )))
                }
                Some(t) if matches!(t.kind, TokenKind::Keyword(Keyword::EndProcess | Keyword::EndLoop | Keyword::EndTag | Keyword::EndMacro)) => {
                    return Err(self.error_at(t, format!("unbalanced '{}' without matching opener", t.text)))
                }
                Some(t) => {
                    return Err(self.error_at(
                        t,
                        format!("expected 'Process' or 'EndTestID', found {}", describe(Some(t))),
                    ))
                }
            }
        }
        if processes.is_empty() {
            return Err(SyntaxError::new(
                pos.line,
                pos.column,
                format!("test '{id}' declares no process"),
            ));
        }

        let test = TestAst {
            id,
            constants,
            processes,
            origin: self.origin.to_string(),
            pos,
        };
        check_test_scoping(&test, pos)?;
        Ok(test)
    }

    fn process(&mut self) -> Result<ProcessAst, SyntaxError> {
        let pos = self.here();
        self.expect_keyword(Keyword::Process)?;
        let name = self.ident("process name")?.text.clone();
        self.eat_op(";");
        let body = self.statements(Keyword::EndProcess, "Process", pos)?;
        self.expect_keyword(Keyword::EndProcess)?;
        self.eat_op(";");
        Ok(ProcessAst { name, body })
    }

    /// Statements up to (not consuming) `closer`.
    fn statements(
        &mut self,
        closer: Keyword,
        opener: &str,
        opened: Pos,
    ) -> Result<Vec<Statement>, SyntaxError> {
        let mut body = Vec::new();
        loop {
            let Some(tok) = self.peek() else {
                return Err(self.error_here(format!(
                    "unbalanced '{opener}' opened at {}:{}: expected '{closer}', found end of input",
                    opened.line, opened.column
                )));
            };
            if tok.is_keyword(closer) {
                return Ok(body);
            }
            match tok.kind {
                TokenKind::Keyword(
                    kw @ (Keyword::EndMacro
                    | Keyword::EndTestId
                    | Keyword::EndProcess
                    | Keyword::EndLoop
                    | Keyword::EndTag
                    | Keyword::Tag
                    | Keyword::Process
                    | Keyword::TestId),
                ) => {
                    return Err(self.error_at(
                        tok,
                        format!(
                            "unbalanced '{opener}' opened at {}:{}: expected '{closer}', found '{kw}'",
                            opened.line, opened.column
                        ),
                    ))
                }
                TokenKind::Keyword(Keyword::DefineMacro) => {
                    return Err(self.error_at(tok, "nested macro definitions are not allowed"))
                }
                _ => body.push(self.statement()?),
            }
        }
    }

    fn statement(&mut self) -> Result<Statement, SyntaxError> {
        let tok = self.peek().expect("caller checked");
        match tok.kind {
            TokenKind::Identifier => self.assignment(),
            TokenKind::Keyword(Keyword::Wait) => {
                self.bump();
                self.expect_keyword(Keyword::For)?;
                let d = self.duration_expr()?;
                self.expect_op(";")?;
                Ok(Statement::WaitFor(d))
            }
            TokenKind::Keyword(Keyword::Stop) => {
                self.bump();
                self.expect_keyword(Keyword::After)?;
                let d = self.duration_expr()?;
                self.expect_op(";")?;
                Ok(Statement::StopAfter(d))
            }
            TokenKind::Keyword(Keyword::Assert) => self.assertion(),
            TokenKind::Keyword(Keyword::Measure) => self.measure(),
            TokenKind::Keyword(Keyword::CallMacro) => {
                self.bump();
                let name = self.ident("macro name")?.text.clone();
                self.eat_op(";");
                Ok(Statement::CallMacro { name })
            }
            TokenKind::Keyword(Keyword::Loop) => self.loop_block(),
            _ => Err(self.error_at(tok, format!("expected a statement, found {}", describe(Some(tok))))),
        }
    }

    fn assignment(&mut self) -> Result<Statement, SyntaxError> {
        let target = self.bump().expect("caller checked");
        if !self.peek().is_some_and(|t| t.is_op("<=")) {
            return Err(self.error_at(target, format!("unknown keyword '{}'", target.text)));
        }
        self.bump();
        let value = self.peek();
        let level = match value {
            Some(v) if v.kind == TokenKind::Identifier => match Level::from_literal(&v.text) {
                Some(l) => l,
                None => {
                    return Err(self.error_at(
                        v,
                        format!(
                            "signal-to-signal assignment not allowed ('{}' <= '{}'); only OK or NOK may be assigned",
                            target.text, v.text
                        ),
                    ))
                }
            },
            other => {
                return Err(self.error_here(format!("expected OK or NOK, found {}", describe(other))))
            }
        };
        self.bump();
        self.expect_op(";")?;
        Ok(Statement::Assign {
            signal: target.text.clone(),
            level,
        })
    }

    fn level_literal(&mut self) -> Result<Level, SyntaxError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => match Level::from_literal(&t.text) {
                Some(l) => {
                    self.bump();
                    Ok(l)
                }
                None => Err(self.error_at(
                    t,
                    format!("assertions compare against OK or NOK only, found '{}'", t.text),
                )),
            },
            other => Err(self.error_here(format!("expected OK or NOK, found {}", describe(other)))),
        }
    }

    fn assertion(&mut self) -> Result<Statement, SyntaxError> {
        self.expect_keyword(Keyword::Assert)?;
        let signal = self.ident("signal name")?.text.clone();
        self.expect_op("=")?;
        let expected = self.level_literal()?;
        let message = if self.eat_keyword(Keyword::Report) {
            self.string("report message")?
        } else {
            "Assertion violation.".to_string()
        };
        let severity = if self.eat_keyword(Keyword::Severity) {
            let t = self.ident("severity level")?;
            Severity::from_word(&t.text).ok_or_else(|| {
                self.error_at(
                    t,
                    format!("unknown severity '{}' (expected NOTE, WARNING, ERROR or FAILURE)", t.text),
                )
            })?
        } else {
            Severity::Error
        };
        self.expect_op(";")?;
        Ok(Statement::Assert {
            signal,
            expected,
            message,
            severity,
        })
    }

    fn edge_event(&mut self) -> Result<EdgeEvent, SyntaxError> {
        let edge = if self.eat_keyword(Keyword::RisingEdge) {
            Edge::Rising
        } else if self.eat_keyword(Keyword::FallingEdge) {
            Edge::Falling
        } else {
            return Err(self.error_here(format!(
                "expected 'rising_edge' or 'falling_edge', found {}",
                describe(self.peek())
            )));
        };
        self.expect_op("(")?;
        let signal = self.ident("signal name")?.text.clone();
        self.expect_op(")")?;
        Ok(EdgeEvent { edge, signal })
    }

    fn measure(&mut self) -> Result<Statement, SyntaxError> {
        self.expect_keyword(Keyword::Measure)?;
        let trigger = self.edge_event()?;
        self.expect_keyword(Keyword::To)?;
        let stopper = self.edge_event()?;
        self.expect_keyword(Keyword::Name)?;
        let name_pos = self.here();
        let name = self.string("measurement name")?;
        if name.trim().is_empty() {
            return Err(SyntaxError::new(
                name_pos.line,
                name_pos.column,
                "measurement name must not be empty",
            ));
        }
        self.expect_op(";")?;
        Ok(Statement::Measure {
            trigger,
            stopper,
            name,
        })
    }

    fn loop_block(&mut self) -> Result<Statement, SyntaxError> {
        let opened = self.here();
        self.expect_keyword(Keyword::Loop)?;
        self.eat_op(";");
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(SyntaxError::new(
                opened.line,
                opened.column,
                format!("loops nested deeper than {MAX_NESTING} levels"),
            ));
        }
        let mut arms = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.is_keyword(Keyword::EndLoop) => {
                    self.bump();
                    self.eat_op(";");
                    break;
                }
                Some(t) if t.is_keyword(Keyword::Tag) => {
                    let tag_pos = self.here();
                    self.bump();
                    let tag = self.ident("tag name")?;
                    if arms
                        .iter()
                        .any(|a: &TagArm| a.tag.eq_ignore_ascii_case(&tag.text))
                    {
                        return Err(self.error_at(tag, format!("duplicate tag '{}' in loop", tag.text)));
                    }
                    let tag = tag.text.clone();
                    self.eat_op(";");
                    let body = self.statements(Keyword::EndTag, "Tag", tag_pos)?;
                    self.expect_keyword(Keyword::EndTag)?;
                    self.eat_op(";");
                    arms.push(TagArm { tag, body });
                }
                Some(t) => {
                    return Err(self.error_at(
                        t,
                        format!(
                            "unbalanced 'Loop' opened at {}:{}: expected 'Tag' or 'EndLoop', found {}",
                            opened.line,
                            opened.column,
                            describe(Some(t))
                        ),
                    ))
                }
                None => {
                    return Err(self.error_here(format!(
                        "unbalanced 'Loop' opened at {}:{}: expected 'EndLoop', found end of input",
                        opened.line, opened.column
                    )))
                }
            }
        }
        self.depth -= 1;
        Ok(Statement::Loop(LoopBlock { arms }))
    }

    fn duration_expr(&mut self) -> Result<DurationExpr, SyntaxError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Number => {
                self.bump();
                let value: u64 = t
                    .text
                    .parse()
                    .map_err(|_| self.error_at(t, format!("number '{}' out of range", t.text)))?;
                let unit_tok = match self.peek() {
                    Some(u) if u.kind == TokenKind::TimeUnit => u,
                    other => {
                        return Err(self.error_here(format!(
                            "expected time unit (ns, us, ms, s), found {}",
                            describe(other)
                        )))
                    }
                };
                self.bump();
                let unit = TimeUnit::from_word(&unit_tok.text).expect("lexer classified");
                Duration::new(value, unit)
                    .map(DurationExpr::Literal)
                    .map_err(|m| self.error_at(t, m))
            }
            Some(t) if t.kind == TokenKind::Identifier => {
                self.bump();
                Ok(DurationExpr::Constant(t.text.clone()))
            }
            other => Err(self.error_here(format!("expected a duration, found {}", describe(other)))),
        }
    }
}

/// Constant references inside the test body must resolve to the test's own
/// constants, and measurement names must be unique within any one variant.
fn check_test_scoping(test: &TestAst, pos: Pos) -> Result<(), SyntaxError> {
    let err = |m: String| SyntaxError::new(pos.line, pos.column, m);
    let mut unknown: Option<String> = None;
    for p in &test.processes {
        walk_statements(&p.body, &mut |s| {
            if let Statement::WaitFor(DurationExpr::Constant(c)) | Statement::StopAfter(DurationExpr::Constant(c)) = s {
                if unknown.is_none() && test.constant(c).is_none() {
                    unknown = Some(c.clone());
                }
            }
        });
    }
    if let Some(c) = unknown {
        return Err(err(format!("test '{}' references undeclared constant '{c}'", test.id)));
    }
    let mut seen = HashSet::new();
    for p in &test.processes {
        if let Some(dup) = measure_names(&p.body, &mut seen) {
            return Err(err(format!(
                "duplicate measurement name \"{dup}\" in test '{}'",
                test.id
            )));
        }
    }
    Ok(())
}

/// Collect measurement names into `seen`; arms of one loop are alternatives
/// and may reuse a name. Returns the first clash.
fn measure_names(body: &[Statement], seen: &mut HashSet<String>) -> Option<String> {
    for s in body {
        match s {
            Statement::Measure { name, .. } => {
                if !seen.insert(name.clone()) {
                    return Some(name.clone());
                }
            }
            Statement::Loop(l) => {
                let mut union = HashSet::new();
                for arm in &l.arms {
                    let mut arm_seen = seen.clone();
                    if let Some(d) = measure_names(&arm.body, &mut arm_seen) {
                        return Some(d);
                    }
                    union.extend(arm_seen.difference(seen).cloned().collect::<Vec<_>>());
                }
                seen.extend(union);
            }
            _ => {}
        }
    }
    None
}
