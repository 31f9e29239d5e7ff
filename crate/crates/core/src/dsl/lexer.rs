use std::fmt;

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Include,
    DefineMacro,
    EndMacro,
    CallMacro,
    TestId,
    EndTestId,
    Constant,
    Time,
    Begin,
    Process,
    EndProcess,
    Loop,
    EndLoop,
    Tag,
    EndTag,
    Wait,
    For,
    Assert,
    Report,
    Severity,
    Measure,
    To,
    Name,
    Stop,
    After,
    RisingEdge,
    FallingEdge,
}

impl Keyword {
    const ALL: [(Keyword, &'static str); 27] = [
        (Keyword::Include, "include"),
        (Keyword::DefineMacro, "DefineMacro"),
        (Keyword::EndMacro, "EndMacro"),
        (Keyword::CallMacro, "callMacro"),
        (Keyword::TestId, "TestID"),
        (Keyword::EndTestId, "EndTestID"),
        (Keyword::Constant, "constant"),
        (Keyword::Time, "time"),
        (Keyword::Begin, "Begin"),
        (Keyword::Process, "Process"),
        (Keyword::EndProcess, "EndProcess"),
        (Keyword::Loop, "Loop"),
        (Keyword::EndLoop, "EndLoop"),
        (Keyword::Tag, "Tag"),
        (Keyword::EndTag, "EndTag"),
        (Keyword::Wait, "wait"),
        (Keyword::For, "for"),
        (Keyword::Assert, "assert"),
        (Keyword::Report, "report"),
        (Keyword::Severity, "severity"),
        (Keyword::Measure, "measure"),
        (Keyword::To, "to"),
        (Keyword::Name, "name"),
        (Keyword::Stop, "Stop"),
        (Keyword::After, "after"),
        (Keyword::RisingEdge, "rising_edge"),
        (Keyword::FallingEdge, "falling_edge"),
    ];

    pub fn lookup(word: &str) -> Option<Keyword> {
        Self::ALL
            .iter()
            .find(|(_, s)| s.eq_ignore_ascii_case(word))
            .map(|(k, _)| *k)
    }

    /// Canonical spelling, as used by the pretty-printer.
    pub fn as_str(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(k, _)| *k == self)
            .map(|(_, s)| *s)
            .unwrap_or("?")
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Identifier,
    Number,
    TimeUnit,
    StringLiteral,
    Operator,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text; for string literals, the unescaped contents.
    pub text: String,
    pub line: u32,
    pub column: u32,
}

impl Token {
    pub fn is_keyword(&self, kw: Keyword) -> bool {
        self.kind == TokenKind::Keyword(kw)
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Operator && self.text == op
    }
}

fn is_time_unit(word: &str) -> bool {
    ["ns", "us", "ms", "s"]
        .iter()
        .any(|u| u.eq_ignore_ascii_case(word))
}

/// Lex the whole source, keeping `--` comments as tokens.
pub fn lex(source: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens: Vec<Token> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    let last_significant = |tokens: &[Token]| {
        tokens
            .iter()
            .rev()
            .find(|t| t.kind != TokenKind::Comment)
            .map(|t| t.kind)
    };

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            tokens.push(Token {
                kind: TokenKind::Comment,
                text,
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c == '"' {
            let mut text = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(SyntaxError::new(
                            start_line,
                            start_col,
                            "unterminated string literal",
                        ))
                    }
                    Some('"') if chars.get(i + 1) == Some(&'"') => {
                        text.push('"');
                        i += 2;
                        col += 2;
                    }
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            tokens.push(Token {
                kind: TokenKind::StringLiteral,
                text,
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let digits = word.chars().take_while(|c| c.is_ascii_digit()).count();
            if digits == word.len() {
                tokens.push(Token {
                    kind: TokenKind::Number,
                    text: word,
                    line: start_line,
                    column: start_col,
                });
            } else if digits > 0 && is_time_unit(&word[digits..]) {
                // `100us` written without a space
                tokens.push(Token {
                    kind: TokenKind::Number,
                    text: word[..digits].to_string(),
                    line: start_line,
                    column: start_col,
                });
                tokens.push(Token {
                    kind: TokenKind::TimeUnit,
                    text: word[digits..].to_string(),
                    line: start_line,
                    column: start_col + digits as u32,
                });
            } else if is_time_unit(&word) && last_significant(&tokens) == Some(TokenKind::Number) {
                tokens.push(Token {
                    kind: TokenKind::TimeUnit,
                    text: word,
                    line: start_line,
                    column: start_col,
                });
            } else {
                let kind = match Keyword::lookup(&word) {
                    Some(kw) => TokenKind::Keyword(kw),
                    None => TokenKind::Identifier,
                };
                tokens.push(Token {
                    kind,
                    text: word,
                    line: start_line,
                    column: start_col,
                });
            }
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op = if two == "<=" || two == ":=" {
            Some(two)
        } else if matches!(c, ':' | ';' | '=' | '(' | ')') {
            Some(c.to_string())
        } else {
            None
        };
        match op {
            Some(op) => {
                let n = op.chars().count();
                tokens.push(Token {
                    kind: TokenKind::Operator,
                    text: op,
                    line: start_line,
                    column: start_col,
                });
                i += n;
                col += n as u32;
            }
            None => {
                return Err(SyntaxError::new(
                    start_line,
                    start_col,
                    format!("illegal character '{c}'"),
                ))
            }
        }
    }
    Ok(tokens)
}

/// Token stream for the parser: everything except comments.
pub fn tokenize(source: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut tokens = lex(source)?;
    tokens.retain(|t| t.kind != TokenKind::Comment);
    Ok(tokens)
}
