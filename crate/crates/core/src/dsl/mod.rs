//! Front end of the test-description language: lexing, parsing and
//! pretty-printing.
//!
//! The language is a small VHDL-flavoured process notation with three
//! extensions: macros (`DefineMacro` / `callMacro`), expansion loops
//! (`Loop` / `Tag`) and edge-to-edge time measurements (`measure`).
//! Keywords are case-insensitive and `--` starts a line comment.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;

use std::fmt;

pub use ast::*;
pub use lexer::{lex, tokenize, Keyword, Token, TokenKind};
pub use parser::parse_suite;
pub use printer::print_suite;

/// A lexical or syntax error with its source location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub file: Option<String>,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: u32, column: u32, message: impl Into<String>) -> Self {
        SyntaxError {
            file: None,
            line,
            column,
            message: message.into(),
        }
    }

    pub fn in_file(mut self, file: &str) -> Self {
        self.file = Some(file.to_string());
        self
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(file) => write!(f, "{file}:{}:{}: {}", self.line, self.column, self.message),
            None => write!(f, "{}:{}: {}", self.line, self.column, self.message),
        }
    }
}

impl std::error::Error for SyntaxError {}

/// Tokenize and parse one source file.
pub fn parse_source(source: &str, origin: &str) -> Result<TestSuiteAst, SyntaxError> {
    let tokens = tokenize(source).map_err(|e| e.in_file(origin))?;
    parse_suite(&tokens, origin).map_err(|e| e.in_file(origin))
}
