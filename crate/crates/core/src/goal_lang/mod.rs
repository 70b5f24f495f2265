//! Goal specification language: lexer, recursive-descent parser and the
//! validated [`GoalProgram`] AST.
//!
//! ```text
//! program   := expr ;
//! expr      := untilE ;  untilE := thenE { "until" thenE } ;
//! thenE     := orE { "then" orE } ;  orE := andE { "or" andE } ;
//! andE      := atom { "and" atom } ;  atom := goal | "(" expr ")" ;
//! goal      := op IDENT ":" sexpr "in" range ;
//! op        := "reach"|"drive"|"avoid"|"minimize"|"maximize" ;
//! range     := "Goal.Range(" NUM "," NUM ")" | "Goal.RangeAbove(" NUM ")" | "Goal.RangeBelow(" NUM ")" ;
//! sexpr     := term { ("+"|"-") term } ;  term := factor { "*" factor } ;
//! factor    := NUM | "-" factor | ref | "abs(" sexpr ")"
//!            | "norm(" sexpr { "," sexpr } ")" | "(" sexpr ")" ;
//! ref       := IDENT [ "." IDENT ] ;
//! ```

mod ast;
mod lexer;
mod parser;
mod schema;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{GoalAtom, GoalExpr, GoalOp, GoalProgram, Range, RangeKind, StateExpr};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;
pub use schema::{FieldDecl, SchemaError, StateSchema};

/// Byte range into the goal source plus the 1-based line/column of its start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

impl Span {
    /// Span covering `self` through `other`.
    pub fn to(self, other: Span) -> Span {
        Span {
            start: self.start,
            end: other.end.max(self.end),
            line: self.line,
            column: self.column,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GoalError {
    #[error("{span}: illegal character `{ch}`")]
    IllegalCharacter { ch: char, span: Span },
    #[error("{span}: unterminated numeral")]
    UnterminatedNumeral { span: Span },
    #[error("{span}: unexpected token `{found}`, expected {expected}")]
    UnexpectedToken {
        found: String,
        expected: String,
        span: Span,
    },
    #[error("{span}: unexpected end of input, expected {expected}")]
    UnexpectedEnd { expected: String, span: Span },
    #[error("{span}: UnknownStateField `{name}`")]
    UnknownStateField { name: String, span: Span },
    #[error("{span}: InvalidRange: {reason}")]
    InvalidRange { reason: String, span: Span },
    #[error("{span}: DuplicateGoalName `{name}`")]
    DuplicateGoalName { name: String, span: Span },
}

impl GoalError {
    pub fn span(&self) -> Span {
        match self {
            GoalError::IllegalCharacter { span, .. }
            | GoalError::UnterminatedNumeral { span }
            | GoalError::UnexpectedToken { span, .. }
            | GoalError::UnexpectedEnd { span, .. }
            | GoalError::UnknownStateField { span, .. }
            | GoalError::InvalidRange { span, .. }
            | GoalError::DuplicateGoalName { span, .. } => *span,
        }
    }

    /// Renders the error with the offending source line and a caret marker.
    pub fn render(&self, source: &str) -> String {
        let span = self.span();
        let line = source.lines().nth(span.line.saturating_sub(1) as usize).unwrap_or("");
        let width = source
            .get(span.start..span.end)
            .map_or(1, |s| s.chars().count().max(1));
        format!(
            "error: {self}\n  | {line}\n  | {}{}",
            " ".repeat(span.column.saturating_sub(1) as usize),
            "^".repeat(width)
        )
    }
}

/// Tokenizes and parses `text` against `schema`.
pub fn parse_program(text: &str, schema: &StateSchema) -> Result<GoalProgram, GoalError> {
    parse(&tokenize(text)?, schema)
}
