use std::fmt;

use super::{GoalError, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    KwReach,
    KwDrive,
    KwAvoid,
    KwMinimize,
    KwMaximize,
    KwAnd,
    KwOr,
    KwThen,
    KwUntil,
    KwIn,
    KwAbs,
    KwNorm,
    /// `Goal.Range`
    Range,
    /// `Goal.RangeAbove`
    RangeAbove,
    /// `Goal.RangeBelow`
    RangeBelow,
    Ident(String),
    Number(f64),
    Colon,
    Comma,
    Dot,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::KwReach => "reach",
            TokenKind::KwDrive => "drive",
            TokenKind::KwAvoid => "avoid",
            TokenKind::KwMinimize => "minimize",
            TokenKind::KwMaximize => "maximize",
            TokenKind::KwAnd => "and",
            TokenKind::KwOr => "or",
            TokenKind::KwThen => "then",
            TokenKind::KwUntil => "until",
            TokenKind::KwIn => "in",
            TokenKind::KwAbs => "abs",
            TokenKind::KwNorm => "norm",
            TokenKind::Range => "Goal.Range",
            TokenKind::RangeAbove => "Goal.RangeAbove",
            TokenKind::RangeBelow => "Goal.RangeBelow",
            TokenKind::Ident(name) => return write!(f, "{name}"),
            TokenKind::Number(n) => return write!(f, "{n}"),
            TokenKind::Colon => ":",
            TokenKind::Comma => ",",
            TokenKind::Dot => ".",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Star => "*",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    line_start: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            line_start: 0,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn span_from(&self, start: usize, line: u32, column: u32) -> Span {
        Span {
            start,
            end: self.pos,
            line,
            column,
        }
    }

    fn column(&self) -> u32 {
        // columns count characters, not bytes
        self.src[self.line_start..self.pos].chars().count() as u32 + 1
    }

    fn skip_trivia(&mut self) {
        while let Some(b) = self.peek() {
            match b {
                b'\n' => {
                    self.pos += 1;
                    self.line += 1;
                    self.line_start = self.pos;
                }
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'#' => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn ident_end(&self, from: usize) -> usize {
        let mut end = from;
        while let Some(&b) = self.bytes.get(end) {
            if b.is_ascii_alphanumeric() || b == b'_' {
                end += 1;
            } else {
                break;
            }
        }
        end
    }

    fn number(&mut self, line: u32, column: u32) -> Result<TokenKind, GoalError> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            let from = lx.pos;
            while lx.peek().is_some_and(|b| b.is_ascii_digit()) {
                lx.pos += 1;
            }
            lx.pos > from
        };
        digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if !digits(self) {
                return Err(GoalError::UnterminatedNumeral {
                    span: self.span_from(start, line, column),
                });
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if !digits(self) {
                return Err(GoalError::UnterminatedNumeral {
                    span: self.span_from(start, line, column),
                });
            }
        }
        if self
            .peek()
            .is_some_and(|b| b.is_ascii_alphabetic() || b == b'_')
        {
            // "12abc" is a malformed numeral rather than a number followed by a name
            self.pos = self.ident_end(self.pos);
            return Err(GoalError::UnterminatedNumeral {
                span: self.span_from(start, line, column),
            });
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(TokenKind::Number)
            .map_err(|_| GoalError::UnterminatedNumeral {
                span: self.span_from(start, line, column),
            })
    }

    fn next_token(&mut self) -> Result<Option<Token>, GoalError> {
        self.skip_trivia();
        let Some(b) = self.peek() else {
            return Ok(None);
        };
        let start = self.pos;
        let line = self.line;
        let column = self.column();
        let kind = match b {
            b':' => self.single(TokenKind::Colon),
            b',' => self.single(TokenKind::Comma),
            b'.' => self.single(TokenKind::Dot),
            b'(' => self.single(TokenKind::LParen),
            b')' => self.single(TokenKind::RParen),
            b'+' => self.single(TokenKind::Plus),
            b'-' => self.single(TokenKind::Minus),
            b'*' => self.single(TokenKind::Star),
            b'0'..=b'9' => self.number(line, column)?,
            b if b.is_ascii_alphabetic() || b == b'_' => self.word(),
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('\u{fffd}');
                self.pos += ch.len_utf8();
                return Err(GoalError::IllegalCharacter {
                    ch,
                    span: self.span_from(start, line, column),
                });
            }
        };
        Ok(Some(Token {
            kind,
            span: self.span_from(start, line, column),
        }))
    }

    fn single(&mut self, kind: TokenKind) -> TokenKind {
        self.pos += 1;
        kind
    }

    fn word(&mut self) -> TokenKind {
        let start = self.pos;
        let end = self.ident_end(start);
        let word = &self.src[start..end];
        if word == "Goal" && self.bytes.get(end) == Some(&b'.') {
            let member_end = self.ident_end(end + 1);
            let kind = match &self.src[end + 1..member_end] {
                "Range" => Some(TokenKind::Range),
                "RangeAbove" => Some(TokenKind::RangeAbove),
                "RangeBelow" => Some(TokenKind::RangeBelow),
                _ => None,
            };
            if let Some(kind) = kind {
                self.pos = member_end;
                return kind;
            }
        }
        self.pos = end;
        match word {
            "reach" => TokenKind::KwReach,
            "drive" => TokenKind::KwDrive,
            "avoid" => TokenKind::KwAvoid,
            "minimize" => TokenKind::KwMinimize,
            "maximize" => TokenKind::KwMaximize,
            "and" => TokenKind::KwAnd,
            "or" => TokenKind::KwOr,
            "then" => TokenKind::KwThen,
            "until" => TokenKind::KwUntil,
            "in" => TokenKind::KwIn,
            "abs" => TokenKind::KwAbs,
            "norm" => TokenKind::KwNorm,
            _ => TokenKind::Ident(word.to_string()),
        }
    }
}

/// Splits goal source text into tokens. `#` starts a comment running to the
/// end of the line.
pub fn tokenize(text: &str) -> Result<Vec<Token>, GoalError> {
    let mut lexer = Lexer::new(text);
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        out.push(tok);
    }
    Ok(out)
}
