use super::lexer::{Token, TokenKind};
use super::{GoalAtom, GoalError, GoalExpr, GoalOp, GoalProgram, Range, Span, StateExpr, StateSchema};

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    schema: &'a StateSchema,
    names: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&'a TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn end_span(&self) -> Span {
        match self.tokens.last() {
            Some(t) => Span {
                start: t.span.end,
                end: t.span.end,
                line: t.span.line,
                column: t.span.column + (t.span.end - t.span.start) as u32,
            },
            None => Span::default(),
        }
    }

    fn unexpected(&self, expected: &str) -> GoalError {
        match self.peek() {
            Some(t) => GoalError::UnexpectedToken {
                found: t.kind.to_string(),
                expected: expected.to_string(),
                span: t.span,
            },
            None => GoalError::UnexpectedEnd {
                expected: expected.to_string(),
                span: self.end_span(),
            },
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Span, GoalError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(t.span)
            }
            _ => Err(self.unexpected(&format!("`{kind}`"))),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<GoalExpr, GoalError> {
        self.until_expr()
    }

    fn until_expr(&mut self) -> Result<GoalExpr, GoalError> {
        let mut lhs = self.then_expr()?;
        while self.eat(&TokenKind::KwUntil) {
            lhs = GoalExpr::until(lhs, self.then_expr()?);
        }
        Ok(lhs)
    }

    fn then_expr(&mut self) -> Result<GoalExpr, GoalError> {
        let mut lhs = self.or_expr()?;
        while self.eat(&TokenKind::KwThen) {
            lhs = GoalExpr::then(lhs, self.or_expr()?);
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<GoalExpr, GoalError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&TokenKind::KwOr) {
            lhs = GoalExpr::or(lhs, self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<GoalExpr, GoalError> {
        let mut lhs = self.atom()?;
        while self.eat(&TokenKind::KwAnd) {
            lhs = GoalExpr::and(lhs, self.atom()?);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<GoalExpr, GoalError> {
        if self.eat(&TokenKind::LParen) {
            let inner = self.expr()?;
            self.expect(TokenKind::RParen)?;
            return Ok(inner);
        }
        self.goal().map(GoalExpr::Atom)
    }

    fn goal(&mut self) -> Result<GoalAtom, GoalError> {
        let start = self.peek().map(|t| t.span);
        let op = match self.peek_kind() {
            Some(TokenKind::KwReach) => GoalOp::Reach,
            Some(TokenKind::KwDrive) => GoalOp::Drive,
            Some(TokenKind::KwAvoid) => GoalOp::Avoid,
            Some(TokenKind::KwMinimize) => GoalOp::Minimize,
            Some(TokenKind::KwMaximize) => GoalOp::Maximize,
            _ => return Err(self.unexpected("a goal operator or `(`")),
        };
        self.pos += 1;
        let (name, name_span) = match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(name),
                span,
            }) => {
                self.pos += 1;
                (name.clone(), *span)
            }
            _ => return Err(self.unexpected("a goal name")),
        };
        if self.names.contains(&name) {
            return Err(GoalError::DuplicateGoalName {
                name,
                span: name_span,
            });
        }
        self.expect(TokenKind::Colon)?;
        let expr = self.sexpr()?;
        self.expect(TokenKind::KwIn)?;
        let range_start = self.peek().map(|t| t.span);
        let range = self.range()?;
        let range_span = range_start.map_or(name_span, |s| s.to(self.tokens[self.pos - 1].span));
        GoalAtom::check_range(op, &range).map_err(|reason| GoalError::InvalidRange {
            reason: reason.to_string(),
            span: range_span,
        })?;
        self.names.push(name.clone());
        let span = start.unwrap_or(name_span).to(self.tokens[self.pos - 1].span);
        Ok(GoalAtom {
            op,
            name,
            expr,
            range,
            span,
        })
    }

    fn signed_number(&mut self) -> Result<f64, GoalError> {
        let negative = self.eat(&TokenKind::Minus);
        match self.peek_kind() {
            Some(TokenKind::Number(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(if negative { -n } else { n })
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn range(&mut self) -> Result<Range, GoalError> {
        let head = match self.peek() {
            Some(t) => t,
            None => return Err(self.unexpected("a Goal.Range form")),
        };
        let head_span = head.span;
        match head.kind {
            TokenKind::Range => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let lower = self.signed_number()?;
                self.expect(TokenKind::Comma)?;
                let upper = self.signed_number()?;
                let close = self.expect(TokenKind::RParen)?;
                Range::closed(lower, upper).ok_or_else(|| GoalError::InvalidRange {
                    reason: format!("lower bound {lower} must be strictly below upper bound {upper}"),
                    span: head_span.to(close),
                })
            }
            TokenKind::RangeAbove | TokenKind::RangeBelow => {
                let above = head.kind == TokenKind::RangeAbove;
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let bound = self.signed_number()?;
                self.expect(TokenKind::RParen)?;
                Ok(if above {
                    Range::Above { lower: bound }
                } else {
                    Range::Below { upper: bound }
                })
            }
            _ => Err(self.unexpected("Goal.Range, Goal.RangeAbove or Goal.RangeBelow")),
        }
    }

    // sexpr := term { ("+" | "-") term }
    fn sexpr(&mut self) -> Result<StateExpr, GoalError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&TokenKind::Plus) {
                let rhs = self.term()?;
                lhs = StateExpr::Add {
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                };
            } else if self.eat(&TokenKind::Minus) {
                let rhs = self.term()?;
                lhs = StateExpr::Sub {
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    // term := factor { "*" factor }
    fn term(&mut self) -> Result<StateExpr, GoalError> {
        let mut lhs = self.factor()?;
        while self.eat(&TokenKind::Star) {
            let rhs = self.factor()?;
            lhs = StateExpr::Mul {
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    // factor := NUM | "-" factor | ref | "abs" "(" sexpr ")"
    //         | "norm" "(" sexpr { "," sexpr } ")" | "(" sexpr ")"
    fn factor(&mut self) -> Result<StateExpr, GoalError> {
        let Some(tok) = self.peek() else {
            return Err(self.unexpected("a state expression"));
        };
        match &tok.kind {
            TokenKind::Number(n) => {
                self.pos += 1;
                Ok(StateExpr::Const { value: *n })
            }
            TokenKind::Minus => {
                self.pos += 1;
                if let Some(TokenKind::Number(n)) = self.peek_kind() {
                    let value = -*n;
                    self.pos += 1;
                    return Ok(StateExpr::Const { value });
                }
                Ok(StateExpr::Neg {
                    arg: Box::new(self.factor()?),
                })
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.sexpr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::KwAbs => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let arg = self.sexpr()?;
                self.expect(TokenKind::RParen)?;
                Ok(StateExpr::Abs { arg: Box::new(arg) })
            }
            TokenKind::KwNorm => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let mut args = vec![self.sexpr()?];
                while self.eat(&TokenKind::Comma) {
                    args.push(self.sexpr()?);
                }
                self.expect(TokenKind::RParen)?;
                Ok(StateExpr::Norm { args })
            }
            TokenKind::Ident(first) => {
                let mut span = tok.span;
                self.pos += 1;
                let mut name = first.clone();
                // `s.x` names field `x` of the state; the qualifier is free-form
                if self.eat(&TokenKind::Dot) {
                    match self.peek() {
                        Some(Token {
                            kind: TokenKind::Ident(field),
                            span: fspan,
                        }) => {
                            self.pos += 1;
                            name = field.clone();
                            span = *fspan;
                        }
                        _ => return Err(self.unexpected("a field name")),
                    }
                }
                match self.schema.index_of(&name) {
                    Some(index) => Ok(StateExpr::Field { index, name }),
                    None => Err(GoalError::UnknownStateField { name, span }),
                }
            }
            _ => Err(self.unexpected("a state expression")),
        }
    }
}

/// Parses a token stream into a validated goal program.
///
/// Combinators bind `and` tightest, then `or`, `then`, and `until` loosest;
/// all are left-associative and parentheses override.
pub fn parse(tokens: &[Token], schema: &StateSchema) -> Result<GoalProgram, GoalError> {
    let mut parser = Parser {
        tokens,
        pos: 0,
        schema,
        names: Vec::new(),
    };
    let root = parser.expr()?;
    if parser.peek().is_some() {
        return Err(parser.unexpected("`and`, `or`, `then`, `until` or end of input"));
    }
    Ok(GoalProgram {
        root,
        schema: schema.clone(),
    })
}
