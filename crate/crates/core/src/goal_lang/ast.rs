use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GoalError, Span, StateSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalOp {
    Reach,
    Drive,
    Avoid,
    Minimize,
    Maximize,
}

impl GoalOp {
    pub fn keyword(self) -> &'static str {
        match self {
            GoalOp::Reach => "reach",
            GoalOp::Drive => "drive",
            GoalOp::Avoid => "avoid",
            GoalOp::Minimize => "minimize",
            GoalOp::Maximize => "maximize",
        }
    }
}

impl fmt::Display for GoalOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeKind {
    ClosedInterval,
    AboveOnly,
    BelowOnly,
}

/// Target or avoid range of a goal, in the units of the test value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Range {
    Closed { lower: f64, upper: f64 },
    Above { lower: f64 },
    Below { upper: f64 },
}

impl Range {
    /// Closed interval; `lower < upper` is required.
    pub fn closed(lower: f64, upper: f64) -> Option<Range> {
        (lower.is_finite() && upper.is_finite() && lower < upper)
            .then_some(Range::Closed { lower, upper })
    }

    pub fn kind(&self) -> RangeKind {
        match self {
            Range::Closed { .. } => RangeKind::ClosedInterval,
            Range::Above { .. } => RangeKind::AboveOnly,
            Range::Below { .. } => RangeKind::BelowOnly,
        }
    }

    pub fn lower(&self) -> Option<f64> {
        match *self {
            Range::Closed { lower, .. } | Range::Above { lower } => Some(lower),
            Range::Below { .. } => None,
        }
    }

    pub fn upper(&self) -> Option<f64> {
        match *self {
            Range::Closed { upper, .. } | Range::Below { upper } => Some(upper),
            Range::Above { .. } => None,
        }
    }

    /// Strict membership; boundary values are outside.
    pub fn contains(&self, v: f64) -> bool {
        match *self {
            Range::Closed { lower, upper } => lower < v && v < upper,
            Range::Above { lower } => v > lower,
            Range::Below { upper } => v < upper,
        }
    }

    /// Distance from `v` to the range, zero inside.
    pub fn distance(&self, v: f64) -> f64 {
        match *self {
            Range::Closed { lower, upper } => (lower - v).max(v - upper).max(0.0),
            Range::Above { lower } => (lower - v).max(0.0),
            Range::Below { upper } => (v - upper).max(0.0),
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Range::Closed { lower, upper } => write!(f, "Goal.Range({lower}, {upper})"),
            Range::Above { lower } => write!(f, "Goal.RangeAbove({lower})"),
            Range::Below { upper } => write!(f, "Goal.RangeBelow({upper})"),
        }
    }
}

/// Scalar function of the environment state vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum StateExpr {
    Field { index: usize, name: String },
    Const { value: f64 },
    Neg { arg: Box<StateExpr> },
    Add { lhs: Box<StateExpr>, rhs: Box<StateExpr> },
    Sub { lhs: Box<StateExpr>, rhs: Box<StateExpr> },
    Mul { lhs: Box<StateExpr>, rhs: Box<StateExpr> },
    Abs { arg: Box<StateExpr> },
    Norm { args: Vec<StateExpr> },
}

impl StateExpr {
    pub fn field(index: usize, name: impl Into<String>) -> Self {
        StateExpr::Field {
            index,
            name: name.into(),
        }
    }

    pub fn eval(&self, state: &[f64]) -> f64 {
        match self {
            StateExpr::Field { index, .. } => state[*index],
            StateExpr::Const { value } => *value,
            StateExpr::Neg { arg } => -arg.eval(state),
            StateExpr::Add { lhs, rhs } => lhs.eval(state) + rhs.eval(state),
            StateExpr::Sub { lhs, rhs } => lhs.eval(state) - rhs.eval(state),
            StateExpr::Mul { lhs, rhs } => lhs.eval(state) * rhs.eval(state),
            StateExpr::Abs { arg } => arg.eval(state).abs(),
            StateExpr::Norm { args } => args
                .iter()
                .map(|a| {
                    let v = a.eval(state);
                    v * v
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Bounds of the expression given bounds for each field, by interval
    /// arithmetic. `bounds` returns `None` for fields it does not know.
    pub fn interval<F>(&self, bounds: &F) -> Result<(f64, f64), String>
    where
        F: Fn(usize, &str) -> Option<(f64, f64)>,
    {
        Ok(match self {
            StateExpr::Field { index, name } => {
                bounds(*index, name).ok_or_else(|| name.clone())?
            }
            StateExpr::Const { value } => (*value, *value),
            StateExpr::Neg { arg } => {
                let (lo, hi) = arg.interval(bounds)?;
                (-hi, -lo)
            }
            StateExpr::Add { lhs, rhs } => {
                let (a, b) = lhs.interval(bounds)?;
                let (c, d) = rhs.interval(bounds)?;
                (a + c, b + d)
            }
            StateExpr::Sub { lhs, rhs } => {
                let (a, b) = lhs.interval(bounds)?;
                let (c, d) = rhs.interval(bounds)?;
                (a - d, b - c)
            }
            StateExpr::Mul { lhs, rhs } => {
                let (a, b) = lhs.interval(bounds)?;
                let (c, d) = rhs.interval(bounds)?;
                let p = [a * c, a * d, b * c, b * d];
                (
                    p.iter().copied().fold(f64::INFINITY, f64::min),
                    p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            }
            StateExpr::Abs { arg } => abs_interval(arg.interval(bounds)?),
            StateExpr::Norm { args } => {
                let (mut lo2, mut hi2) = (0.0, 0.0);
                for a in args {
                    let (lo, hi) = abs_interval(a.interval(bounds)?);
                    lo2 += lo * lo;
                    hi2 += hi * hi;
                }
                (f64::sqrt(lo2), f64::sqrt(hi2))
            }
        })
    }

    /// True when the expression cannot take negative values.
    pub fn is_nonnegative(&self) -> bool {
        matches!(self, StateExpr::Abs { .. } | StateExpr::Norm { .. })
    }

    /// Field names referenced by the expression, in first-use order.
    pub fn fields(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        self.collect_fields(&mut out);
        out
    }

    fn collect_fields<'a>(&'a self, out: &mut Vec<(usize, &'a str)>) {
        match self {
            StateExpr::Field { index, name } => {
                if !out.iter().any(|(i, _)| i == index) {
                    out.push((*index, name));
                }
            }
            StateExpr::Const { .. } => {}
            StateExpr::Neg { arg } | StateExpr::Abs { arg } => arg.collect_fields(out),
            StateExpr::Add { lhs, rhs } | StateExpr::Sub { lhs, rhs } | StateExpr::Mul { lhs, rhs } => {
                lhs.collect_fields(out);
                rhs.collect_fields(out);
            }
            StateExpr::Norm { args } => args.iter().for_each(|a| a.collect_fields(out)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            StateExpr::Add { .. } | StateExpr::Sub { .. } => 1,
            StateExpr::Mul { .. } => 2,
            StateExpr::Neg { .. } => 3,
            StateExpr::Const { value } if value.is_sign_negative() => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            StateExpr::Field { name, .. } => write!(f, "s.{name}"),
            StateExpr::Const { value } => write!(f, "{value}"),
            StateExpr::Neg { arg } => {
                f.write_str("-")?;
                arg.fmt_prec(f, 4)
            }
            StateExpr::Add { lhs, rhs } => {
                lhs.fmt_prec(f, 1)?;
                f.write_str(" + ")?;
                rhs.fmt_prec(f, 2)
            }
            StateExpr::Sub { lhs, rhs } => {
                lhs.fmt_prec(f, 1)?;
                f.write_str(" - ")?;
                rhs.fmt_prec(f, 2)
            }
            StateExpr::Mul { lhs, rhs } => {
                lhs.fmt_prec(f, 2)?;
                f.write_str(" * ")?;
                rhs.fmt_prec(f, 3)
            }
            StateExpr::Abs { arg } => {
                f.write_str("abs(")?;
                arg.fmt_prec(f, 0)?;
                f.write_str(")")
            }
            StateExpr::Norm { args } => {
                f.write_str("norm(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                f.write_str(")")
            }
        }
    }
}

fn abs_interval((lo, hi): (f64, f64)) -> (f64, f64) {
    if lo >= 0.0 {
        (lo, hi)
    } else if hi <= 0.0 {
        (-hi, -lo)
    } else {
        (0.0, hi.max(-lo))
    }
}

impl fmt::Display for StateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalAtom {
    pub op: GoalOp,
    pub name: String,
    pub expr: StateExpr,
    pub range: Range,
    #[serde(skip)]
    pub span: Span,
}

impl GoalAtom {
    /// Checks the operator/range pairing: minimize needs an upper bound and
    /// maximize a lower bound.
    pub fn check_range(op: GoalOp, range: &Range) -> Result<(), &'static str> {
        match (op, range.kind()) {
            (GoalOp::Minimize, RangeKind::AboveOnly) => {
                Err("minimize requires Goal.RangeBelow or Goal.Range")
            }
            (GoalOp::Maximize, RangeKind::BelowOnly) => {
                Err("maximize requires Goal.RangeAbove or Goal.Range")
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for GoalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {} in {}", self.op, self.name, self.expr, self.range)
    }
}

/// Goal tree. `Until(hold, target)` reads "hold until target".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalExpr {
    Atom(GoalAtom),
    And(Box<GoalExpr>, Box<GoalExpr>),
    Or(Box<GoalExpr>, Box<GoalExpr>),
    Then(Box<GoalExpr>, Box<GoalExpr>),
    Until(Box<GoalExpr>, Box<GoalExpr>),
}

impl GoalExpr {
    pub fn and(a: GoalExpr, b: GoalExpr) -> Self {
        GoalExpr::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: GoalExpr, b: GoalExpr) -> Self {
        GoalExpr::Or(Box::new(a), Box::new(b))
    }
    pub fn then(a: GoalExpr, b: GoalExpr) -> Self {
        GoalExpr::Then(Box::new(a), Box::new(b))
    }
    pub fn until(hold: GoalExpr, target: GoalExpr) -> Self {
        GoalExpr::Until(Box::new(hold), Box::new(target))
    }

    /// Leaves in left-to-right (declaration) order.
    pub fn atoms(&self) -> Vec<&GoalAtom> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a GoalAtom>) {
        match self {
            GoalExpr::Atom(a) => out.push(a),
            GoalExpr::And(a, b) | GoalExpr::Or(a, b) | GoalExpr::Then(a, b) | GoalExpr::Until(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            GoalExpr::Until(..) => 1,
            GoalExpr::Then(..) => 2,
            GoalExpr::Or(..) => 3,
            GoalExpr::And(..) => 4,
            GoalExpr::Atom(_) => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        let (a, b, kw, p) = match self {
            GoalExpr::Atom(atom) => return write!(f, "{atom}"),
            GoalExpr::And(a, b) => (a, b, "and", 4),
            GoalExpr::Or(a, b) => (a, b, "or", 3),
            GoalExpr::Then(a, b) => (a, b, "then", 2),
            GoalExpr::Until(a, b) => (a, b, "until", 1),
        };
        // left-associative: only the right operand needs a strictly tighter binding
        a.fmt_prec(f, p)?;
        write!(f, " {kw} ")?;
        b.fmt_prec(f, p + 1)
    }

    fn clear_spans(&mut self) {
        match self {
            GoalExpr::Atom(a) => a.span = Span::default(),
            GoalExpr::And(a, b) | GoalExpr::Or(a, b) | GoalExpr::Then(a, b) | GoalExpr::Until(a, b) => {
                a.clear_spans();
                b.clear_spans();
            }
        }
    }
}

impl fmt::Display for GoalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// A validated goal specification together with the state schema it was
/// resolved against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalProgram {
    pub root: GoalExpr,
    pub schema: StateSchema,
}

impl GoalProgram {
    pub fn atoms(&self) -> Vec<&GoalAtom> {
        self.root.atoms()
    }

    pub fn atom(&self, name: &str) -> Option<&GoalAtom> {
        self.atoms().into_iter().find(|a| a.name == name)
    }

    /// Copy with all source spans reset, for structural comparison.
    pub fn without_spans(&self) -> GoalProgram {
        let mut p = self.clone();
        p.root.clear_spans();
        p
    }

    /// Re-validates invariants that the parser guarantees for parsed input;
    /// useful for programs assembled by hand.
    pub fn validate(&self) -> Result<(), GoalError> {
        let atoms = self.atoms();
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].iter().any(|b| b.name == a.name) {
                return Err(GoalError::DuplicateGoalName {
                    name: a.name.clone(),
                    span: a.span,
                });
            }
            GoalAtom::check_range(a.op, &a.range).map_err(|reason| GoalError::InvalidRange {
                reason: reason.to_string(),
                span: a.span,
            })?;
            for (index, name) in a.expr.fields() {
                if self.schema.fields.get(index).map(|f| f.name.as_str()) != Some(name) {
                    return Err(GoalError::UnknownStateField {
                        name: name.to_string(),
                        span: a.span,
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for GoalProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}
