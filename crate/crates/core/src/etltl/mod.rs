//! ETLTL formulas: the AST, the goal-to-formula translation table, robustness
//! (quantitative) semantics and a brute-force trace evaluator.

pub(crate) mod robustness;
mod semantics;
mod translate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::goal_lang::{GoalAtom, GoalOp, Range, StateExpr};

pub use robustness::{robustness_bool, robustness_pred};
pub use semantics::trace_satisfies;
pub use translate::translate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EtltlError {
    #[error("NonFiniteState: state component {index} is {value}")]
    NonFiniteState { index: usize, value: f64 },
    #[error("TemporalNodePresent: `{0}` has no pointwise robustness")]
    TemporalNodePresent(String),
    #[error("EmptyTrace: a trace needs at least one state")]
    EmptyTrace,
}

/// Comparison carried by a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Relation {
    InRange { range: Range },
    LessThan { bound: f64 },
    GreaterThan { bound: f64 },
}

/// `f(s) ⟨ c` style predicate over the environment state.
///
/// For a closed range on a non-negative expression (a norm or absolute
/// value) whose lower bound is at or below zero, the predicate describes a
/// ball around the origin of the expression's arguments; `region_center`
/// and `region_radius` are then set and robustness is the signed distance
/// to that ball's surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    /// Name of the goal the predicate came from.
    pub goal: String,
    pub expr: StateExpr,
    pub relation: Relation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_radius: Option<f64>,
}

impl Predicate {
    /// Predicate tested by a goal. Avoid goals yield the membership test of
    /// the avoided range; the negation lives in the formula.
    ///
    /// Minimize and maximize only look at the bound they push against: the
    /// upper bound for minimize, the lower bound for maximize.
    pub fn from_atom(atom: &GoalAtom) -> Predicate {
        let relation = match (atom.op, atom.range) {
            (GoalOp::Minimize, Range::Closed { upper, .. }) | (_, Range::Below { upper }) => {
                Relation::LessThan { bound: upper }
            }
            (GoalOp::Maximize, Range::Closed { lower, .. }) | (_, Range::Above { lower }) => {
                Relation::GreaterThan { bound: lower }
            }
            (_, range @ Range::Closed { .. }) => Relation::InRange { range },
        };
        let (region_center, region_radius) = match (&relation, &atom.expr) {
            (Relation::InRange { range: Range::Closed { lower, upper } }, expr)
                if *lower <= 0.0 && expr.is_nonnegative() =>
            {
                let dims = match expr {
                    StateExpr::Norm { args } => args.len(),
                    _ => 1,
                };
                (Some(vec![0.0; dims]), Some(*upper))
            }
            _ => (None, None),
        };
        Predicate {
            goal: atom.name.clone(),
            expr: atom.expr.clone(),
            relation,
            region_center,
            region_radius,
        }
    }

    /// Values the region distance is measured over: the norm arguments, the
    /// absolute value's argument, or the expression itself.
    pub(crate) fn region_point(&self, state: &[f64]) -> Vec<f64> {
        match &self.expr {
            StateExpr::Norm { args } => args.iter().map(|a| a.eval(state)).collect(),
            StateExpr::Abs { arg } => vec![arg.eval(state)],
            e => vec![e.eval(state)],
        }
    }

    /// Qualitative membership computed directly from the relation, without
    /// going through robustness.
    pub fn membership(&self, state: &[f64]) -> bool {
        if let (Some(center), Some(radius)) = (&self.region_center, self.region_radius) {
            let p = self.region_point(state);
            return euclidean(&p, center) < radius;
        }
        let v = self.expr.eval(state);
        match self.relation {
            Relation::InRange { range } => range.contains(v),
            Relation::LessThan { bound } => v < bound,
            Relation::GreaterThan { bound } => v > bound,
        }
    }

    fn fmt_sexpr(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(pred {} \"{}\" ", self.goal, self.expr)?;
        match self.relation {
            Relation::InRange { range } => write!(
                f,
                "(in {} {}))",
                range.lower().unwrap_or(f64::NEG_INFINITY),
                range.upper().unwrap_or(f64::INFINITY)
            ),
            Relation::LessThan { bound } => write!(f, "(< {bound}))"),
            Relation::GreaterThan { bound } => write!(f, "(> {bound}))"),
        }
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// ETLTL formula.
///
/// `GloballyK` has no stored bound: `k` is always the number of steps
/// remaining in the episode, resolved when the formula is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    True,
    Pred(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    GloballyK(Box<Formula>),
}

impl Formula {
    pub fn pred(p: Predicate) -> Self {
        Formula::Pred(p)
    }
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }
    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }
    pub fn until(hold: Formula, target: Formula) -> Self {
        Formula::Until(Box::new(hold), Box::new(target))
    }
    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }
    pub fn globally(f: Formula) -> Self {
        Formula::GloballyK(Box::new(f))
    }

    /// Number of `Pred` leaves.
    pub fn leaf_count(&self) -> usize {
        match self {
            Formula::True => 0,
            Formula::Pred(_) => 1,
            Formula::Not(a) | Formula::Eventually(a) | Formula::Next(a) | Formula::GloballyK(a) => {
                a.leaf_count()
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) => {
                a.leaf_count() + b.leaf_count()
            }
        }
    }

    /// Negation appears only directly above predicates.
    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::True | Formula::Pred(_) => true,
            Formula::Not(a) => matches!(a.as_ref(), Formula::Pred(_)),
            Formula::Eventually(a) | Formula::Next(a) | Formula::GloballyK(a) => a.is_nnf(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) => a.is_nnf() && b.is_nnf(),
        }
    }

    /// True when the formula contains no temporal operator.
    pub fn is_propositional(&self) -> bool {
        match self {
            Formula::True | Formula::Pred(_) => true,
            Formula::Not(a) => a.is_propositional(),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_propositional() && b.is_propositional(),
            _ => false,
        }
    }

    /// The operands of the sequencing shape `F(a ∧ X(F(b)))` produced for
    /// `a then b`.
    pub fn as_sequence(&self) -> Option<(&Formula, &Formula)> {
        let Formula::Eventually(inner) = self else { return None };
        let Formula::And(first, rest) = inner.as_ref() else { return None };
        let Formula::Next(rest) = rest.as_ref() else { return None };
        let Formula::Eventually(second) = rest.as_ref() else { return None };
        Some((first, second))
    }

    /// Canonical S-expression rendering.
    pub fn to_sexpr(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Pred(p) => p.fmt_sexpr(f),
            Formula::Not(a) => write!(f, "(not {a})"),
            Formula::And(a, b) => write!(f, "(and {a} {b})"),
            Formula::Or(a, b) => write!(f, "(or {a} {b})"),
            Formula::Eventually(a) => write!(f, "(F {a})"),
            Formula::Until(a, b) => write!(f, "(U {a} {b})"),
            Formula::Next(a) => write!(f, "(X {a})"),
            Formula::GloballyK(a) => write!(f, "(G_k {a})"),
        }
    }
}
