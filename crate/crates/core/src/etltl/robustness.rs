use super::{euclidean, EtltlError, Formula, Predicate, Relation};
use crate::goal_lang::Range;

pub(crate) fn check_finite(state: &[f64]) -> Result<(), EtltlError> {
    match state.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(EtltlError::NonFiniteState {
            index,
            value: state[index],
        }),
        None => Ok(()),
    }
}

/// Raw robustness of `p` at `state`, in the units of the test value.
///
/// `x < c` gives `c - x`, `x > c` gives `x - c`, and a closed range gives
/// the signed distance to its boundary, `min(x - a, b - x)`, which equals
/// `radius - |x - center|`.
pub fn robustness_pred(p: &Predicate, state: &[f64]) -> Result<f64, EtltlError> {
    check_finite(state)?;
    Ok(raw(p, state))
}

pub(crate) fn raw(p: &Predicate, state: &[f64]) -> f64 {
    if let (Some(center), Some(radius)) = (&p.region_center, p.region_radius) {
        return radius - euclidean(&p.region_point(state), center);
    }
    let v = p.expr.eval(state);
    match p.relation {
        Relation::InRange {
            range: Range::Closed { lower, upper },
        } => (v - lower).min(upper - v),
        Relation::InRange {
            range: Range::Above { lower },
        }
        | Relation::GreaterThan { bound: lower } => v - lower,
        Relation::InRange {
            range: Range::Below { upper },
        }
        | Relation::LessThan { bound: upper } => upper - v,
    }
}

/// Robustness of a propositional formula: `and` is min, `or` is max, `not`
/// negates.
pub fn robustness_bool(f: &Formula, state: &[f64]) -> Result<f64, EtltlError> {
    check_finite(state)?;
    eval(f, state)
}

fn eval(f: &Formula, state: &[f64]) -> Result<f64, EtltlError> {
    Ok(match f {
        Formula::True => f64::INFINITY,
        Formula::Pred(p) => raw(p, state),
        Formula::Not(a) => -eval(a, state)?,
        Formula::And(a, b) => eval(a, state)?.min(eval(b, state)?),
        Formula::Or(a, b) => eval(a, state)?.max(eval(b, state)?),
        temporal => return Err(EtltlError::TemporalNodePresent(temporal.to_sexpr())),
    })
}
