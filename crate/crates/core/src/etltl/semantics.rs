use super::robustness::raw;
use super::{EtltlError, Formula};

/// Brute-force finite-trace evaluation of `f` on `trace`, used as a test
/// oracle for the automata. `horizon` is the episode length; it is clipped
/// to the trace length.
///
/// Predicates hold when their robustness is strictly positive. `X` is the
/// strong next. `G_k` at position `i` covers `[i, horizon)`.
///
/// `a then b` (the shape `F(a ∧ X(F b))`) is read sequentially: `a` is
/// judged on the growing prefix of the remaining trace, and `b` on what is
/// left after the shortest prefix that satisfies `a`.
///
/// Formulas are also judged on empty segments, which arise when `a`
/// finishes exactly at the end of the trace: `G_k` over a pure state
/// condition holds vacuously, while anything that waits for an event
/// (`F`, `U`, `X`, or `G_k` over one of those) does not.
pub fn trace_satisfies(f: &Formula, trace: &[Vec<f64>], horizon: usize) -> Result<bool, EtltlError> {
    if trace.is_empty() {
        return Err(EtltlError::EmptyTrace);
    }
    for s in trace {
        super::robustness::check_finite(s)?;
    }
    let end = horizon.clamp(1, trace.len());
    Ok(Eval { trace }.at(f, 0, end))
}

struct Eval<'a> {
    trace: &'a [Vec<f64>],
}

impl Eval<'_> {
    /// Truth of `f` on the segment `[i, e)`.
    fn at(&self, f: &Formula, i: usize, e: usize) -> bool {
        if i >= e {
            return on_empty(f);
        }
        match f {
            Formula::True => true,
            Formula::Pred(p) => raw(p, &self.trace[i]) > 0.0,
            Formula::Not(a) => !self.at(a, i, e),
            Formula::And(a, b) => self.at(a, i, e) && self.at(b, i, e),
            Formula::Or(a, b) => self.at(a, i, e) || self.at(b, i, e),
            Formula::Next(a) => i + 1 < e && self.at(a, i + 1, e),
            Formula::Eventually(inner) => match f.as_sequence() {
                Some((a, b)) => self.sequence(a, b, i, e),
                None => (i..e).any(|j| self.at(inner, j, e)),
            },
            Formula::Until(hold, target) => {
                for j in i..e {
                    if self.at(target, j, e) {
                        return true;
                    }
                    if !self.at(hold, j, e) {
                        return false;
                    }
                }
                false
            }
            Formula::GloballyK(a) => (i..e).all(|j| self.at(a, j, e)),
        }
    }

    fn sequence(&self, a: &Formula, b: &Formula, i: usize, e: usize) -> bool {
        (i..=e)
            .find(|&m| self.at(a, i, m))
            .is_some_and(|m| self.at(b, m, e))
    }
}

fn on_empty(f: &Formula) -> bool {
    match f {
        Formula::True => true,
        Formula::Pred(_) | Formula::Next(_) | Formula::Until(..) => false,
        Formula::Not(a) => !on_empty(a),
        Formula::And(a, b) => on_empty(a) && on_empty(b),
        Formula::Or(a, b) => on_empty(a) || on_empty(b),
        Formula::Eventually(_) => match f.as_sequence() {
            Some((a, b)) => on_empty(a) && on_empty(b),
            None => false,
        },
        Formula::GloballyK(a) => a.is_propositional(),
    }
}
