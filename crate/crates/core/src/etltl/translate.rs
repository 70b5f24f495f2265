use super::{Formula, Predicate};
use crate::goal_lang::{GoalExpr, GoalOp, GoalProgram};

/// Translates a goal program into its ETLTL formula.
///
/// | goal            | formula              |
/// |-----------------|----------------------|
/// | reach p         | `F p`                |
/// | drive p         | `G_k (F p)`          |
/// | avoid p         | `G_k (¬p)`           |
/// | minimize x < c  | `G_k (F (x < c))`    |
/// | maximize x > c  | `G_k (F (x > c))`    |
/// | A and B         | `A ∧ B`              |
/// | A or B          | `A ∨ B`              |
/// | A then B        | `F (A ∧ X (F B))`    |
/// | B until A       | `B U A`              |
pub fn translate(program: &GoalProgram) -> Formula {
    expr(&program.root)
}

fn expr(e: &GoalExpr) -> Formula {
    match e {
        GoalExpr::Atom(atom) => {
            let p = Formula::pred(Predicate::from_atom(atom));
            match atom.op {
                GoalOp::Reach => Formula::eventually(p),
                GoalOp::Drive | GoalOp::Minimize | GoalOp::Maximize => {
                    Formula::globally(Formula::eventually(p))
                }
                GoalOp::Avoid => Formula::globally(Formula::not(p)),
            }
        }
        GoalExpr::And(a, b) => Formula::and(expr(a), expr(b)),
        GoalExpr::Or(a, b) => Formula::or(expr(a), expr(b)),
        GoalExpr::Then(a, b) => Formula::eventually(Formula::and(
            expr(a),
            Formula::next(Formula::eventually(expr(b))),
        )),
        GoalExpr::Until(hold, target) => Formula::until(condition(hold), condition(target)),
    }
}

/// Until relates state conditions: each operand contributes the literal its
/// goal is about (`¬p` for avoid, `p` otherwise). Composite operands are
/// rejected when the automaton is built; here they translate structurally.
fn condition(e: &GoalExpr) -> Formula {
    match e {
        GoalExpr::Atom(atom) => {
            let p = Formula::pred(Predicate::from_atom(atom));
            if atom.op == GoalOp::Avoid {
                Formula::not(p)
            } else {
                p
            }
        }
        other => expr(other),
    }
}
