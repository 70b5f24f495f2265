use std::collections::{BTreeMap, VecDeque};

use super::{Guard, Sfspa, SfspaError, StateId, StateInfo, MAX_ATOMS};
use crate::etltl::Predicate;
use crate::goal_lang::{GoalAtom, GoalExpr, GoalOp, GoalProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductMode {
    And,
    Or,
}

fn state(label: &str, accepting: bool, trap: bool) -> StateInfo {
    StateInfo {
        label: label.to_string(),
        accepting,
        trap,
    }
}

/// Single accepting state with no edges; the identity of `And` products.
pub fn always_accepting() -> Sfspa {
    Sfspa::assemble(Vec::new(), vec![state("done", true, false)], Vec::new(), 0)
}

/// Automaton for a single goal.
///
/// * reach: `q0 --p--> qF`, `qF` accepting with no outgoing edges.
/// * drive, minimize, maximize: `q0 <--> qF` with self-loops `¬p` and `p`.
/// * avoid: `q0` accepting with self-loop `¬p`, `q0 --p--> Tr`.
pub fn build_template(atom: &GoalAtom) -> Sfspa {
    let p = Guard::literal(1, 0, true);
    let np = p.not();
    let atoms = vec![Predicate::from_atom(atom)];
    match atom.op {
        GoalOp::Reach => Sfspa::assemble(
            atoms,
            vec![state("q0", false, false), state("qF", true, false)],
            vec![(0, 0, np), (0, 1, p)],
            0,
        ),
        GoalOp::Drive | GoalOp::Minimize | GoalOp::Maximize => Sfspa::assemble(
            atoms,
            vec![state("q0", false, false), state("qF", true, false)],
            vec![(0, 0, np.clone()), (0, 1, p.clone()), (1, 1, p), (1, 0, np)],
            0,
        ),
        GoalOp::Avoid => Sfspa::assemble(
            atoms,
            vec![state("q0", true, false), state("Tr", false, true)],
            vec![(0, 0, np), (0, 1, p)],
            0,
        ),
    }
}

/// `hold until target` over two single goals. Each side contributes its
/// state condition: `¬p` for avoid goals, `p` otherwise.
pub fn build_until(hold: &GoalExpr, target: &GoalExpr) -> Result<Sfspa, SfspaError> {
    let (GoalExpr::Atom(h), GoalExpr::Atom(t)) = (hold, target) else {
        let bad = if matches!(hold, GoalExpr::Atom(_)) { target } else { hold };
        return Err(SfspaError::UnsupportedOperand(bad.to_string()));
    };
    let (atoms, _, mt) = merge_atoms(&[Predicate::from_atom(h)], &[Predicate::from_atom(t)])?;
    let n = atoms.len();
    let hold = Guard::literal(n, 0, h.op != GoalOp::Avoid);
    let target = Guard::literal(n, mt[0], t.op != GoalOp::Avoid);
    let rest = target.not();
    Ok(Sfspa::assemble(
        atoms,
        vec![state("q0", false, false), state("qF", true, false), state("Tr", false, true)],
        vec![
            (0, 0, hold.and(&rest)),
            (0, 1, target),
            (0, 2, hold.not().and(&rest)),
        ],
        0,
    ))
}

/// Unions two atom tables by goal name. Returns the table and the new
/// index of every atom of each input.
fn merge_atoms(
    a: &[Predicate],
    b: &[Predicate],
) -> Result<(Vec<Predicate>, Vec<usize>, Vec<usize>), SfspaError> {
    let mut table = a.to_vec();
    let mut map_b = Vec::with_capacity(b.len());
    for p in b {
        match table.iter().position(|q| q.goal == p.goal) {
            Some(i) if table[i] == *p => map_b.push(i),
            Some(_) => return Err(SfspaError::AtomConflict(p.goal.clone())),
            None => {
                map_b.push(table.len());
                table.push(p.clone());
            }
        }
    }
    if table.len() > MAX_ATOMS {
        return Err(SfspaError::TooManyAtoms { count: table.len() });
    }
    Ok((table, (0..a.len()).collect(), map_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Live,
    Done,
    Trap,
}

fn class(m: &Sfspa, q: StateId) -> Class {
    if m.is_trap(q) || (m.out_degree(q) == 0 && !m.is_accepting(q)) {
        Class::Trap
    } else if m.is_terminal_accept(q) {
        Class::Done
    } else {
        Class::Live
    }
}

/// Outgoing transitions of every state over the merged table. Sinks get a
/// single always-true self-loop so products can step through them.
fn moves(m: &Sfspa, map: &[usize], n: usize) -> Vec<Vec<(StateId, Guard)>> {
    (0..m.num_states())
        .map(|q| {
            if class(m, q) == Class::Live {
                m.out_edges(q).map(|(_, e)| (e.to, e.guard.remap(map, n))).collect()
            } else {
                vec![(q, Guard::full(n))]
            }
        })
        .collect()
}

/// Synchronous product. With `And` a pair is a trap once either side is,
/// and finished once both are; with `Or` it is finished once either side
/// is, and a trap once both are. Sinks of each kind are merged into one
/// state.
pub fn product(a: &Sfspa, b: &Sfspa, mode: ProductMode) -> Result<Sfspa, SfspaError> {
    let (atoms, ma, mb) = merge_atoms(a.atoms(), b.atoms())?;
    let n = atoms.len();
    let (move_a, move_b) = (moves(a, &ma, n), moves(b, &mb, n));

    let pair_class = |x: StateId, y: StateId| {
        let (cx, cy) = (class(a, x), class(b, y));
        match mode {
            ProductMode::And if cx == Class::Trap || cy == Class::Trap => Class::Trap,
            ProductMode::And if cx == Class::Done && cy == Class::Done => Class::Done,
            ProductMode::Or if cx == Class::Done || cy == Class::Done => Class::Done,
            ProductMode::Or if cx == Class::Trap && cy == Class::Trap => Class::Trap,
            _ => Class::Live,
        }
    };

    let mut states = Vec::new();
    let mut ids: BTreeMap<(StateId, StateId), StateId> = BTreeMap::new();
    let mut sinks: [Option<StateId>; 2] = [None, None];
    let mut queue = VecDeque::new();
    let mut edges = Vec::new();

    let mut intern = |x: StateId,
                      y: StateId,
                      states: &mut Vec<StateInfo>,
                      queue: &mut VecDeque<(StateId, StateId, StateId)>| {
        let sink = match pair_class(x, y) {
            Class::Done => Some(0),
            Class::Trap => Some(1),
            Class::Live => None,
        };
        if let Some(k) = sink {
            return *sinks[k].get_or_insert_with(|| {
                states.push(if k == 0 { state("done", true, false) } else { state("Tr", false, true) });
                states.len() - 1
            });
        }
        *ids.entry((x, y)).or_insert_with(|| {
            let accepting = match mode {
                ProductMode::And => a.is_accepting(x) && b.is_accepting(y),
                ProductMode::Or => a.is_accepting(x) || b.is_accepting(y),
            };
            let label = format!("({},{})", a.states()[x].label, b.states()[y].label);
            states.push(state(&label, accepting, false));
            let id = states.len() - 1;
            queue.push_back((x, y, id));
            id
        })
    };

    let initial = intern(a.initial(), b.initial(), &mut states, &mut queue);
    while let Some((x, y, id)) = queue.pop_front() {
        for (tx, gx) in &move_a[x] {
            for (ty, gy) in &move_b[y] {
                let g = gx.and(gy);
                if !g.is_empty() {
                    let to = intern(*tx, *ty, &mut states, &mut queue);
                    edges.push((id, to, g));
                }
            }
        }
    }
    Ok(Sfspa::assemble(atoms, states, edges, initial))
}

/// Sequencing: run `a` until it first accepts, then hand the following
/// steps to `b`. If `a` accepts before any step the result behaves as `b`.
pub fn chain_then(a: &Sfspa, b: &Sfspa) -> Result<Sfspa, SfspaError> {
    let (atoms, ma, mb) = merge_atoms(a.atoms(), b.atoms())?;
    let n = atoms.len();
    let mut states = Vec::new();
    let mut edges = Vec::new();
    states.push(state("Tr", false, true));
    let trap = 0;

    let b_ids: Vec<StateId> = (0..b.num_states())
        .map(|q| {
            if class(b, q) == Class::Trap {
                trap
            } else {
                let s = &b.states()[q];
                states.push(state(&format!("2:{}", s.label), s.accepting, false));
                states.len() - 1
            }
        })
        .collect();
    for e in b.edges() {
        edges.push((b_ids[e.from], b_ids[e.to], e.guard.remap(&mb, n)));
    }

    if a.is_accepting(a.initial()) {
        return Ok(Sfspa::assemble(atoms, states, edges, b_ids[b.initial()]));
    }

    let a_ids: Vec<Option<StateId>> = (0..a.num_states())
        .map(|q| match class(a, q) {
            Class::Trap => Some(trap),
            _ if a.is_accepting(q) => None,
            _ => {
                states.push(state(&format!("1:{}", a.states()[q].label), false, false));
                Some(states.len() - 1)
            }
        })
        .collect();
    for e in a.edges() {
        let Some(from) = a_ids[e.from] else { continue };
        if from == trap {
            continue;
        }
        let to = a_ids[e.to].unwrap_or(b_ids[b.initial()]);
        edges.push((from, to, e.guard.remap(&ma, n)));
    }
    let initial = a_ids[a.initial()].expect("non-accepting initial state");
    Ok(Sfspa::assemble(atoms, states, edges, initial))
}

/// Automaton for a whole goal program: one template per goal, combined
/// bottom-up with products (`and`, `or`), sequencing (`then`) and the
/// `until` template.
pub fn build(program: &GoalProgram) -> Result<Sfspa, SfspaError> {
    let count = program.atoms().len();
    if count > MAX_ATOMS {
        return Err(SfspaError::TooManyAtoms { count });
    }
    build_expr(&program.root)
}

fn build_expr(e: &GoalExpr) -> Result<Sfspa, SfspaError> {
    match e {
        GoalExpr::Atom(a) => Ok(build_template(a)),
        GoalExpr::And(a, b) => product(&build_expr(a)?, &build_expr(b)?, ProductMode::And),
        GoalExpr::Or(a, b) => product(&build_expr(a)?, &build_expr(b)?, ProductMode::Or),
        GoalExpr::Then(a, b) => chain_then(&build_expr(a)?, &build_expr(b)?),
        GoalExpr::Until(hold, target) => build_until(hold, target),
    }
}
