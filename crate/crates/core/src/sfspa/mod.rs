//! Semi-finite state predicate automata.
//!
//! Edges carry propositional guards over a table of atoms (one per goal).
//! Guards are kept as truth tables so products and sequencing stay exact;
//! every edge also carries a minimized expression used for robustness.
//!
//! Run semantics: at each step the unique edge whose guard holds is taken.
//! A run accepts as soon as it enters an accepting state with no outgoing
//! edges, or when it ends in an accepting state; it rejects on entering a
//! trap.

mod build;
mod guard;

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::etltl::{robustness::raw, Formula, Predicate};

pub use build::{always_accepting, build, build_template, build_until, chain_then, product, ProductMode};
pub use guard::{BoolExpr, Guard};

/// Largest atom table an automaton may use.
pub const MAX_ATOMS: usize = 12;

/// Version tag written into the JSON export.
pub const JSON_SCHEMA: &str = "goalforge.sfspa/1";

pub type StateId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfspaError {
    #[error("UnsupportedOperand: `until` needs single goals on both sides, found `{0}`")]
    UnsupportedOperand(String),
    #[error("TooManyAtoms: {count} goals exceed the limit of {MAX_ATOMS}")]
    TooManyAtoms { count: usize },
    #[error("AtomConflict: goal `{0}` is bound to two different predicates")]
    AtomConflict(String),
    #[error("PredicateOverlap: outgoing edges of state `{state}` are not mutually exclusive")]
    PredicateOverlap { state: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateInfo {
    pub label: String,
    pub accepting: bool,
    pub trap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: StateId,
    pub to: StateId,
    pub guard: Guard,
    pub expr: BoolExpr,
}

impl Edge {
    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }
}

/// Structural problem found by [`Sfspa::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingSelfLoop { state: StateId },
    TrapHasEdges { state: StateId },
    Overlap { state: StateId, valuation: usize },
    Incomplete { state: StateId, valuation: usize },
}

#[derive(Debug, Clone)]
pub struct Sfspa {
    atoms: Vec<Predicate>,
    states: Vec<StateInfo>,
    edges: Vec<Edge>,
    initial: StateId,
    out: Vec<Vec<usize>>,
}

impl Sfspa {
    /// Builds an automaton from raw parts. Edges with empty guards are
    /// dropped, parallel edges are merged, states unreachable from
    /// `initial` are pruned and the rest renumbered in breadth-first order.
    pub(crate) fn assemble(
        atoms: Vec<Predicate>,
        states: Vec<StateInfo>,
        raw_edges: Vec<(StateId, StateId, Guard)>,
        initial: StateId,
    ) -> Sfspa {
        let n = atoms.len();
        let mut merged: BTreeMap<(StateId, StateId), Guard> = BTreeMap::new();
        for (from, to, g) in raw_edges {
            if g.is_empty() {
                continue;
            }
            merged
                .entry((from, to))
                .and_modify(|e| *e = e.or(&g))
                .or_insert(g);
        }
        let mut renum = vec![usize::MAX; states.len()];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([initial]);
        renum[initial] = 0;
        order.push(initial);
        while let Some(q) = queue.pop_front() {
            for &(_, to) in merged.range((q, 0)..=(q, usize::MAX)).map(|(k, _)| k) {
                if renum[to] == usize::MAX {
                    renum[to] = order.len();
                    order.push(to);
                    queue.push_back(to);
                }
            }
        }
        let new_states: Vec<StateInfo> = order.iter().map(|&q| states[q].clone()).collect();
        let mut edges: Vec<Edge> = merged
            .into_iter()
            .filter(|((from, _), _)| renum[*from] != usize::MAX)
            .map(|((from, to), guard)| {
                debug_assert_eq!(guard.vars(), n);
                Edge {
                    from: renum[from],
                    to: renum[to],
                    expr: guard.to_expr(),
                    guard,
                }
            })
            .collect();
        edges.sort_by_key(|e| (e.from, e.to));
        let mut out = vec![Vec::new(); new_states.len()];
        for (i, e) in edges.iter().enumerate() {
            out[e.from].push(i);
        }
        Sfspa {
            atoms,
            states: new_states,
            edges,
            initial: 0,
            out,
        }
    }

    pub fn atoms(&self) -> &[Predicate] {
        &self.atoms
    }

    pub fn atom_names(&self) -> Vec<&str> {
        self.atoms.iter().map(|p| p.goal.as_str()).collect()
    }

    pub fn states(&self) -> &[StateInfo] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn out_edges(&self, q: StateId) -> impl Iterator<Item = (usize, &Edge)> {
        self.out[q].iter().map(|&i| (i, &self.edges[i]))
    }

    pub fn out_degree(&self, q: StateId) -> usize {
        self.out[q].len()
    }

    pub fn self_loop(&self, q: StateId) -> Option<&Edge> {
        self.out_edges(q).map(|(_, e)| e).find(|e| e.is_self_loop())
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.states[q].accepting
    }

    pub fn is_trap(&self, q: StateId) -> bool {
        self.states[q].trap
    }

    /// Accepting state with no outgoing edges: entering it ends the episode
    /// successfully.
    pub fn is_terminal_accept(&self, q: StateId) -> bool {
        self.states[q].accepting && self.out[q].is_empty()
    }

    pub fn accepting_states(&self) -> Vec<StateId> {
        (0..self.states.len()).filter(|&q| self.is_accepting(q)).collect()
    }

    pub fn trap_states(&self) -> Vec<StateId> {
        (0..self.states.len()).filter(|&q| self.is_trap(q)).collect()
    }

    /// Atom truth values at `state`, packed as a bit vector.
    pub fn valuation(&self, state: &[f64]) -> usize {
        self.atoms
            .iter()
            .enumerate()
            .fold(0, |acc, (i, p)| acc | (usize::from(raw(p, state) > 0.0) << i))
    }

    /// Edge taken from `q` under `valuation`, if any.
    pub fn next_edge(&self, q: StateId, valuation: usize) -> Option<(usize, &Edge)> {
        self.out_edges(q).find(|(_, e)| e.guard.contains(valuation))
    }

    /// Successor of `q`, staying put when no edge fires.
    pub fn successor(&self, q: StateId, valuation: usize) -> StateId {
        self.next_edge(q, valuation).map_or(q, |(_, e)| e.to)
    }

    /// Runs the automaton over `trace`.
    pub fn accepts(&self, trace: &[Vec<f64>]) -> bool {
        let mut q = self.initial;
        if self.is_terminal_accept(q) {
            return true;
        }
        for s in trace {
            q = self.successor(q, self.valuation(s));
            if self.is_trap(q) {
                return false;
            }
            if self.is_terminal_accept(q) {
                return true;
            }
        }
        self.is_accepting(q)
    }

    /// Edge predicate as an ETLTL formula.
    pub fn edge_formula(&self, edge: &Edge) -> Formula {
        fn conv(e: &BoolExpr, atoms: &[Predicate]) -> Formula {
            let fold = |xs: &[BoolExpr], f: fn(Formula, Formula) -> Formula| {
                let mut it = xs.iter().map(|x| conv(x, atoms));
                let first = it.next().unwrap_or(Formula::True);
                it.fold(first, f)
            };
            match e {
                BoolExpr::True => Formula::True,
                BoolExpr::False => Formula::not(Formula::True),
                BoolExpr::Lit { atom, positive } => {
                    let p = Formula::pred(atoms[*atom].clone());
                    if *positive {
                        p
                    } else {
                        Formula::not(p)
                    }
                }
                BoolExpr::And(xs) => fold(xs, Formula::and),
                BoolExpr::Or(xs) => fold(xs, Formula::or),
            }
        }
        conv(&edge.expr, &self.atoms)
    }

    /// Checks the structural rules: traps have no outgoing edges, every
    /// other state with edges has a self-loop, and the outgoing guards of
    /// each such state partition the valuation space.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut v = Vec::new();
        let n = self.atoms.len();
        for q in 0..self.states.len() {
            if self.is_trap(q) {
                if !self.out[q].is_empty() {
                    v.push(Violation::TrapHasEdges { state: q });
                }
                continue;
            }
            if self.is_terminal_accept(q) {
                continue;
            }
            if self.self_loop(q).is_none() {
                v.push(Violation::MissingSelfLoop { state: q });
            }
            for val in 0..(1usize << n) {
                match self.out_edges(q).filter(|(_, e)| e.guard.contains(val)).count() {
                    0 => v.push(Violation::Incomplete { state: q, valuation: val }),
                    1 => {}
                    _ => v.push(Violation::Overlap { state: q, valuation: val }),
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Graph isomorphism preserving initial state, state flags, atoms (by
    /// goal name) and edge guards. States are all reachable and outgoing
    /// guards are disjoint, so the mapping is forced by a walk from the
    /// initial states.
    pub fn is_isomorphic(&self, other: &Sfspa) -> bool {
        if self.states.len() != other.states.len()
            || self.edges.len() != other.edges.len()
            || self.atoms.len() != other.atoms.len()
        {
            return false;
        }
        let mut map = Vec::with_capacity(other.atoms.len());
        for p in &other.atoms {
            match self.atoms.iter().position(|a| a == p) {
                Some(i) => map.push(i),
                None => return false,
            }
        }
        let n = self.atoms.len();
        let mut f = vec![usize::MAX; other.states.len()];
        let mut queue = VecDeque::from([(other.initial, self.initial)]);
        f[other.initial] = self.initial;
        while let Some((qo, qs)) = queue.pop_front() {
            let (a, b) = (&other.states[qo], &self.states[qs]);
            if a.accepting != b.accepting || a.trap != b.trap || other.out[qo].len() != self.out[qs].len() {
                return false;
            }
            for (_, e) in other.out_edges(qo) {
                let g = e.guard.remap(&map, n);
                let Some((_, mine)) = self.out_edges(qs).find(|(_, m)| m.guard == g) else {
                    return false;
                };
                if e.is_self_loop() != mine.is_self_loop() {
                    return false;
                }
                if f[e.to] == usize::MAX {
                    f[e.to] = mine.to;
                    queue.push_back((e.to, mine.to));
                } else if f[e.to] != mine.to {
                    return false;
                }
            }
        }
        let mut image: Vec<_> = f.clone();
        image.sort_unstable();
        image.dedup();
        image.len() == f.len() && !f.contains(&usize::MAX)
    }

    /// Graphviz rendering: accepting states double-circled, traps filled.
    pub fn to_dot(&self) -> String {
        let names = self.atom_names();
        let mut s = String::from("digraph sfspa {\n  rankdir=LR;\n  __start [shape=point];\n");
        let _ = writeln!(s, "  __start -> s{};", self.initial);
        for (q, st) in self.states.iter().enumerate() {
            let shape = if st.accepting { "doublecircle" } else { "circle" };
            let fill = if st.trap {
                ", style=filled, fillcolor=gray70"
            } else {
                ""
            };
            let _ = writeln!(s, "  s{q} [label=\"{}\", shape={shape}{fill}];", escape(&st.label));
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  s{} -> s{} [label=\"{}\"];",
                e.from,
                e.to,
                escape(&e.expr.render(&names))
            );
        }
        s.push_str("}\n");
        s
    }

    /// Versioned JSON document with atoms, states and edges.
    pub fn to_json(&self) -> String {
        let names = self.atom_names();
        let doc = JsonDoc {
            schema: JSON_SCHEMA,
            initial: self.initial,
            atoms: self
                .atoms
                .iter()
                .map(|p| JsonAtom {
                    name: &p.goal,
                    text: p.expr.to_string(),
                    predicate: p,
                })
                .collect(),
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(id, st)| JsonState {
                    id,
                    label: &st.label,
                    accepting: st.accepting,
                    trap: st.trap,
                    terminal: self.is_terminal_accept(id),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| JsonEdge {
                    from: e.from,
                    to: e.to,
                    self_loop: e.is_self_loop(),
                    label: e.expr.render(&names),
                    predicate: &e.expr,
                    valuations: e.guard.minterms(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("automaton serializes")
    }

    /// SHA-256 of the JSON export, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    schema: &'static str,
    initial: StateId,
    atoms: Vec<JsonAtom<'a>>,
    states: Vec<JsonState<'a>>,
    edges: Vec<JsonEdge<'a>>,
}

#[derive(Serialize)]
struct JsonAtom<'a> {
    name: &'a str,
    text: String,
    predicate: &'a Predicate,
}

#[derive(Serialize)]
struct JsonState<'a> {
    id: StateId,
    label: &'a str,
    accepting: bool,
    trap: bool,
    terminal: bool,
}

#[derive(Serialize)]
struct JsonEdge<'a> {
    from: StateId,
    to: StateId,
    self_loop: bool,
    label: String,
    predicate: &'a BoolExpr,
    valuations: Vec<usize>,
}

/// Position of one episode's automaton: current state and the path taken.
#[derive(Debug, Clone, PartialEq)]
pub struct AutomatonRun {
    pub current: StateId,
    pub history: Vec<RunEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunEntry {
    pub step: usize,
    pub state: StateId,
    /// Index into [`Sfspa::edges`] of the edge that led here.
    pub edge: Option<usize>,
}

impl AutomatonRun {
    pub fn new(automaton: &Sfspa) -> AutomatonRun {
        AutomatonRun::at(automaton.initial(), 0)
    }

    /// Run positioned at `state` from step `step`, with no earlier history.
    pub fn at(state: StateId, step: usize) -> AutomatonRun {
        AutomatonRun {
            current: state,
            history: vec![RunEntry {
                step,
                state,
                edge: None,
            }],
        }
    }

    /// Advances on `valuation` and returns the edge taken.
    pub fn advance(&mut self, automaton: &Sfspa, valuation: usize) -> Option<usize> {
        let taken = automaton.next_edge(self.current, valuation).map(|(i, e)| (i, e.to));
        if let Some((_, to)) = taken {
            self.current = to;
        }
        let step = self.history.last().map_or(0, |h| h.step + 1);
        self.history.push(RunEntry {
            step,
            state: self.current,
            edge: taken.map(|(i, _)| i),
        });
        taken.map(|(i, _)| i)
    }
}
