use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Set of atom valuations on which an edge fires, stored as a truth table.
///
/// A valuation is a bit vector whose bit `i` is set when atom `i` holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Guard {
    vars: usize,
    bits: Vec<u64>,
}

fn words(vars: usize) -> usize {
    ((1usize << vars) + 63) / 64
}

impl Guard {
    pub fn empty(vars: usize) -> Guard {
        Guard {
            vars,
            bits: vec![0; words(vars)],
        }
    }

    pub fn full(vars: usize) -> Guard {
        Guard::empty(vars).not()
    }

    /// Valuations where atom `atom` has truth value `positive`.
    pub fn literal(vars: usize, atom: usize, positive: bool) -> Guard {
        Guard::from_fn(vars, |v| ((v >> atom) & 1 == 1) == positive)
    }

    pub fn from_fn(vars: usize, f: impl Fn(usize) -> bool) -> Guard {
        let mut g = Guard::empty(vars);
        for v in 0..(1usize << vars) {
            if f(v) {
                g.bits[v / 64] |= 1 << (v % 64);
            }
        }
        g
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn contains(&self, valuation: usize) -> bool {
        valuation < (1 << self.vars) && (self.bits[valuation / 64] >> (valuation % 64)) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.not().is_empty()
    }

    pub fn and(&self, other: &Guard) -> Guard {
        self.zip(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Guard) -> Guard {
        self.zip(other, |a, b| a | b)
    }

    pub fn not(&self) -> Guard {
        let mut g = Guard {
            vars: self.vars,
            bits: self.bits.iter().map(|w| !w).collect(),
        };
        let n = 1usize << self.vars;
        if n % 64 != 0 {
            let last = g.bits.len() - 1;
            g.bits[last] &= (1u64 << (n % 64)) - 1;
        }
        g
    }

    fn zip(&self, other: &Guard, f: impl Fn(u64, u64) -> u64) -> Guard {
        assert_eq!(self.vars, other.vars, "guards over different atom tables");
        Guard {
            vars: self.vars,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn minterms(&self) -> Vec<usize> {
        (0..(1usize << self.vars)).filter(|&v| self.contains(v)).collect()
    }

    /// Re-expresses the guard over a table of `vars` atoms, where old atom
    /// `i` becomes atom `map[i]`.
    pub fn remap(&self, map: &[usize], vars: usize) -> Guard {
        Guard::from_fn(vars, |v| {
            let old = map
                .iter()
                .enumerate()
                .fold(0, |acc, (i, &j)| acc | (((v >> j) & 1) << i));
            self.contains(old)
        })
    }

    /// Minimal sum-of-products form.
    pub fn to_expr(&self) -> BoolExpr {
        if self.is_empty() {
            return BoolExpr::False;
        }
        if self.is_full() {
            return BoolExpr::True;
        }
        let cover = minimize(&self.minterms());
        let mut terms: Vec<BoolExpr> = cover
            .into_iter()
            .map(|(value, mask)| {
                let lits: Vec<BoolExpr> = (0..self.vars)
                    .filter(|i| mask >> i & 1 == 0)
                    .map(|i| BoolExpr::Lit {
                        atom: i,
                        positive: value >> i & 1 == 1,
                    })
                    .collect();
                if lits.len() == 1 {
                    lits.into_iter().next().unwrap()
                } else {
                    BoolExpr::And(lits)
                }
            })
            .collect();
        if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            BoolExpr::Or(terms)
        }
    }
}

/// Quine-McCluskey prime implicants followed by an essential-first greedy
/// cover. Implicants are `(value, mask)` with `mask` marking free variables.
fn minimize(minterms: &[usize]) -> Vec<(usize, usize)> {
    let mut current: BTreeSet<(usize, usize)> = minterms.iter().map(|&m| (m, 0)).collect();
    let mut primes: BTreeSet<(usize, usize)> = BTreeSet::new();
    while !current.is_empty() {
        let mut next = BTreeSet::new();
        let mut used = BTreeSet::new();
        let items: Vec<_> = current.iter().copied().collect();
        for (i, &(va, ma)) in items.iter().enumerate() {
            for &(vb, mb) in &items[i + 1..] {
                let diff = va ^ vb;
                if ma == mb && diff.count_ones() == 1 {
                    next.insert((va & !diff, ma | diff));
                    used.insert((va, ma));
                    used.insert((vb, mb));
                }
            }
        }
        primes.extend(current.difference(&used).copied());
        current = next;
    }
    let covers = |(v, m): (usize, usize), t: usize| t & !m == v & !m;
    let mut uncovered: BTreeSet<usize> = minterms.iter().copied().collect();
    let mut chosen = Vec::new();
    for &t in minterms {
        let hits: Vec<_> = primes.iter().filter(|&&p| covers(p, t)).collect();
        if hits.len() == 1 && !chosen.contains(hits[0]) {
            chosen.push(*hits[0]);
        }
    }
    for &p in &chosen {
        uncovered.retain(|&t| !covers(p, t));
    }
    while !uncovered.is_empty() {
        // most newly covered first, then fewest literals
        let best = primes
            .iter()
            .copied()
            .filter(|p| !chosen.contains(p))
            .max_by_key(|&p| {
                let gain = uncovered.iter().filter(|&&t| covers(p, t)).count();
                (gain, p.1.count_ones(), std::cmp::Reverse(p))
            })
            .expect("primes cover every minterm");
        uncovered.retain(|&t| !covers(best, t));
        chosen.push(best);
    }
    chosen.sort_by_key(|&(v, m)| (std::cmp::Reverse(m.count_ones()), v, m));
    chosen
}

/// Propositional edge predicate over the automaton's atom table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoolExpr {
    True,
    False,
    Lit { atom: usize, positive: bool },
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn eval(&self, valuation: usize) -> bool {
        match self {
            BoolExpr::True => true,
            BoolExpr::False => false,
            BoolExpr::Lit { atom, positive } => ((valuation >> atom) & 1 == 1) == *positive,
            BoolExpr::And(xs) => xs.iter().all(|x| x.eval(valuation)),
            BoolExpr::Or(xs) => xs.iter().any(|x| x.eval(valuation)),
        }
    }

    /// Robustness given per-atom robustness values: min over `and`, max over
    /// `or`, negation on negative literals.
    pub fn robustness(&self, atoms: &[f64]) -> f64 {
        match self {
            BoolExpr::True => f64::INFINITY,
            BoolExpr::False => f64::NEG_INFINITY,
            BoolExpr::Lit { atom, positive } => {
                if *positive {
                    atoms[*atom]
                } else {
                    -atoms[*atom]
                }
            }
            BoolExpr::And(xs) => xs.iter().map(|x| x.robustness(atoms)).fold(f64::INFINITY, f64::min),
            BoolExpr::Or(xs) => xs
                .iter()
                .map(|x| x.robustness(atoms))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Atom indices mentioned by the expression.
    pub fn atoms(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<usize>) {
        match self {
            BoolExpr::Lit { atom, .. } => {
                out.insert(*atom);
            }
            BoolExpr::And(xs) | BoolExpr::Or(xs) => xs.iter().for_each(|x| x.collect(out)),
            _ => {}
        }
    }

    /// Infix rendering with atom names.
    pub fn render(&self, names: &[&str]) -> String {
        let mut s = String::new();
        self.render_into(names, &mut s, false);
        s
    }

    fn render_into(&self, names: &[&str], s: &mut String, nested: bool) {
        match self {
            BoolExpr::True => s.push_str("true"),
            BoolExpr::False => s.push_str("false"),
            BoolExpr::Lit { atom, positive } => {
                let _ = write!(s, "{}{}", if *positive { "" } else { "!" }, names[*atom]);
            }
            BoolExpr::And(xs) | BoolExpr::Or(xs) => {
                let op = if matches!(self, BoolExpr::And(_)) { " & " } else { " | " };
                let wrap = nested && matches!(self, BoolExpr::Or(_));
                if wrap {
                    s.push('(');
                }
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        s.push_str(op);
                    }
                    x.render_into(names, s, true);
                }
                if wrap {
                    s.push(')');
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_and_set_ops() {
        let p = Guard::literal(2, 0, true);
        let q = Guard::literal(2, 1, false);
        assert_eq!(p.minterms(), vec![1, 3]);
        assert_eq!(q.minterms(), vec![0, 1]);
        assert_eq!(p.and(&q).minterms(), vec![1]);
        assert!(p.or(&p.not()).is_full());
        assert!(Guard::full(0).contains(0));
    }

    #[test]
    fn minimization() {
        let p = Guard::literal(3, 0, true);
        assert_eq!(p.to_expr(), BoolExpr::Lit { atom: 0, positive: true });
        let or = Guard::literal(2, 0, true).or(&Guard::literal(2, 1, true));
        assert_eq!(or.to_expr().render(&["a", "b"]), "a | b");
        let and = Guard::literal(2, 0, false).and(&Guard::literal(2, 1, false));
        assert_eq!(and.to_expr().render(&["a", "b"]), "!a & !b");
        assert_eq!(Guard::empty(2).to_expr(), BoolExpr::False);
    }

    #[test]
    fn minimized_expression_matches_table() {
        for seed in 0u64..200 {
            let vars = (seed % 5) as usize;
            let g = Guard::from_fn(vars, |v| (seed.wrapping_mul(6364136223846793005) >> (v % 60)) & 1 == 1);
            let e = g.to_expr();
            for v in 0..(1 << vars) {
                assert_eq!(e.eval(v), g.contains(v), "seed {seed} valuation {v}");
            }
        }
    }

    #[test]
    fn remap_moves_variables() {
        let p = Guard::literal(1, 0, true);
        let r = p.remap(&[2], 3);
        assert_eq!(r, Guard::literal(3, 2, true));
    }

    #[test]
    fn large_tables() {
        let g = Guard::literal(8, 7, true).and(&Guard::literal(8, 0, false));
        assert_eq!(g.to_expr().render(&["a", "b", "c", "d", "e", "f", "g", "h"]), "!a & h");
        assert_eq!(g.minterms().len(), 64);
    }
}
