//! Random goal programs and traces shared by the integration tests.
#![allow(dead_code)]

use goalforge::goal_lang::StateSchema;
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn xy_schema() -> StateSchema {
    StateSchema::from_toml(
        "[[field]]\nname = \"x\"\nmin = -4.0\nmax = 4.0\n\n[[field]]\nname = \"y\"\nmin = -4.0\nmax = 4.0\n",
    )
    .unwrap()
}

const OPS: [&str; 5] = ["reach", "drive", "avoid", "minimize", "maximize"];
const EXPRS: [&str; 6] = ["s.x", "s.y", "abs(s.x)", "norm(s.x, s.y)", "s.x - s.y", "x + 2 * y"];

fn range<R: Rng>(rng: &mut R, op: &str) -> String {
    let a: i32 = rng.random_range(-3..=2);
    let b: i32 = rng.random_range(a + 1..=3);
    let kinds: &[u8] = match op {
        "minimize" => &[0, 2],
        "maximize" => &[0, 1],
        _ => &[0, 1, 2],
    };
    match kinds.choose(rng).unwrap() {
        0 => format!("Goal.Range({a}, {b})"),
        1 => format!("Goal.RangeAbove({a})"),
        _ => format!("Goal.RangeBelow({b})"),
    }
}

pub fn random_atom<R: Rng>(rng: &mut R, name: &str) -> String {
    let op = *OPS.choose(rng).unwrap();
    let expr = *EXPRS.choose(rng).unwrap();
    format!("{op} {name}: {expr} in {}", range(rng, op))
}

/// Goal text with 1..=`max_atoms` atoms joined by the given combinators.
pub fn random_program<R: Rng>(rng: &mut R, max_atoms: usize, combinators: &[&str]) -> String {
    let n = rng.random_range(1..=max_atoms);
    let mut names = (0..n).map(|i| format!("G{i}"));
    build(rng, n, &mut names, combinators)
}

fn build<R: Rng>(
    rng: &mut R,
    n: usize,
    names: &mut impl Iterator<Item = String>,
    combinators: &[&str],
) -> String {
    if n == 1 {
        return random_atom(rng, &names.next().unwrap());
    }
    let left = rng.random_range(1..n);
    let a = build(rng, left, names, combinators);
    let b = build(rng, n - left, names, combinators);
    let op = combinators.choose(rng).unwrap();
    format!("({a}) {op} ({b})")
}

/// Trace of 1..=`max_len` states on the integer grid [-4, 4]^2, with an
/// occasional half step so boundaries are both hit and straddled.
pub fn random_trace<R: Rng>(rng: &mut R, max_len: usize) -> Vec<Vec<f64>> {
    let len = rng.random_range(1..=max_len);
    let mut s = [rng.random_range(-4..=4) as f64, rng.random_range(-4..=4) as f64];
    (0..len)
        .map(|_| {
            for v in &mut s {
                let step = [-1.0, -0.5, 0.0, 0.0, 0.5, 1.0].choose(rng).copied().unwrap();
                *v = (*v + step).clamp(-4.0, 4.0);
            }
            s.to_vec()
        })
        .collect()
}
