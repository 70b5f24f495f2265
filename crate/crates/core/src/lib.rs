//! Compiles goal specifications (`reach`, `drive`, `avoid`, `minimize`,
//! `maximize` combined with `and`/`or`/`then`/`until`) into ETLTL formulas
//! and semi-finite state predicate automata, and turns those automata into a
//! dense, Markovian step reward for reinforcement learning.
//!
//! Pipeline: [`goal_lang`] parses text into a [`goal_lang::GoalProgram`],
//! [`etltl::translate`] produces the temporal formula, [`sfspa::build`]
//! produces the automaton, and [`reward::RewardEngine`] steps it alongside an
//! environment. [`assessment`] scores finished episodes and [`trainer`]
//! closes the loop with a cross-entropy-method policy search over the
//! bundled [`envs`].

pub mod assessment;
pub mod envs;
pub mod etltl;
pub mod goal_lang;
pub mod reward;
pub mod sfspa;
pub mod trainer;

mod compile;

pub use compile::{compile, Compiled, CompileError};
