use thiserror::Error;

use crate::etltl::{translate, Formula};
use crate::goal_lang::{parse_program, GoalError, GoalProgram, StateSchema};
use crate::sfspa::{build, Sfspa, SfspaError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Goal(#[from] GoalError),
    #[error(transparent)]
    Automaton(#[from] SfspaError),
}

impl CompileError {
    /// Message with a source excerpt when the error has a location.
    pub fn render(&self, source: &str) -> String {
        match self {
            CompileError::Goal(e) => e.render(source),
            CompileError::Automaton(e) => format!("error: {e}"),
        }
    }
}

/// Parsed program with its formula and automaton.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub program: GoalProgram,
    pub formula: Formula,
    pub automaton: Sfspa,
}

/// Parses, translates and builds the automaton for `text`.
pub fn compile(text: &str, schema: &StateSchema) -> Result<Compiled, CompileError> {
    let program = parse_program(text, schema)?;
    let formula = translate(&program);
    let automaton = build(&program)?;
    Ok(Compiled {
        program,
        formula,
        automaton,
    })
}
