//! Seedable desk-scale environments: a tank to fill to a set point and a
//! ball balanced on a tilting plate.

mod plate;
mod tank;

use std::fmt;
use std::str::FromStr;

use crate::goal_lang::StateSchema;

pub use plate::{PlateEnv, PlateParams};
pub use tank::{TankEnv, TankParams};

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// The environment cannot continue (e.g. the ball left the plate).
    pub done: bool,
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;
    /// Field names and value ranges of the state vector.
    fn schema(&self) -> StateSchema;
    /// Per-dimension action range; out-of-range actions are clamped.
    fn action_bounds(&self) -> Vec<(f64, f64)>;
    fn max_steps(&self) -> usize;
    /// Draws a new initial condition; identical seeds give identical states.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Transition;
    fn state(&self) -> Vec<f64>;
}

/// Clamps `action` into `bounds`, warning when it had to.
pub(crate) fn clamp_action(env: &str, action: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    action
        .iter()
        .zip(bounds)
        .map(|(&a, &(lo, hi))| {
            let c = if a.is_nan() { 0.5 * (lo + hi) } else { a.clamp(lo, hi) };
            if c != a {
                log::warn!("{env}: action {a} outside [{lo}, {hi}], clamped to {c}");
            }
            c
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Tank,
    Plate,
}

impl EnvKind {
    pub const ALL: [EnvKind; 2] = [EnvKind::Tank, EnvKind::Plate];

    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::Tank => Box::new(TankEnv::default()),
            EnvKind::Plate => Box::new(PlateEnv::default()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Tank => "tank",
            EnvKind::Plate => "plate",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown environment `{s}` (expected tank or plate)"))
    }
}
