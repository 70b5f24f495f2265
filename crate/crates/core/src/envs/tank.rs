use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clamp_action, Environment, Transition};
use crate::goal_lang::{FieldDecl, StateSchema};

#[derive(Debug, Clone, PartialEq)]
pub struct TankParams {
    /// Level change per unit time at full inflow.
    pub inflow_capacity: f64,
    pub outflow_rate: f64,
    pub dt: f64,
    pub max_steps: usize,
}

impl Default for TankParams {
    fn default() -> Self {
        TankParams {
            inflow_capacity: 0.05,
            outflow_rate: 0.02,
            dt: 1.0,
            max_steps: 100,
        }
    }
}

/// Tank with a controllable inflow valve and a constant drain.
///
/// State `[level, setpoint]`, both as fractions of capacity; action is the
/// valve opening in `[0, 1]`. Resets draw the level from U[0.1, 0.9] and
/// the set point from U[0.05, 0.95].
#[derive(Debug, Clone)]
pub struct TankEnv {
    pub params: TankParams,
    level: f64,
    setpoint: f64,
    overflow: bool,
}

impl Default for TankEnv {
    fn default() -> Self {
        TankEnv::new(TankParams::default())
    }
}

impl TankEnv {
    pub fn new(params: TankParams) -> Self {
        TankEnv {
            params,
            level: 0.5,
            setpoint: 0.5,
            overflow: false,
        }
    }

    /// Set when the level has hit the top of the tank this episode.
    pub fn overflowed(&self) -> bool {
        self.overflow
    }

    pub fn set_state(&mut self, level: f64, setpoint: f64) {
        self.level = level;
        self.setpoint = setpoint;
        self.overflow = false;
    }
}

impl Environment for TankEnv {
    fn name(&self) -> &'static str {
        "tank"
    }

    fn schema(&self) -> StateSchema {
        StateSchema::new(vec![
            FieldDecl {
                name: "level".into(),
                min: 0.0,
                max: 1.0,
            },
            FieldDecl {
                name: "setpoint".into(),
                min: 0.05,
                max: 0.95,
            },
        ])
        .expect("tank schema")
    }

    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0)]
    }

    fn max_steps(&self) -> usize {
        self.params.max_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.level = rng.random_range(0.1..=0.9);
        self.setpoint = rng.random_range(0.05..=0.95);
        self.overflow = false;
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let u = clamp_action("tank", action, &self.action_bounds())[0];
        let p = &self.params;
        let next = self.level + p.dt * (p.inflow_capacity * u - p.outflow_rate);
        if next >= 1.0 {
            self.overflow = true;
        }
        self.level = next.clamp(0.0, 1.0);
        Transition {
            state: self.state(),
            done: false,
        }
    }

    fn state(&self) -> Vec<f64> {
        vec![self.level, self.setpoint]
    }
}
