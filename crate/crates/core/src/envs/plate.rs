use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clamp_action, Environment, Transition};
use crate::goal_lang::{FieldDecl, StateSchema};

#[derive(Debug, Clone, PartialEq)]
pub struct PlateParams {
    pub radius: f64,
    pub gravity: f64,
    /// Linear velocity damping, 1/s.
    pub friction: f64,
    pub max_tilt: f64,
    pub dt: f64,
    pub max_steps: usize,
    /// Largest initial speed per axis, m/s.
    pub initial_speed: f64,
}

impl Default for PlateParams {
    fn default() -> Self {
        PlateParams {
            radius: 0.1125,
            gravity: 9.81,
            friction: 6.0,
            max_tilt: 0.2,
            dt: 0.045,
            max_steps: 200,
            initial_speed: 0.02,
        }
    }
}

/// Point-mass ball on a tilting disc.
///
/// State `[x, y, vx, vy]` in metres and m/s; action `[pitch, roll]` in
/// radians. Acceleration is `g·tilt − friction·v` (small-angle model),
/// integrated with explicit Euler. Resets place the ball uniformly in the
/// inner 60% of the disc with a small random velocity. Leaving the disc
/// ends the episode.
#[derive(Debug, Clone)]
pub struct PlateEnv {
    pub params: PlateParams,
    s: [f64; 4],
    fell: bool,
}

impl Default for PlateEnv {
    fn default() -> Self {
        PlateEnv::new(PlateParams::default())
    }
}

impl PlateEnv {
    pub fn new(params: PlateParams) -> Self {
        PlateEnv {
            params,
            s: [0.0; 4],
            fell: false,
        }
    }

    pub fn fell_off(&self) -> bool {
        self.fell
    }

    pub fn set_state(&mut self, s: [f64; 4]) {
        self.s = s;
        self.fell = s[0].hypot(s[1]) > self.params.radius;
    }
}

impl Environment for PlateEnv {
    fn name(&self) -> &'static str {
        "plate"
    }

    fn schema(&self) -> StateSchema {
        let r = self.params.radius;
        let v = 1.0;
        let f = |name: &str, lim: f64| FieldDecl {
            name: name.into(),
            min: -lim,
            max: lim,
        };
        StateSchema::new(vec![f("x", r), f("y", r), f("vx", v), f("vy", v)]).expect("plate schema")
    }

    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-self.params.max_tilt, self.params.max_tilt); 2]
    }

    fn max_steps(&self) -> usize {
        self.params.max_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = 0.6 * self.params.radius * rng.random::<f64>().sqrt();
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let v = self.params.initial_speed;
        self.s = [
            r * theta.cos(),
            r * theta.sin(),
            rng.random_range(-v..=v),
            rng.random_range(-v..=v),
        ];
        self.fell = false;
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let a = clamp_action("plate", action, &self.action_bounds());
        let p = &self.params;
        let [x, y, vx, vy] = self.s;
        let ax = p.gravity * a[0] - p.friction * vx;
        let ay = p.gravity * a[1] - p.friction * vy;
        self.s = [x + p.dt * vx, y + p.dt * vy, vx + p.dt * ax, vy + p.dt * ay];
        if self.s[0].hypot(self.s[1]) > p.radius {
            self.fell = true;
        }
        Transition {
            state: self.state(),
            done: self.fell,
        }
    }

    fn state(&self) -> Vec<f64> {
        self.s.to_vec()
    }
}
