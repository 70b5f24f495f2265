//! Step reward generation from an automaton and the environment state.
//!
//! Each step the engine evaluates the edges leaving the current automaton
//! state at the new environment state. Atom robustness is divided by the
//! scale of the atom's test expression, the edge robustness is composed by
//! min/max/negation, multiplied by the boost factor when positive, and
//! clamped to `±max_robustness`. Which edge supplies the reward:
//!
//! * in an accepting state with a self-loop: the self-loop,
//! * otherwise, if the step left the state: the edge taken,
//! * otherwise: the best edge leaving the state (excluding the self-loop
//!   and edges into traps).
//!
//! Entering a trap or an accepting state without outgoing edges ends the
//! episode with an extra `∓max_robustness · (T − t)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::Environment;
use crate::etltl::{robustness::raw, EtltlError, Predicate};
use crate::goal_lang::StateSchema;
use crate::sfspa::{AutomatonRun, BoolExpr, Sfspa, StateId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("MissingScale: no scale for field `{0}`")]
    MissingScale(String),
    #[error("DegenerateRange: field `{0}` has zero width; declare its bounds")]
    DegenerateRange(String),
    #[error("SteppedAfterTermination: episode already ended ({0:?})")]
    SteppedAfterTermination(Termination),
    #[error(transparent)]
    State(#[from] EtltlError),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

/// Value range per state field, keyed by field name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleTable(pub BTreeMap<String, (f64, f64)>);

impl ScaleTable {
    pub fn from_schema(schema: &StateSchema) -> ScaleTable {
        ScaleTable(
            schema
                .fields
                .iter()
                .map(|f| (f.name.clone(), (f.min, f.max)))
                .collect(),
        )
    }

    pub fn bounds(&self, field: &str) -> Option<(f64, f64)> {
        self.0.get(field).copied()
    }

    /// Width of the range of `p`'s test expression, by interval arithmetic
    /// over the field ranges.
    pub fn predicate_scale(&self, p: &Predicate) -> Result<f64, RewardError> {
        let (lo, hi) = p
            .expr
            .interval(&|_, name: &str| self.bounds(name))
            .map_err(RewardError::MissingScale)?;
        let scale = hi - lo;
        if scale > 0.0 && scale.is_finite() {
            Ok(scale)
        } else {
            Err(RewardError::DegenerateRange(p.goal.clone()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningConfig {
    pub max_robustness: f64,
    pub boost_factor: f64,
    pub scales: ScaleTable,
    pub max_episode_steps: usize,
}

impl ConditioningConfig {
    /// Defaults: `max_robustness = 2`, `boost_factor = 2`.
    pub fn new(scales: ScaleTable, max_episode_steps: usize) -> ConditioningConfig {
        ConditioningConfig {
            max_robustness: 2.0,
            boost_factor: 2.0,
            scales,
            max_episode_steps,
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.max_robustness > 0.0 && self.max_robustness.is_finite()) {
            return Err(RewardError::InvalidConfig("max_robustness must be > 0".into()));
        }
        if !(self.boost_factor >= 1.0 && self.boost_factor.is_finite()) {
            return Err(RewardError::InvalidConfig("boost_factor must be >= 1".into()));
        }
        if self.max_episode_steps == 0 {
            return Err(RewardError::InvalidConfig("max_episode_steps must be >= 1".into()));
        }
        for (name, (lo, hi)) in &self.scales.0 {
            if !(hi - lo > 0.0) {
                return Err(RewardError::DegenerateRange(name.clone()));
            }
        }
        Ok(())
    }

    /// Boost positive values, then clamp to `±max_robustness`.
    pub fn condition(&self, scaled: f64) -> f64 {
        let boosted = if scaled > 0.0 { scaled * self.boost_factor } else { scaled };
        boosted.clamp(-self.max_robustness, self.max_robustness)
    }
}

/// Scaled, boosted and clamped robustness of a single predicate.
pub fn scaled_robustness(p: &Predicate, state: &[f64], cfg: &ConditioningConfig) -> Result<f64, RewardError> {
    let rho = crate::etltl::robustness_pred(p, state)?;
    Ok(cfg.condition(rho / cfg.scales.predicate_scale(p)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    AcceptTerminal,
    Trap,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepEvent {
    SelfLoop,
    Transition { edge: usize, from: StateId, to: StateId },
    TerminalAccept,
    TerminalTrap,
    TimeLimit,
}

impl StepEvent {
    pub fn termination(&self) -> Option<Termination> {
        match self {
            StepEvent::TerminalAccept => Some(Termination::AcceptTerminal),
            StepEvent::TerminalTrap => Some(Termination::Trap),
            StepEvent::TimeLimit => Some(Termination::TimeLimit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Step reward plus any terminal bonus.
    pub reward: f64,
    /// Conditioned edge robustness alone.
    pub step_reward: f64,
    pub terminal_bonus: f64,
    pub automaton_state: StateId,
    pub event: StepEvent,
    /// Step index this result belongs to.
    pub t: usize,
    /// Raw robustness of every atom, in automaton atom order.
    pub atom_robustness: Vec<f64>,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.event.termination().is_some()
    }
}

/// Per-episode reward stepper.
#[derive(Debug, Clone)]
pub struct RewardEngine {
    automaton: Arc<Sfspa>,
    config: Arc<ConditioningConfig>,
    atom_scales: Vec<f64>,
    run: AutomatonRun,
    t: usize,
    terminated: Option<Termination>,
}

impl RewardEngine {
    pub fn new(automaton: Arc<Sfspa>, config: Arc<ConditioningConfig>) -> Result<RewardEngine, RewardError> {
        config.validate()?;
        let atom_scales = automaton
            .atoms()
            .iter()
            .map(|p| config.scales.predicate_scale(p))
            .collect::<Result<_, _>>()?;
        let run = AutomatonRun::new(&automaton);
        Ok(RewardEngine {
            automaton,
            config,
            atom_scales,
            run,
            t: 0,
            terminated: None,
        })
    }

    pub fn automaton(&self) -> &Sfspa {
        &self.automaton
    }

    pub fn config(&self) -> &ConditioningConfig {
        &self.config
    }

    pub fn state(&self) -> StateId {
        self.run.current
    }

    pub fn run(&self) -> &AutomatonRun {
        &self.run
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn terminated(&self) -> Option<Termination> {
        self.terminated
    }

    pub fn reset(&mut self) {
        self.resume_at(self.automaton.initial(), 0);
    }

    /// Places the engine in automaton state `state` at step `t`, as if the
    /// episode had arrived there.
    pub fn resume_at(&mut self, state: StateId, t: usize) {
        self.run = AutomatonRun::at(state, t);
        self.t = t;
        self.terminated = None;
    }

    /// Conditioned robustness of an edge expression given scaled atoms.
    fn edge_reward(&self, expr: &BoolExpr, scaled: &[f64]) -> f64 {
        self.config.condition(expr.robustness(scaled))
    }

    pub fn step(&mut self, s_next: &[f64]) -> Result<StepResult, RewardError> {
        if let Some(why) = self.terminated {
            return Err(RewardError::SteppedAfterTermination(why));
        }
        crate::etltl::robustness::check_finite(s_next)?;
        let m = Arc::clone(&self.automaton);
        let rho: Vec<f64> = m.atoms().iter().map(|p| raw(p, s_next)).collect();
        let scaled: Vec<f64> = rho.iter().zip(&self.atom_scales).map(|(r, s)| r / s).collect();
        let valuation = rho
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &r)| acc | (usize::from(r > 0.0) << i));

        let q = self.run.current;
        let taken = m.next_edge(q, valuation).filter(|(_, e)| !e.is_self_loop());
        let step_reward = match (m.is_accepting(q), m.self_loop(q), taken) {
            (true, Some(sl), _) => self.edge_reward(&sl.expr, &scaled),
            (_, _, Some((_, e))) => self.edge_reward(&e.expr, &scaled),
            (_, sl, None) => m
                .out_edges(q)
                .map(|(_, e)| e)
                .filter(|e| !e.is_self_loop() && !m.is_trap(e.to))
                .map(|e| self.edge_reward(&e.expr, &scaled))
                .reduce(f64::max)
                .or_else(|| sl.map(|e| self.edge_reward(&e.expr, &scaled)))
                .unwrap_or(0.0),
        };

        self.run.advance(&m, valuation);
        let to = self.run.current;
        let remaining = (self.config.max_episode_steps - self.t.min(self.config.max_episode_steps)) as f64;
        let bonus = self.config.max_robustness * remaining;
        let (event, terminal_bonus) = if m.is_terminal_accept(to) {
            (StepEvent::TerminalAccept, bonus)
        } else if m.is_trap(to) {
            (StepEvent::TerminalTrap, -bonus)
        } else if self.t + 1 >= self.config.max_episode_steps {
            (StepEvent::TimeLimit, 0.0)
        } else if let Some((edge, _)) = taken {
            (StepEvent::Transition { edge, from: q, to }, 0.0)
        } else {
            (StepEvent::SelfLoop, 0.0)
        };
        self.terminated = event.termination();
        let t = self.t;
        self.t += 1;
        Ok(StepResult {
            reward: step_reward + terminal_bonus,
            step_reward,
            terminal_bonus,
            automaton_state: to,
            event,
            t,
            atom_robustness: rho,
        })
    }
}

/// One line of an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub automaton_state: StateId,
    pub event: StepEvent,
    pub reward: f64,
    /// Raw robustness per goal name.
    pub robustness: BTreeMap<String, f64>,
}

impl LogRecord {
    pub fn new(state: &[f64], action: &[f64], result: &StepResult, automaton: &Sfspa) -> LogRecord {
        LogRecord {
            t: result.t,
            state: state.to_vec(),
            action: action.to_vec(),
            automaton_state: result.automaton_state,
            event: result.event,
            reward: result.reward,
            robustness: automaton
                .atom_names()
                .into_iter()
                .map(String::from)
                .zip(result.atom_robustness.iter().copied())
                .collect(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }
}

/// Field ranges observed over `episodes` random-action episodes, widened by
/// 2.5% of the width on each side. Fields present in `declared` keep their
/// declared range.
pub fn estimate_scales(
    env: &mut dyn Environment,
    episodes: usize,
    seed: u64,
    declared: &ScaleTable,
) -> Result<ScaleTable, RewardError> {
    let names: Vec<String> = env.schema().fields.iter().map(|f| f.name.clone()).collect();
    let mut lo = vec![f64::INFINITY; names.len()];
    let mut hi = vec![f64::NEG_INFINITY; names.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = env.action_bounds();
    let mut observe = |s: &[f64]| {
        for (i, v) in s.iter().enumerate() {
            lo[i] = lo[i].min(*v);
            hi[i] = hi[i].max(*v);
        }
    };
    for ep in 0..episodes.max(1) {
        observe(&env.reset(seed.wrapping_add(ep as u64)));
        for _ in 0..env.max_steps() {
            let action: Vec<f64> = bounds.iter().map(|&(a, b)| rng.random_range(a..=b)).collect();
            let tr = env.step(&action);
            observe(&tr.state);
            if tr.done {
                break;
            }
        }
    }
    let mut table = BTreeMap::new();
    for (i, name) in names.into_iter().enumerate() {
        if let Some(b) = declared.bounds(&name) {
            table.insert(name, b);
            continue;
        }
        let width = hi[i] - lo[i];
        if !(width > 0.0) {
            return Err(RewardError::DegenerateRange(name));
        }
        table.insert(name, (lo[i] - 0.025 * width, hi[i] + 0.025 * width));
    }
    Ok(ScaleTable(table))
}
