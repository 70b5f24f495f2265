use std::sync::Arc;

use super::{Controller, TrainError};
use crate::assessment::{aggregate, AssessmentReport, EpisodeLog};
use crate::envs::Environment;
use crate::goal_lang::GoalProgram;
use crate::reward::{ConditioningConfig, LogRecord, RewardEngine, RewardError};
use crate::sfspa::Sfspa;

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub undiscounted: f64,
    pub discounted: f64,
    pub steps: usize,
    /// Filled only when requested.
    pub log: Option<EpisodeLog>,
}

/// Runs one episode of `controller` from `env.reset(seed)`. The episode
/// ends when the engine terminates or the environment reports `done`.
pub fn rollout(
    env: &mut dyn Environment,
    engine: &mut RewardEngine,
    controller: &dyn Controller,
    seed: u64,
    gamma: f64,
    keep_log: bool,
) -> Result<EpisodeOutcome, RewardError> {
    let mut s = env.reset(seed);
    engine.reset();
    let max_steps = engine.config().max_episode_steps;
    let mut log = keep_log.then(|| EpisodeLog::new(max_steps));
    let (mut ret, mut disc, mut g) = (0.0, 0.0, 1.0);
    let mut steps = 0;
    while steps < max_steps {
        let action = controller.act(&s, engine.state());
        let tr = env.step(&action);
        let r = engine.step(&tr.state)?;
        steps += 1;
        ret += r.reward;
        disc += g * r.reward;
        g *= gamma;
        if let Some(l) = log.as_mut() {
            l.records.push(LogRecord::new(&tr.state, &action, &r, engine.automaton()));
        }
        s = tr.state;
        if r.done() || tr.done {
            break;
        }
    }
    Ok(EpisodeOutcome {
        undiscounted: ret,
        discounted: disc,
        steps,
        log,
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: AssessmentReport,
    pub logs: Vec<EpisodeLog>,
    pub mean_return: f64,
    pub steps: u64,
}

/// Runs `episodes` episodes with seeds `seed, seed + 1, ...` and assesses
/// them.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    controller: &dyn Controller,
    env: &mut dyn Environment,
    program: &GoalProgram,
    automaton: &Arc<Sfspa>,
    config: &Arc<ConditioningConfig>,
    episodes: usize,
    seed: u64,
) -> Result<Evaluation, TrainError> {
    let mut engine = RewardEngine::new(Arc::clone(automaton), Arc::clone(config))?;
    let mut logs = Vec::with_capacity(episodes);
    let (mut total, mut steps) = (0.0, 0u64);
    for j in 0..episodes {
        let out = rollout(env, &mut engine, controller, seed.wrapping_add(j as u64), 1.0, true)?;
        total += out.undiscounted;
        steps += out.steps as u64;
        logs.push(out.log.expect("log requested"));
    }
    let report = aggregate(&logs, program, &config.scales)?;
    Ok(Evaluation {
        report,
        logs,
        mean_return: total / episodes.max(1) as f64,
        steps,
    })
}
