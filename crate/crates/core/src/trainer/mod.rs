//! Cross-entropy-method policy search driven by the automaton reward.
//!
//! Each iteration samples a population of parameter vectors around the
//! current mean, scores every candidate by its mean discounted return on a
//! shared set of episode seeds, and refits the mean and variance to the
//! elite candidates. The mean policy is then evaluated on fixed seeds and
//! assessed; those episodes count towards the interaction total.

mod policy;
mod rollout;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{AssessmentError, EpisodeLog, GoalSummary};
use crate::envs::Environment;
use crate::goal_lang::{GoalProgram, StateSchema};
use crate::reward::{ConditioningConfig, RewardEngine, RewardError};
use crate::sfspa::Sfspa;

pub use policy::{Architecture, Controller, Policy};
pub use rollout::{evaluate, rollout, EpisodeOutcome, Evaluation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("DivergedNaN: parameters became non-finite at iteration {iteration}")]
    DivergedNaN { iteration: usize },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Assessment(#[from] AssessmentError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    pub episodes_per_candidate: usize,
    pub gamma: f64,
    pub seed: u64,
    /// Rollout threads; 0 uses the global pool.
    pub workers: usize,
    pub hidden: Vec<usize>,
    pub init_std: f64,
    /// Multiplier on `init_std` and `extra_noise` for weights on the
    /// automaton one-hot channels.
    pub automaton_std_scale: f64,
    /// Variance added to the refitted distribution, decayed geometrically.
    pub extra_noise: f64,
    pub noise_decay: f64,
    /// Episodes used to evaluate the mean policy after each iteration.
    pub eval_episodes: usize,
    /// Stop before an iteration that could exceed this many environment
    /// steps.
    pub max_interactions: Option<u64>,
    pub keep_eval_logs: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            population: 16,
            elite_fraction: 0.2,
            iterations: 50,
            episodes_per_candidate: 2,
            gamma: 0.99,
            seed: 0,
            workers: 0,
            hidden: Vec::new(),
            init_std: 1.0,
            automaton_std_scale: 0.03,
            extra_noise: 0.25,
            noise_decay: 0.9,
            eval_episodes: 10,
            max_interactions: None,
            keep_eval_logs: false,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.population == 0 {
            return bad("population must be >= 1");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return bad("elite_fraction must be in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must be in (0, 1)");
        }
        if self.episodes_per_candidate == 0 || self.eval_episodes == 0 {
            return bad("episode counts must be >= 1");
        }
        if !(self.automaton_std_scale >= 0.0) {
            return bad("automaton_std_scale must be >= 0");
        }
        if !(self.init_std > 0.0) || self.extra_noise < 0.0 || !(0.0..=1.0).contains(&self.noise_decay) {
            return bad("init_std must be > 0, extra_noise >= 0, noise_decay in [0, 1]");
        }
        Ok(())
    }

    pub fn elites(&self) -> usize {
        ((self.population as f64 * self.elite_fraction).round() as usize).clamp(1, self.population)
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub iteration: usize,
    /// Environment steps so far, including evaluation episodes.
    pub interactions: u64,
    /// Population mean of the undiscounted return.
    pub mean_return: f64,
    /// Population mean of the discounted return (the optimized score).
    pub mean_discounted_return: f64,
    /// Mean undiscounted return of the mean policy on the evaluation seeds.
    pub eval_return: f64,
    pub goals: Vec<GoalSummary>,
    pub success_rate: f64,
    pub overall_gsr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Mean policy with the best evaluation (joint success, then GSR, then
    /// return; later iterations win ties).
    pub policy: Policy,
    pub final_policy: Policy,
    pub curve: Vec<CurveRecord>,
    /// Evaluation logs per iteration when `keep_eval_logs` is set.
    pub eval_logs: Vec<Vec<EpisodeLog>>,
    pub interactions: u64,
}

pub type EnvFactory<'a> = &'a (dyn Fn() -> Box<dyn Environment> + Sync);

/// Seeds of the per-iteration evaluation episodes.
pub fn eval_seed(cfg: &TrainerConfig) -> u64 {
    cfg.seed.wrapping_add(0x5EED_0000_0000)
}

pub fn train(
    env_factory: EnvFactory<'_>,
    program: &GoalProgram,
    automaton: Arc<Sfspa>,
    conditioning: Arc<ConditioningConfig>,
    cfg: &TrainerConfig,
) -> Result<TrainOutcome, TrainError> {
    train_with(env_factory, program, automaton, conditioning, cfg, &mut |_, _| true)
}

/// Like [`train`], calling `observer` after every iteration; returning
/// `false` stops training.
pub fn train_with(
    env_factory: EnvFactory<'_>,
    program: &GoalProgram,
    automaton: Arc<Sfspa>,
    conditioning: Arc<ConditioningConfig>,
    cfg: &TrainerConfig,
    observer: &mut dyn FnMut(&CurveRecord, &Policy) -> bool,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    conditioning.validate()?;
    let mut probe_env = env_factory();
    let template = Policy::new(
        &probe_env.schema(),
        automaton.num_states(),
        cfg.hidden.clone(),
        probe_env.action_bounds(),
    );
    let dim = template.arch.param_count();
    let max_steps = conditioning.max_episode_steps as u64;
    let per_iteration = (cfg.population * cfg.episodes_per_candidate + cfg.eval_episodes) as u64 * max_steps;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mean = vec![0.0; dim];
    let scale: Vec<f64> = template
        .automaton_param_mask()
        .into_iter()
        .map(|m| if m { cfg.automaton_std_scale.powi(2) } else { 1.0 })
        .collect();
    let mut var: Vec<f64> = scale.iter().map(|s| s * cfg.init_std * cfg.init_std).collect();
    let mut noise = cfg.extra_noise;
    let mut interactions = 0u64;
    let mut curve = Vec::new();
    let mut eval_logs = Vec::new();
    let mut best: Option<((f64, f64, f64), Policy)> = None;
    let pool = workers_pool(cfg.workers);

    for iteration in 0..cfg.iterations {
        if cfg.max_interactions.is_some_and(|b| interactions + per_iteration > b) {
            break;
        }
        let thetas: Vec<Vec<f64>> = (0..cfg.population)
            .map(|_| {
                (0..dim)
                    .map(|d| mean[d] + var[d].sqrt() * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let seeds: Vec<u64> = (0..cfg.episodes_per_candidate).map(|_| rng.random()).collect();

        let score = |theta: &Vec<f64>| -> Result<(f64, f64, u64), TrainError> {
            let policy = template.with_params(theta.clone());
            let mut env = env_factory();
            let mut engine = RewardEngine::new(Arc::clone(&automaton), Arc::clone(&conditioning))?;
            let (mut disc, mut ret, mut steps) = (0.0, 0.0, 0u64);
            for &s in &seeds {
                let out = rollout(env.as_mut(), &mut engine, &policy, s, cfg.gamma, false)?;
                disc += out.discounted;
                ret += out.undiscounted;
                steps += out.steps as u64;
            }
            let k = seeds.len() as f64;
            Ok((disc / k, ret / k, steps))
        };
        let scored = map_candidates(&pool, &thetas, &score)?;

        interactions += scored.iter().map(|s| s.2).sum::<u64>();
        let mut order: Vec<usize> = (0..thetas.len()).collect();
        order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0).then(a.cmp(&b)));
        let elites = &order[..cfg.elites()];
        let k = elites.len() as f64;
        for d in 0..dim {
            let m = elites.iter().map(|&i| thetas[i][d]).sum::<f64>() / k;
            let v = elites.iter().map(|&i| (thetas[i][d] - m).powi(2)).sum::<f64>() / k;
            mean[d] = m;
            var[d] = v + scale[d] * noise;
        }
        noise *= cfg.noise_decay;
        if mean.iter().chain(&var).any(|x| !x.is_finite()) {
            return Err(TrainError::DivergedNaN { iteration });
        }

        let policy = template.with_params(mean.clone());
        let ev = evaluate(
            &policy,
            probe_env.as_mut(),
            program,
            &automaton,
            &conditioning,
            cfg.eval_episodes,
            eval_seed(cfg),
        )?;
        interactions += ev.steps;
        let n = scored.len() as f64;
        let record = CurveRecord {
            iteration,
            interactions,
            mean_return: scored.iter().map(|s| s.1).sum::<f64>() / n,
            mean_discounted_return: scored.iter().map(|s| s.0).sum::<f64>() / n,
            eval_return: ev.mean_return,
            goals: ev.report.goals.clone(),
            success_rate: ev.report.success_rate,
            overall_gsr: ev.report.overall_gsr,
        };
        log::info!(
            "iteration {iteration}: interactions {interactions}, return {:.3}, success {:.2}, gsr {:.3}",
            record.mean_return,
            record.success_rate,
            record.overall_gsr
        );
        let key = (record.success_rate, record.overall_gsr, record.eval_return);
        if best.as_ref().is_none_or(|(b, _)| key >= *b) {
            best = Some((key, policy.clone()));
        }
        if cfg.keep_eval_logs {
            eval_logs.push(ev.logs);
        }
        let keep_going = observer(&record, &policy);
        curve.push(record);
        if !keep_going {
            break;
        }
    }

    let final_policy = template.with_params(mean);
    Ok(TrainOutcome {
        policy: best.map_or_else(|| final_policy.clone(), |(_, p)| p),
        final_policy,
        curve,
        eval_logs,
        interactions,
    })
}

#[cfg(feature = "parallel")]
type Pool = Option<rayon::ThreadPool>;
#[cfg(not(feature = "parallel"))]
type Pool = ();

#[cfg(feature = "parallel")]
fn workers_pool(workers: usize) -> Pool {
    (workers > 0).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
    })
}

#[cfg(not(feature = "parallel"))]
fn workers_pool(_workers: usize) -> Pool {}

/// Scores candidates, in parallel when enabled. Results keep candidate
/// order so the reduction is independent of scheduling.
#[cfg(feature = "parallel")]
fn map_candidates<T: Send>(
    pool: &Pool,
    thetas: &[Vec<f64>],
    f: &(dyn Fn(&Vec<f64>) -> Result<T, TrainError> + Sync),
) -> Result<Vec<T>, TrainError> {
    use rayon::prelude::*;
    let run = || thetas.par_iter().map(f).collect::<Result<Vec<_>, _>>();
    match pool {
        Some(p) => p.install(run),
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_candidates<T>(
    _pool: &Pool,
    thetas: &[Vec<f64>],
    f: &dyn Fn(&Vec<f64>) -> Result<T, TrainError>,
) -> Result<Vec<T>, TrainError> {
    thetas.iter().map(f).collect()
}

/// Training curve as CSV: one row per iteration with per-goal success rate
/// and GSR columns after the overall ones.
pub fn curve_csv(curve: &[CurveRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let goals: Vec<String> = curve
        .first()
        .map(|r| r.goals.iter().map(|g| g.goal.clone()).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "iteration",
        "interactions",
        "mean_return",
        "mean_discounted_return",
        "eval_return",
        "SuccessRate",
        "OverallGoalSatisfactionRate",
    ]
    .map(String::from)
    .to_vec();
    for g in &goals {
        header.push(format!("{g}.SuccessRate"));
        header.push(format!("{g}.GoalSatisfactionRate"));
    }
    w.write_record(&header).expect("in-memory write");
    for r in curve {
        let mut row = vec![
            r.iteration.to_string(),
            r.interactions.to_string(),
            r.mean_return.to_string(),
            r.mean_discounted_return.to_string(),
            r.eval_return.to_string(),
            r.success_rate.to_string(),
            r.overall_gsr.to_string(),
        ];
        for g in &r.goals {
            row.push(g.success_rate.to_string());
            row.push(g.mean_gsr.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Version tag of [`Checkpoint`] documents.
pub const CHECKPOINT_SCHEMA: &str = "goalforge.checkpoint/1";

/// Trained policy plus everything needed to rebuild its reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub env: String,
    pub program: String,
    pub state_schema: StateSchema,
    pub conditioning: ConditioningConfig,
    pub trainer: TrainerConfig,
    pub policy: Policy,
    /// Hash of the automaton JSON the policy was trained against.
    pub automaton_hash: String,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint, String> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if c.schema != CHECKPOINT_SCHEMA {
            return Err(format!("unsupported checkpoint schema `{}`", c.schema));
        }
        Ok(c)
    }
}
