//! Browser demo over the plate environment. Each exported function takes
//! goal text and returns a JSON string; the plain-Rust versions are what
//! the wasm exports call and what the native tests exercise.

use std::sync::Arc;

use goalforge::assessment::AssessmentReport;
use goalforge::envs::{Environment, PlateEnv};
use goalforge::reward::{ConditioningConfig, RewardEngine, ScaleTable, StepEvent};
use goalforge::sfspa::Sfspa;
use goalforge::trainer::evaluate;
use goalforge::{compile, Compiled};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const DEFAULT_GOAL: &str = "drive BallNearCenter: norm(s.x, s.y) in Goal.Range(0, 0.005)\n\
and avoid FallOff: norm(s.x, s.y) in Goal.RangeAbove(0.1125)";

struct Plate {
    compiled: Compiled,
    automaton: Arc<Sfspa>,
    conditioning: Arc<ConditioningConfig>,
    env: PlateEnv,
}

fn plate(goal: &str) -> Result<Plate, String> {
    let env = PlateEnv::default();
    let schema = env.schema();
    let compiled = compile(goal, &schema).map_err(|e| e.render(goal))?;
    Ok(Plate {
        automaton: Arc::new(compiled.automaton.clone()),
        conditioning: Arc::new(ConditioningConfig::new(ScaleTable::from_schema(&schema), env.max_steps())),
        compiled,
        env,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo output serializes")
}

#[derive(Debug, Serialize)]
pub struct StateView {
    pub id: usize,
    pub label: String,
    pub accepting: bool,
    pub trap: bool,
}

#[derive(Debug, Serialize)]
pub struct CompileView {
    pub etltl: String,
    pub dot: String,
    pub hash: String,
    pub initial: usize,
    pub states: Vec<StateView>,
    pub edges: usize,
}

/// Formula, automaton summary and DOT source for `goal` over the plate
/// state `x, y, vx, vy`.
pub fn compile_goal_json(goal: &str) -> Result<String, String> {
    let p = plate(goal)?;
    let a = &p.automaton;
    Ok(to_json(&CompileView {
        etltl: p.compiled.formula.to_sexpr(),
        dot: a.to_dot(),
        hash: a.hash(),
        initial: a.initial(),
        states: a
            .states()
            .iter()
            .enumerate()
            .map(|(id, s)| StateView {
                id,
                label: s.label.clone(),
                accepting: s.accepting,
                trap: s.trap,
            })
            .collect(),
        edges: a.edges().len(),
    }))
}

#[derive(Debug, Serialize)]
pub struct FieldView {
    pub n: usize,
    pub radius: f64,
    /// Row-major, `y` from top (+radius) to bottom; `null` off the plate.
    pub rewards: Vec<Option<f64>>,
    /// Automaton state after the step, same layout.
    pub next_states: Vec<Option<usize>>,
    pub min: f64,
    pub max: f64,
}

/// Step reward for a ball at rest at each point of an `n x n` grid over the
/// plate, with the automaton in `automaton_state` at the first step.
pub fn reward_field_json(goal: &str, automaton_state: usize, n: usize) -> Result<String, String> {
    let p = plate(goal)?;
    let a = &p.automaton;
    if automaton_state >= a.num_states() {
        return Err(format!("automaton has {} states", a.num_states()));
    }
    if a.is_trap(automaton_state) || a.is_terminal_accept(automaton_state) {
        return Err(format!("state {automaton_state} ends the episode; pick a state with outgoing edges"));
    }
    let n = n.clamp(2, 200);
    let r = p.env.params.radius;
    let mut engine = RewardEngine::new(Arc::clone(a), Arc::clone(&p.conditioning)).map_err(|e| e.to_string())?;
    let (mut rewards, mut next_states) = (Vec::with_capacity(n * n), Vec::with_capacity(n * n));
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in 0..n {
        let y = r - 2.0 * r * row as f64 / (n - 1) as f64;
        for col in 0..n {
            let x = -r + 2.0 * r * col as f64 / (n - 1) as f64;
            if x.hypot(y) > r {
                rewards.push(None);
                next_states.push(None);
                continue;
            }
            engine.resume_at(automaton_state, 0);
            let step = engine.step(&[x, y, 0.0, 0.0]).map_err(|e| e.to_string())?;
            min = min.min(step.step_reward);
            max = max.max(step.step_reward);
            rewards.push(Some(step.step_reward));
            next_states.push(Some(step.automaton_state));
        }
    }
    Ok(to_json(&FieldView {
        n,
        radius: r,
        rewards,
        next_states,
        min,
        max,
    }))
}

#[derive(Debug, Serialize)]
pub struct SimulationView {
    pub radius: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub reward: Vec<f64>,
    pub automaton_state: Vec<usize>,
    pub events: Vec<String>,
    pub total_return: f64,
    pub report: AssessmentReport,
}

fn event_name(e: &StepEvent) -> String {
    match e {
        StepEvent::SelfLoop => "self-loop".into(),
        StepEvent::Transition { from, to, .. } => format!("q{from}->q{to}"),
        StepEvent::TerminalAccept => "accept".into(),
        StepEvent::TerminalTrap => "trap".into(),
        StepEvent::TimeLimit => "time-limit".into(),
    }
}

/// One episode under the tilt controller `-(gain·p + damping·v)`, with
/// the reward of `goal` and its assessment.
pub fn simulate_plate_json(goal: &str, seed: u64, gain: f64, damping: f64) -> Result<String, String> {
    let mut p = plate(goal)?;
    let max_tilt = p.env.params.max_tilt;
    let controller = move |s: &[f64], _: usize| -> Vec<f64> {
        (0..2)
            .map(|i| (-(gain * s[i] + damping * s[i + 2])).clamp(-max_tilt, max_tilt))
            .collect()
    };
    let ev = evaluate(
        &controller,
        &mut p.env,
        &p.compiled.program,
        &p.automaton,
        &p.conditioning,
        1,
        seed,
    )
    .map_err(|e| e.to_string())?;
    let log = &ev.logs[0];
    Ok(to_json(&SimulationView {
        radius: p.env.params.radius,
        x: log.records.iter().map(|r| r.state[0]).collect(),
        y: log.records.iter().map(|r| r.state[1]).collect(),
        reward: log.records.iter().map(|r| r.reward).collect(),
        automaton_state: log.records.iter().map(|r| r.automaton_state).collect(),
        events: log.records.iter().map(|r| event_name(&r.event)).collect(),
        total_return: ev.mean_return,
        report: ev.report,
    }))
}

#[wasm_bindgen]
pub fn default_goal() -> String {
    DEFAULT_GOAL.to_string()
}

#[wasm_bindgen]
pub fn compile_goal(goal: &str) -> Result<String, JsValue> {
    compile_goal_json(goal).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn reward_field(goal: &str, automaton_state: usize, n: usize) -> Result<String, JsValue> {
    reward_field_json(goal, automaton_state, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate_plate(goal: &str, seed: u64, gain: f64, damping: f64) -> Result<String, JsValue> {
    simulate_plate_json(goal, seed, gain, damping).map_err(|e| JsValue::from_str(&e))
}
