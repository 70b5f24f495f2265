use goalforge_web::{compile_goal_json, reward_field_json, simulate_plate_json, DEFAULT_GOAL};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn compiles_the_default_goal() {
    let v = parse(compile_goal_json(DEFAULT_GOAL));
    assert!(v["etltl"].as_str().unwrap().starts_with("(and"));
    assert!(v["dot"].as_str().unwrap().starts_with("digraph"));
    assert_eq!(v["hash"].as_str().unwrap().len(), 64);
    let states = v["states"].as_array().unwrap();
    assert!(states.iter().any(|s| s["trap"] == true));
    assert!(states.iter().any(|s| s["accepting"] == true));
}

#[test]
fn compile_errors_carry_location() {
    let err = compile_goal_json("reach A: s.z in Goal.Range(0, 1)").unwrap_err();
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn reward_field_peaks_in_the_target() {
    let v = parse(reward_field_json("reach C: norm(s.x, s.y) in Goal.Range(0, 0.02)", 0, 21));
    let n = v["n"].as_u64().unwrap() as usize;
    let rewards = v["rewards"].as_array().unwrap();
    assert_eq!(rewards.len(), n * n);
    assert!(rewards[0].is_null(), "corner is off the plate");
    let center = rewards[(n / 2) * n + n / 2].as_f64().unwrap();
    let edge = rewards[(n / 2) * n + 1].as_f64().unwrap();
    assert!(center > 0.0 && edge < 0.0, "{center} {edge}");
    assert_eq!(v["max"].as_f64().unwrap(), center);
    assert!(reward_field_json(DEFAULT_GOAL, 99, 10).is_err());
}

#[test]
fn damped_controller_keeps_the_ball_on() {
    let v = parse(simulate_plate_json(DEFAULT_GOAL, 3, 1.5, 1.0));
    let x = v["x"].as_array().unwrap();
    assert_eq!(x.len(), v["reward"].as_array().unwrap().len());
    assert_eq!(v["report"]["goals"][1]["SuccessRate"], 1.0);
    assert_eq!(simulate_plate_json(DEFAULT_GOAL, 3, 1.5, 1.0), simulate_plate_json(DEFAULT_GOAL, 3, 1.5, 1.0));

    let pushed = parse(simulate_plate_json(DEFAULT_GOAL, 3, -2.0, 0.0));
    assert_eq!(pushed["events"].as_array().unwrap().last().unwrap(), "trap");
}
