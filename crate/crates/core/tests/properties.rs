mod common;

use std::sync::Arc;

use goalforge::assessment::{assess_avoid, assess_goal, drive_reference_length, EpisodeLog};
use goalforge::etltl::{robustness_bool, robustness_pred, trace_satisfies, translate, Formula, Predicate};
use goalforge::goal_lang::{parse_program, GoalOp};
use goalforge::reward::{ConditioningConfig, RewardEngine, ScaleTable};
use goalforge::sfspa::build;
use goalforge::trainer::Policy;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_atom, random_program, random_trace, xy_schema};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn atom_predicate(seed: u64) -> Predicate {
    let text = random_atom(&mut rng(seed), "P");
    let program = parse_program(&text, &xy_schema()).unwrap();
    Predicate::from_atom(program.atoms()[0])
}

fn state() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..=4.0, 2)
}

fn config(steps: usize) -> Arc<ConditioningConfig> {
    Arc::new(ConditioningConfig::new(ScaleTable::from_schema(&xy_schema()), steps))
}

const ALL: [&str; 4] = ["and", "or", "then", "until"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_round_trip(seed in any::<u64>()) {
        let text = random_program(&mut rng(seed), 4, &["and", "or", "then"]);
        let schema = xy_schema();
        let p = parse_program(&text, &schema).unwrap();
        let again = parse_program(&p.to_string(), &schema).unwrap();
        prop_assert_eq!(p.without_spans(), again.without_spans());
        prop_assert_eq!(&p, &parse_program(&text, &schema).unwrap());
    }

    #[test]
    fn sign_coherence(seed in any::<u64>(), s in state()) {
        let p = atom_predicate(seed);
        prop_assert_eq!(p.membership(&s), robustness_pred(&p, &s).unwrap() > 0.0);
    }

    #[test]
    fn de_morgan(a in any::<u64>(), b in any::<u64>(), s in state()) {
        let (p, q) = (Formula::pred(atom_predicate(a)), Formula::pred(atom_predicate(b)));
        let lhs = Formula::not(Formula::and(p.clone(), q.clone()));
        let rhs = Formula::or(Formula::not(p), Formula::not(q));
        prop_assert_eq!(robustness_bool(&lhs, &s).unwrap(), robustness_bool(&rhs, &s).unwrap());
    }

    #[test]
    fn translation_keeps_leaves(seed in any::<u64>()) {
        let text = random_program(&mut rng(seed), 5, &["and", "or", "then"]);
        let p = parse_program(&text, &xy_schema()).unwrap();
        prop_assert_eq!(translate(&p).leaf_count(), p.atoms().len());
    }

    #[test]
    fn eventually_is_existential(seed in any::<u64>(), tseed in any::<u64>()) {
        let p = atom_predicate(seed);
        let trace = random_trace(&mut rng(tseed), 20);
        let f = Formula::eventually(Formula::pred(p.clone()));
        let exists = trace.iter().any(|s| robustness_pred(&p, s).unwrap() > 0.0);
        prop_assert_eq!(trace_satisfies(&f, &trace, trace.len()).unwrap(), exists);
    }

    #[test]
    fn automata_are_deterministic_and_well_formed(seed in any::<u64>()) {
        let mut r = rng(seed);
        let text = random_program(&mut r, 3, &["and", "or", "then"]);
        let a = build(&parse_program(&text, &xy_schema()).unwrap()).unwrap();
        prop_assert!(a.validate().is_ok(), "{:?}", a.validate());
        for _ in 0..50 {
            let s = vec![r.random_range(-4.0..=4.0), r.random_range(-4.0..=4.0)];
            let v = a.valuation(&s);
            for q in 0..a.num_states() {
                let hits = a.out_edges(q).filter(|(_, e)| e.guard.contains(v)).count();
                prop_assert!(hits <= 1);
            }
        }
    }

    #[test]
    fn reward_is_bounded(seed in any::<u64>(), s in state(), q in 0usize..8) {
        let text = random_program(&mut rng(seed), 3, &ALL[..3]);
        let a = Arc::new(build(&parse_program(&text, &xy_schema()).unwrap()).unwrap());
        let cfg = config(50);
        let mut e = RewardEngine::new(a.clone(), cfg.clone()).unwrap();
        e.resume_at(q % a.num_states(), 10);
        if a.is_trap(e.state()) || a.is_terminal_accept(e.state()) {
            return Ok(());
        }
        let r = e.step(&s).unwrap();
        prop_assert!(r.step_reward.abs() <= cfg.max_robustness);
        if r.done() && r.event.termination() != Some(goalforge::reward::Termination::TimeLimit) {
            prop_assert_eq!(r.terminal_bonus.abs(), cfg.max_robustness * 40.0);
        } else {
            prop_assert_eq!(r.terminal_bonus, 0.0);
        }
    }

    #[test]
    fn step_is_markov(seed in any::<u64>(), tseed in any::<u64>()) {
        let mut r = rng(tseed);
        let text = random_program(&mut rng(seed), 3, &ALL);
        let Ok(p) = parse_program(&text, &xy_schema()) else { return Ok(()) };
        let Ok(a) = build(&p) else { return Ok(()) };
        let a = Arc::new(a);
        let cfg = config(30);
        let trace = random_trace(&mut r, 30);
        let mut e = RewardEngine::new(a.clone(), cfg.clone()).unwrap();
        let mut history = Vec::new();
        for s in &trace {
            if e.terminated().is_some() {
                break;
            }
            let (q, t) = (e.state(), e.t());
            history.push((q, t, s.clone(), e.step(s).unwrap()));
        }
        history.shuffle(&mut r);
        let mut fresh = RewardEngine::new(a, cfg).unwrap();
        for (q, t, s, expected) in history {
            fresh.resume_at(q, t);
            prop_assert_eq!(fresh.step(&s).unwrap(), expected);
        }
    }

    #[test]
    fn drive_dwell_incentive(inside in 0.0f64..0.999, outside in 1.001f64..4.0, sign in prop::bool::ANY) {
        let p = parse_program("drive D: s.x in Goal.Range(-1, 1)", &xy_schema()).unwrap();
        let a = Arc::new(build(&p).unwrap());
        let qf = a.accepting_states()[0];
        let mut e = RewardEngine::new(a, config(100)).unwrap();
        let sgn = if sign { 1.0 } else { -1.0 };
        e.resume_at(qf, 5);
        let r_in = e.step(&[sgn * inside, 0.0]).unwrap().step_reward;
        e.resume_at(qf, 5);
        let r_out = e.step(&[sgn * outside, 0.0]).unwrap().step_reward;
        prop_assert!(r_in > 0.0 && 0.0 > r_out, "{} {}", r_in, r_out);
    }

    #[test]
    fn minimize_gradient(x in -4.0f64..0.99, dx in 0.001f64..0.5) {
        let p = parse_program("minimize M: s.x in Goal.RangeBelow(1)", &xy_schema()).unwrap();
        let a = Arc::new(build(&p).unwrap());
        let qf = a.accepting_states()[0];
        let cfg = config(100);
        let mut e = RewardEngine::new(a, cfg.clone()).unwrap();
        let x2 = (x + dx).min(0.999);
        prop_assume!(x2 > x);
        e.resume_at(qf, 0);
        let r1 = e.step(&[x, 0.0]).unwrap().step_reward;
        e.resume_at(qf, 0);
        let r2 = e.step(&[x2, 0.0]).unwrap().step_reward;
        prop_assume!(r1 < cfg.max_robustness);
        prop_assert!(r1 > r2);
    }

    #[test]
    fn trap_bookkeeping(start in 0usize..40, steps in 1usize..20) {
        let p = parse_program("avoid A: s.x in Goal.RangeAbove(3)", &xy_schema()).unwrap();
        let a = Arc::new(build(&p).unwrap());
        let cfg = config(100);
        let mut e = RewardEngine::new(a, cfg.clone()).unwrap();
        e.resume_at(0, start);
        let (mut total, mut step_sum) = (0.0, 0.0);
        for k in 0..steps {
            let r = e.step(&[1.0 + k as f64 * 0.01, 0.0]).unwrap();
            total += r.reward;
            step_sum += r.step_reward;
        }
        let r = e.step(&[3.5, 0.0]).unwrap();
        total += r.reward;
        step_sum += r.step_reward;
        let t = start + steps;
        prop_assert_eq!(r.t, t);
        prop_assert_eq!(total, step_sum - cfg.max_robustness * (100 - t) as f64);
    }

    #[test]
    fn gsr_in_unit_interval(seed in any::<u64>(), tseed in any::<u64>()) {
        let text = random_program(&mut rng(seed), 3, &["and", "or"]);
        let p = parse_program(&text, &xy_schema()).unwrap();
        let scales = ScaleTable::from_schema(&xy_schema());
        let logs: Vec<EpisodeLog> = (0..3)
            .map(|i| EpisodeLog::from_states(&random_trace(&mut rng(tseed + i), 20), 20))
            .collect();
        for atom in p.atoms() {
            let reference = drive_reference_length(&logs, atom);
            for log in &logs {
                let g = assess_goal(log, atom, &scales, reference).unwrap();
                prop_assert!((0.0..=1.0).contains(&g.gsr), "{} {}", atom, g.gsr);
            }
        }
    }

    #[test]
    fn avoid_later_entry_scores_higher(len in 2usize..50, a in 0usize..50, b in 0usize..50) {
        let p = parse_program("avoid A: s.x in Goal.RangeAbove(1)", &xy_schema()).unwrap();
        let atom = p.atoms()[0];
        prop_assume!(atom.op == GoalOp::Avoid);
        let (early, late) = ((a % len).min(b % len), (a % len).max(b % len));
        let log = |entry: usize| {
            let states: Vec<Vec<f64>> = (0..len).map(|i| vec![if i >= entry { 2.0 } else { 0.0 }, 0.0]).collect();
            EpisodeLog::from_states(&states, 50)
        };
        let g_early = assess_avoid(&log(early), atom).unwrap().gsr;
        let g_late = assess_avoid(&log(late), atom).unwrap().gsr;
        prop_assert!(g_late >= g_early);
    }

    #[test]
    fn policy_input_width(q in 1usize..10, hidden in prop::collection::vec(1usize..6, 0..3)) {
        let schema = xy_schema();
        let p = Policy::new(&schema, q, hidden, vec![(-1.0, 1.0)]);
        prop_assert_eq!(p.arch.inputs, schema.len() + q);
        prop_assert_eq!(p.input(&[0.0, 0.0], Some(q - 1)).len(), schema.len() + q);
    }
}
