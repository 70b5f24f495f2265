//! Goal satisfaction metrics computed from episode logs.
//!
//! Every goal gets a success flag and a goal satisfaction rate (GSR) in
//! `[0, 1]`. Distances are measured from the goal's test value to its
//! range (zero inside); a state is inside when the goal's predicate has
//! positive robustness.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::etltl::{robustness::raw, Predicate, Relation};
use crate::goal_lang::{GoalAtom, GoalOp, GoalProgram, Range};
use crate::reward::{LogRecord, ScaleTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssessmentError {
    #[error("WrongOperator: goal `{goal}` is `{found}`, expected {expected}")]
    WrongOperator {
        goal: String,
        found: GoalOp,
        expected: &'static str,
    },
    #[error("EmptyBatch: no episodes to assess")]
    EmptyBatch,
    #[error("EmptyLog: episode has no steps")]
    EmptyLog,
    #[error("MissingScale: no scale for the test value of goal `{0}`")]
    MissingScale(String),
    #[error("BadLog: {0}")]
    BadLog(String),
}

/// Steps of one episode plus the episode length limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub records: Vec<LogRecord>,
    pub max_steps: usize,
}

impl EpisodeLog {
    pub fn new(max_steps: usize) -> Self {
        EpisodeLog {
            records: Vec::new(),
            max_steps,
        }
    }

    /// Log built from bare states, for tests and offline traces.
    pub fn from_states(states: &[Vec<f64>], max_steps: usize) -> Self {
        EpisodeLog {
            records: states
                .iter()
                .enumerate()
                .map(|(t, s)| LogRecord {
                    t,
                    state: s.clone(),
                    action: Vec::new(),
                    automaton_state: 0,
                    event: crate::reward::StepEvent::SelfLoop,
                    reward: 0.0,
                    robustness: BTreeMap::new(),
                })
                .collect(),
            max_steps,
        }
    }

    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| r.to_json_line() + "\n").collect()
    }

    pub fn from_jsonl(text: &str, max_steps: usize) -> Result<Self, AssessmentError> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| AssessmentError::BadLog(e.to_string())))
            .collect::<Result<Vec<LogRecord>, _>>()?;
        if records.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err(AssessmentError::BadLog("step indices must increase".into()));
        }
        Ok(EpisodeLog { records, max_steps })
    }

    fn last(&self) -> Result<&LogRecord, AssessmentError> {
        self.records.last().ok_or(AssessmentError::EmptyLog)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct Extras {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percentage_of_iterations_in_target_region: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_target_reaching_iterations: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalAssessment {
    pub goal: String,
    pub op: GoalOp,
    pub success: bool,
    pub gsr: f64,
    pub extras: Extras,
}

struct Probe {
    pred: Predicate,
    atom: GoalAtom,
}

impl Probe {
    fn new(atom: &GoalAtom) -> Probe {
        Probe {
            pred: Predicate::from_atom(atom),
            atom: atom.clone(),
        }
    }

    fn inside(&self, s: &[f64]) -> bool {
        raw(&self.pred, s) > 0.0
    }

    fn value(&self, s: &[f64]) -> f64 {
        self.atom.expr.eval(s)
    }

    /// Distance from the test value to the region the predicate describes.
    fn distance(&self, s: &[f64]) -> f64 {
        let v = self.value(s);
        match self.pred.relation {
            Relation::InRange { range } => range.distance(v),
            Relation::LessThan { bound } => (v - bound).max(0.0),
            Relation::GreaterThan { bound } => (bound - v).max(0.0),
        }
    }
}

/// Characteristic size of a goal's target: the width of a closed range, or
/// the scale of the test value for one-sided ranges.
pub fn target_size(atom: &GoalAtom, scales: &ScaleTable) -> Result<f64, AssessmentError> {
    match atom.range {
        Range::Closed { lower, upper } => Ok(upper - lower),
        _ => scales
            .predicate_scale(&Predicate::from_atom(atom))
            .map_err(|_| AssessmentError::MissingScale(atom.name.clone())),
    }
}

fn expect_op(atom: &GoalAtom, ops: &[GoalOp], expected: &'static str) -> Result<(), AssessmentError> {
    if ops.contains(&atom.op) {
        Ok(())
    } else {
        Err(AssessmentError::WrongOperator {
            goal: atom.name.clone(),
            found: atom.op,
            expected,
        })
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Reach: success once the target is entered; GSR from the final state's
/// distance to the target relative to the target size.
pub fn assess_reach(log: &EpisodeLog, atom: &GoalAtom, scales: &ScaleTable) -> Result<GoalAssessment, AssessmentError> {
    expect_op(atom, &[GoalOp::Reach], "reach")?;
    let probe = Probe::new(atom);
    let size = target_size(atom, scales)?;
    let d = probe.distance(&log.last()?.state);
    let gsr = if d > size { 0.0 } else { 1.0 - d / size };
    Ok(GoalAssessment {
        goal: atom.name.clone(),
        op: atom.op,
        success: log.records.iter().any(|r| probe.inside(&r.state)),
        gsr,
        extras: Extras {
            distance: Some(d),
            ..Extras::default()
        },
    })
}

/// Avoid: success when the region is never entered; GSR is the number of
/// steps before the first entry over the episode length limit.
pub fn assess_avoid(log: &EpisodeLog, atom: &GoalAtom) -> Result<GoalAssessment, AssessmentError> {
    expect_op(atom, &[GoalOp::Avoid], "avoid")?;
    log.last()?;
    let probe = Probe::new(atom);
    let entry = log.records.iter().position(|r| probe.inside(&r.state));
    let gsr = match entry {
        Some(i) => clamp01(i as f64 / log.max_steps as f64),
        None => 1.0,
    };
    Ok(GoalAssessment {
        goal: atom.name.clone(),
        op: atom.op,
        success: entry.is_none(),
        gsr,
        extras: Extras::default(),
    })
}

/// Largest out-of-target distance of a drive goal across a batch, the
/// reference length for [`assess_drive`].
pub fn drive_reference_length(logs: &[EpisodeLog], atom: &GoalAtom) -> f64 {
    let probe = Probe::new(atom);
    logs.iter()
        .flat_map(|l| &l.records)
        .map(|r| probe.distance(&r.state))
        .fold(0.0, f64::max)
}

/// Drive: success when the episode ends inside the target. GSR penalises
/// out-of-target steps weighted by their mean distance relative to
/// `reference_length`.
pub fn assess_drive(log: &EpisodeLog, atom: &GoalAtom, reference_length: f64) -> Result<GoalAssessment, AssessmentError> {
    expect_op(atom, &[GoalOp::Drive], "drive")?;
    let probe = Probe::new(atom);
    let last = log.last()?;
    let n = log.records.len();
    let inside: Vec<bool> = log.records.iter().map(|r| probe.inside(&r.state)).collect();
    let out_dists: Vec<f64> = log
        .records
        .iter()
        .zip(&inside)
        .filter(|(_, &i)| !i)
        .map(|(r, _)| probe.distance(&r.state))
        .collect();
    let out = out_dists.len();
    let gsr = if out == 0 {
        1.0
    } else {
        let mean = out_dists.iter().sum::<f64>() / out as f64;
        let scaled = if reference_length > 0.0 { mean / reference_length } else { 0.0 };
        clamp01(1.0 - out as f64 * scaled / n as f64)
    };
    let (mut run, mut longest) = (0usize, 0usize);
    for &i in &inside {
        if i {
            longest = longest.max(run);
            run = 0;
        } else {
            run += 1;
        }
    }
    Ok(GoalAssessment {
        goal: atom.name.clone(),
        op: atom.op,
        success: probe.inside(&last.state),
        gsr,
        extras: Extras {
            percentage_of_iterations_in_target_region: Some(100.0 * (n - out) as f64 / n as f64),
            max_target_reaching_iterations: Some(longest as f64),
            distance: Some(probe.distance(&last.state)),
            ..Extras::default()
        },
    })
}

/// Minimize or maximize: success once the bound is crossed; otherwise GSR
/// falls with the mean distance to the bound relative to the target size.
pub fn assess_minmax(log: &EpisodeLog, atom: &GoalAtom, scales: &ScaleTable) -> Result<GoalAssessment, AssessmentError> {
    expect_op(atom, &[GoalOp::Minimize, GoalOp::Maximize], "minimize or maximize")?;
    let probe = Probe::new(atom);
    let last = log.last()?;
    let size = target_size(atom, scales)?;
    let n = log.records.len() as f64;
    let reached = log.records.iter().any(|r| probe.inside(&r.state));
    let mean_dist = log.records.iter().map(|r| probe.distance(&r.state)).sum::<f64>() / n;
    let mean_value = log.records.iter().map(|r| probe.value(&r.state)).sum::<f64>() / n;
    Ok(GoalAssessment {
        goal: atom.name.clone(),
        op: atom.op,
        success: reached,
        gsr: if reached { 1.0 } else { 1.0 - clamp01(mean_dist / size) },
        extras: Extras {
            mean_value: Some(mean_value),
            distance: Some(probe.distance(&last.state)),
            ..Extras::default()
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSummary {
    pub goal: String,
    pub op: GoalOp,
    #[serde(rename = "SuccessRate")]
    pub success_rate: f64,
    #[serde(rename = "GoalSatisfactionRate")]
    pub mean_gsr: f64,
    /// Batch means of the per-episode extras.
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub episodes: usize,
    pub goals: Vec<GoalSummary>,
    #[serde(rename = "SuccessRate")]
    pub success_rate: f64,
    #[serde(rename = "OverallGoalSatisfactionRate")]
    pub overall_gsr: f64,
    /// Per episode, per goal (in declaration order).
    pub per_episode: Vec<Vec<GoalAssessment>>,
}

impl AssessmentReport {
    pub fn goal(&self, name: &str) -> Option<&GoalSummary> {
        self.goals.iter().find(|g| g.goal == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let w = self.goals.iter().map(|g| g.goal.len()).max().unwrap_or(4).max(7);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$}  {:<8}  {:>11}  {:>6}", "goal", "operator", "SuccessRate", "GSR");
        for g in &self.goals {
            let _ = writeln!(
                s,
                "{:<w$}  {:<8}  {:>11.3}  {:>6.3}",
                g.goal,
                g.op.keyword(),
                g.success_rate,
                g.mean_gsr
            );
        }
        let _ = writeln!(
            s,
            "{:<w$}  {:<8}  {:>11.3}  {:>6.3}   ({} episodes)",
            "overall", "", self.success_rate, self.overall_gsr, self.episodes
        );
        s
    }
}

/// Assesses one goal in one episode. `reference_length` is only used by
/// drive goals.
pub fn assess_goal(
    log: &EpisodeLog,
    atom: &GoalAtom,
    scales: &ScaleTable,
    reference_length: f64,
) -> Result<GoalAssessment, AssessmentError> {
    match atom.op {
        GoalOp::Reach => assess_reach(log, atom, scales),
        GoalOp::Avoid => assess_avoid(log, atom),
        GoalOp::Drive => assess_drive(log, atom, reference_length),
        GoalOp::Minimize | GoalOp::Maximize => assess_minmax(log, atom, scales),
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn mean_opt<'a>(xs: impl Iterator<Item = &'a Option<f64>> + Clone) -> Option<f64> {
    xs.clone().any(|x| x.is_some()).then(|| mean(xs.filter_map(|x| *x)))
}

/// Batch report: per-goal success rates and mean GSR, the joint success
/// rate and the mean of the per-goal GSRs.
pub fn aggregate(logs: &[EpisodeLog], program: &GoalProgram, scales: &ScaleTable) -> Result<AssessmentReport, AssessmentError> {
    if logs.is_empty() {
        return Err(AssessmentError::EmptyBatch);
    }
    let atoms = program.atoms();
    let refs: Vec<f64> = atoms.iter().map(|a| drive_reference_length(logs, a)).collect();
    let per_episode = logs
        .iter()
        .map(|log| {
            atoms
                .iter()
                .zip(&refs)
                .map(|(a, &r)| assess_goal(log, a, scales, r))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = logs.len() as f64;
    let goals: Vec<GoalSummary> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let col = || per_episode.iter().map(move |ep| &ep[i]);
            GoalSummary {
                goal: a.name.clone(),
                op: a.op,
                success_rate: col().filter(|g| g.success).count() as f64 / n,
                mean_gsr: mean(col().map(|g| g.gsr)),
                extras: Extras {
                    percentage_of_iterations_in_target_region: mean_opt(
                        col().map(|g| &g.extras.percentage_of_iterations_in_target_region),
                    ),
                    max_target_reaching_iterations: mean_opt(col().map(|g| &g.extras.max_target_reaching_iterations)),
                    mean_value: mean_opt(col().map(|g| &g.extras.mean_value)),
                    distance: mean_opt(col().map(|g| &g.extras.distance)),
                },
            }
        })
        .collect();
    let joint = per_episode.iter().filter(|ep| ep.iter().all(|g| g.success)).count() as f64 / n;
    Ok(AssessmentReport {
        episodes: logs.len(),
        success_rate: joint,
        overall_gsr: mean(goals.iter().map(|g| g.mean_gsr)),
        goals,
        per_episode,
    })
}
