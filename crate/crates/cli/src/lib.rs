//! `goalforge` command implementations. The binary is a thin wrapper that
//! parses arguments, sets up logging and maps [`CliError`] to exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use goalforge::assessment::AssessmentReport;
use goalforge::envs::{EnvKind, Environment};
use goalforge::goal_lang::StateSchema;
use goalforge::reward::{ConditioningConfig, ScaleTable};
use goalforge::sfspa::Sfspa;
use goalforge::trainer::{
    curve_csv, eval_seed, evaluate, train, Checkpoint, CurveRecord, TrainError, TrainerConfig, CHECKPOINT_SCHEMA,
};
use goalforge::{compile, Compiled};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_SCHEMA: &str = "goalforge.manifest/1";

#[derive(Debug, Error)]
pub enum CliError {
    /// Goal, schema or config could not be parsed or validated.
    #[error("{0}")]
    Invalid(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("CorruptCheckpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::CorruptCheckpoint(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(m) => CliError::Invalid(format!("InvalidConfig: {m}")),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "goalforge", version, about = "Compile goal specifications into automata and rewards, train and assess policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a goal file and emit its formula, automaton and DOT graph.
    Compile(CompileArgs),
    /// Train a policy against the goal's reward in a bundled environment.
    Train(TrainArgs),
    /// Evaluate a checkpoint and report goal satisfaction metrics.
    Assess(AssessArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CompileArgs {
    pub goal: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Write the ETLTL formula as an S-expression.
    #[arg(long, value_name = "PATH")]
    pub emit_etltl: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub emit_automaton: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub emit_dot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    pub goal: PathBuf,
    /// Environment: tank or plate.
    #[arg(long)]
    pub env: String,
    /// Defaults to the environment's own schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// TOML file with a `[trainer]` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AssessArgs {
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for per-episode JSONL logs.
    #[arg(long)]
    pub logs: Option<PathBuf>,
}

/// `config.toml` contents.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trainer: TrainerConfig,
    /// Episodes for the report printed after training; 0 skips it.
    pub report_episodes: usize,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => toml::from_str(&read(p)?).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display()))),
        }
    }
}

/// Reproducibility record written before any training output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub goal: PathBuf,
    pub state_schema: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub env: String,
    pub seed: u64,
    pub eval_seed: u64,
    pub report_seed: u64,
    pub automaton_hash: String,
    pub trainer: TrainerConfig,
}

/// A goal compiled against an environment, ready to train.
pub struct Task {
    pub env: EnvKind,
    pub source: String,
    pub schema: StateSchema,
    pub compiled: Compiled,
    pub automaton: Arc<Sfspa>,
    pub conditioning: Arc<ConditioningConfig>,
}

impl Task {
    pub fn load(goal: &Path, env: &str, schema: Option<&Path>) -> Result<Task, CliError> {
        let env: EnvKind = env.parse().map_err(CliError::Usage)?;
        let env_schema = env.make().schema();
        let schema = match schema {
            None => env_schema,
            Some(p) => {
                let s = StateSchema::from_toml(&read(p)?).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
                if !s.names().eq(env_schema.names()) {
                    return Err(CliError::Invalid(format!(
                        "{}: fields {:?} do not match the {env} state {:?}",
                        p.display(),
                        s.names().collect::<Vec<_>>(),
                        env_schema.names().collect::<Vec<_>>()
                    )));
                }
                s
            }
        };
        let source = read(goal)?;
        Task::from_source(env, source, schema)
    }

    pub fn from_source(env: EnvKind, source: String, schema: StateSchema) -> Result<Task, CliError> {
        let compiled = compile(&source, &schema).map_err(|e| CliError::Invalid(e.render(&source)))?;
        let automaton = Arc::new(compiled.automaton.clone());
        let conditioning = Arc::new(ConditioningConfig::new(
            ScaleTable::from_schema(&schema),
            env.make().max_steps(),
        ));
        Ok(Task {
            env,
            source,
            schema,
            compiled,
            automaton,
            conditioning,
        })
    }

    pub fn factory(&self) -> impl Fn() -> Box<dyn Environment> + Sync {
        let kind = self.env;
        move || kind.make()
    }
}

pub fn cmd_compile(args: &CompileArgs) -> Result<Compiled, CliError> {
    let schema_text = read(&args.schema)?;
    let schema = StateSchema::from_toml(&schema_text).map_err(|e| CliError::Invalid(format!("{}: {e}", args.schema.display())))?;
    let source = read(&args.goal)?;
    let compiled = compile(&source, &schema).map_err(|e| CliError::Invalid(e.render(&source)))?;
    let mut emitted = false;
    if let Some(p) = &args.emit_etltl {
        write(p, &(compiled.formula.to_sexpr() + "\n"))?;
        emitted = true;
    }
    if let Some(p) = &args.emit_automaton {
        write(p, &compiled.automaton.to_json())?;
        emitted = true;
    }
    if let Some(p) = &args.emit_dot {
        write(p, &compiled.automaton.to_dot())?;
        emitted = true;
    }
    if !emitted {
        println!("{}", compiled.formula.to_sexpr());
    }
    log::info!(
        "{} states, {} edges, automaton {}",
        compiled.automaton.num_states(),
        compiled.automaton.edges().len(),
        compiled.automaton.hash()
    );
    Ok(compiled)
}

pub struct TrainSummary {
    pub manifest: RunManifest,
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurveRecord>,
    pub interactions: u64,
    /// Best policy evaluated on `report_episodes` episodes from the report
    /// seed.
    pub report: Option<AssessmentReport>,
}

/// Seeds of the post-training report, disjoint from training and
/// per-iteration evaluation seeds.
pub fn report_seed(cfg: &TrainerConfig) -> u64 {
    cfg.seed.wrapping_add(0xA55E_0000_0000)
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary, CliError> {
    let task = Task::load(&args.goal, &args.env, args.schema.as_deref())?;
    let mut run = RunConfig::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        run.trainer.seed = seed;
    }
    run.trainer.validate()?;
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        tool_version: VERSION.into(),
        goal: args.goal.clone(),
        state_schema: args.schema.clone(),
        config: args.config.clone(),
        env: task.env.to_string(),
        seed: run.trainer.seed,
        eval_seed: eval_seed(&run.trainer),
        report_seed: report_seed(&run.trainer),
        automaton_hash: task.automaton.hash(),
        trainer: run.trainer.clone(),
    };
    write(&args.out.join("manifest.json"), &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;

    let factory = task.factory();
    let out = train(
        &factory,
        &task.compiled.program,
        Arc::clone(&task.automaton),
        Arc::clone(&task.conditioning),
        &run.trainer,
    )?;
    write(&args.out.join("curve.csv"), &curve_csv(&out.curve))?;
    let checkpoint = Checkpoint {
        schema: CHECKPOINT_SCHEMA.into(),
        env: task.env.to_string(),
        program: task.source.clone(),
        state_schema: task.schema.clone(),
        conditioning: (*task.conditioning).clone(),
        trainer: run.trainer.clone(),
        policy: out.policy.clone(),
        automaton_hash: manifest.automaton_hash.clone(),
    };
    write(&args.out.join("checkpoint.json"), &checkpoint.to_json())?;

    let report = if run.report_episodes > 0 {
        let mut env = task.env.make();
        let ev = evaluate(
            &out.policy,
            env.as_mut(),
            &task.compiled.program,
            &task.automaton,
            &task.conditioning,
            run.report_episodes,
            report_seed(&run.trainer),
        )?;
        Some(ev.report)
    } else {
        None
    };
    Ok(TrainSummary {
        manifest,
        checkpoint,
        curve: out.curve,
        interactions: out.interactions,
        report,
    })
}

/// Checks a checkpoint against its own program and environment.
pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, Task), CliError> {
    let ckpt = Checkpoint::from_json(&read(path)?).map_err(CliError::CorruptCheckpoint)?;
    let env: EnvKind = ckpt.env.parse().map_err(CliError::CorruptCheckpoint)?;
    let task = Task::from_source(env, ckpt.program.clone(), ckpt.state_schema.clone())
        .map_err(|e| CliError::CorruptCheckpoint(format!("program does not compile: {e}")))?;
    let hash = task.automaton.hash();
    if hash != ckpt.automaton_hash {
        return Err(CliError::CorruptCheckpoint(format!(
            "automaton hash {hash} does not match recorded {}",
            ckpt.automaton_hash
        )));
    }
    let expected = task.schema.len() + task.automaton.num_states();
    if ckpt.policy.arch.inputs != expected || ckpt.policy.params.len() != ckpt.policy.arch.param_count() {
        return Err(CliError::CorruptCheckpoint("policy shape does not match the automaton".into()));
    }
    Ok((ckpt, task))
}

pub fn cmd_assess(args: &AssessArgs) -> Result<AssessmentReport, CliError> {
    if args.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let (ckpt, task) = load_checkpoint(&args.checkpoint)?;
    let mut env = task.env.make();
    let ev = evaluate(
        &ckpt.policy,
        env.as_mut(),
        &task.compiled.program,
        &task.automaton,
        &task.conditioning,
        args.episodes,
        args.seed,
    )?;
    if let Some(dir) = &args.logs {
        for (i, log) in ev.logs.iter().enumerate() {
            write(&dir.join(format!("episode_{i:04}.jsonl")), &log.to_jsonl())?;
        }
    }
    Ok(ev.report)
}

/// Runs one parsed command, printing results to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compile(a) => cmd_compile(&a).map(|_| ()),
        Command::Train(a) => {
            let s = cmd_train(&a)?;
            println!(
                "trained {} iterations, {} interactions; outputs in {}",
                s.curve.len(),
                s.interactions,
                a.out.display()
            );
            if let Some(r) = &s.report {
                print!("{}", r.to_table());
            }
            Ok(())
        }
        Command::Assess(a) => {
            let report = cmd_assess(&a)?;
            match &a.report {
                Some(p) => {
                    write(p, &report.to_json())?;
                    print!("{}", report.to_table());
                }
                None => println!("{}", report.to_json()),
            }
            Ok(())
        }
    }
}
